import math

import pytest
from hypothesis import given, strategies as st

from invtight.model import (
    CostModel,
    CycleAddress,
    CycleRecord,
    OrderEvent,
    address_from_index,
    holding_rate,
    large_level,
    linear_index,
    order_cost,
    pow2_half,
    unit_count,
)


def test_holding_rate_examples():
    assert holding_rate(0.0) == 0.0
    assert holding_rate(3.0) == 6.0
    assert holding_rate(-2.0) == 4.0


@given(st.floats(-1e12, 1e12, allow_nan=False))
def test_holding_rate_even_and_nonnegative(x):
    assert holding_rate(x) == holding_rate(-x)
    assert holding_rate(x) >= 0.0
    assert (holding_rate(x) == 0.0) == (x == 0.0)


def test_order_cost_examples():
    m = CostModel(k1=1.0)
    assert order_cost(0.0, 1.0, m) == 2.0
    assert order_cost(2.0, 2.0, m) == 1.0  # zero-size orders still pay k1
    with pytest.raises(ValueError):
        order_cost(1.0, 0.0, m)


@given(
    st.floats(0.1, 10.0),
    st.floats(0.0, 2.0**20),
    st.floats(0.0, 2.0**20),
)
def test_order_cost_proportional_part(k1, a, b):
    y, z = min(a, b), max(a, b)
    m = CostModel(k1=k1)
    cost = order_cost(y, z, m)
    assert cost >= m.k1
    assert cost - m.k1 == pytest.approx(z - y, rel=1e-12, abs=1e-9)


def test_cost_model_requires_positive_k1():
    with pytest.raises(ValueError):
        CostModel(k1=0.0)
    with pytest.raises(ValueError):
        CostModel(k1=-1.0)


def test_pow2_half_exact_on_even_exponents():
    assert pow2_half(0) == 1.0
    assert pow2_half(4) == 4.0
    assert pow2_half(1) == math.sqrt(2.0)
    assert pow2_half(9) == pytest.approx(16.0 * math.sqrt(2.0), rel=1e-15)


def test_linear_index_examples():
    assert linear_index(CycleAddress(1, 1)) == 1
    assert linear_index(CycleAddress(2, 0)) == 2  # cycle 1's large order
    assert linear_index(CycleAddress(3, 4)) == 9


def test_linear_index_rejects_non_canonical():
    # natural large-order address and zero-size addresses are domain errors
    with pytest.raises(ValueError):
        linear_index(CycleAddress(3, 5))
    with pytest.raises(ValueError):
        linear_index(CycleAddress(3, 7))
    assert CycleAddress(3, 5).canonical() == CycleAddress(4, 0)
    assert linear_index(CycleAddress(3, 5).canonical()) == 10


@st.composite
def canonical_addresses(draw):
    i = draw(st.integers(1, 41))
    if i == 1:
        return CycleAddress(1, 1)
    j = draw(st.integers(0, unit_count(i)))
    if j == 0:
        return CycleAddress(i, 0)
    return CycleAddress(i, j)


@given(canonical_addresses())
def test_linear_index_roundtrip(a):
    n = linear_index(a)
    assert 1 <= n <= (1 << 41) + 41
    assert address_from_index(n) == a


@given(st.integers(1, 1 << 40))
def test_index_inverse_up_to_2_to_40(n):
    a = address_from_index(n)
    assert linear_index(a) == n


def test_linear_index_lexicographic_monotone():
    prev = 0
    for i in range(1, 12):
        js = [0] if i >= 2 else []
        js += list(range(1, unit_count(i) + 1))
        for j in js:
            n = linear_index(CycleAddress(i, j))
            assert n == prev + 1
            prev = n


def test_address_kinds_and_levels():
    assert CycleAddress(3, 2).kind == "unit"
    assert CycleAddress(3, 5).kind == "large"
    assert CycleAddress(3, 6).kind == "zero"
    assert CycleAddress(4, 0).kind == "large"
    assert CycleAddress(4, 0).start_level == large_level(3) == 2.0
    assert CycleAddress(3, 2).start_level == 1.0
    with pytest.raises(ValueError):
        CycleAddress(1, 0)
    with pytest.raises(ValueError):
        CycleAddress(2, 6)  # beyond 2**i + 1


def test_order_event_validation():
    ev = OrderEvent(1.0, 0.0, 1.0, CycleAddress(1, 1))
    assert not ev.is_zero_size
    zero = OrderEvent(1.0, 2.0, 2.0, CycleAddress(2, 4))
    assert zero.is_zero_size
    assert zero.cost(CostModel(1.0)) == 1.0
    with pytest.raises(ValueError):
        OrderEvent(1.0, 2.0, 1.0, CycleAddress(1, 1))


def test_cycle_record_validation():
    rec = CycleRecord(1.0, 0.5, 0.25)
    assert rec.holding_cost == 0.25
    assert CycleRecord(1.0, 0.5).holding_cost is None
    with pytest.raises(ValueError):
        CycleRecord(0.0, 1.0)
    with pytest.raises(ValueError):
        CycleRecord(1.0, 0.0)
    with pytest.raises(ValueError):
        CycleRecord(1.0, 1.0, -0.1)
