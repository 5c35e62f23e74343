import math

import numpy as np
import pytest

from invtight import det, oracle
from invtight.model import CostModel, large_level

from bruteforce import det_orders, holding_integral, occupation_masses, ordering_cost, ordering_points

M1 = CostModel(1.0)


def test_build_schedule_cycle_one():
    s = det.build_schedule(1)
    assert s.cycle_start(1) == 0.0
    assert s.large_time(1) == 1.0  # the size-1 large order and its zero twin
    assert s.horizon == 2.0


def test_build_schedule_cycle_two_and_three():
    s = det.build_schedule(3)
    assert s.cycle_start(2) == 2.0
    assert s.large_time(2) == 4.0
    assert large_level(2) == pytest.approx(math.sqrt(2.0))
    assert s.cycle_start(3) == pytest.approx(4.0 + math.sqrt(2.0), rel=1e-15)


def test_build_schedule_guardrails():
    with pytest.raises(ValueError):
        det.build_schedule(0)
    with pytest.raises(ValueError):
        det.build_schedule(61)


def test_schedule_matches_oracle_closed_forms():
    s = det.build_schedule(30)
    for i in range(1, 31):
        assert s.cycle_length(i) == pytest.approx(oracle.det_cycle_length(i), rel=1e-12)
        assert float(s.start[i]) == pytest.approx(oracle.det_total_time(i), rel=1e-12)


def test_state_at_examples():
    s = det.build_schedule(4)
    assert det.state_at(0.0, s) == 1.0
    assert det.state_at(0.5, s) == 0.5
    for i in range(1, 5):
        eps = 1e-9
        assert det.state_at(float(s.start[i]) - eps, s) == pytest.approx(0.0, abs=2e-9)
    with pytest.raises(ValueError):
        det.state_at(s.horizon, s)
    with pytest.raises(ValueError):
        det.state_at(-0.1, s)


def test_state_right_continuous_at_orders():
    s = det.build_schedule(3)
    assert det.state_at(2.0, s) == 1.0  # first unit order of cycle 2
    assert det.state_at(4.0, s) == pytest.approx(math.sqrt(2.0))  # large order


def test_state_range_within_cycle():
    s = det.build_schedule(6)
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, s.horizon, size=200):
        x = det.state_at(float(t), s)
        c = int(np.searchsorted(s.start, t, side="right"))
        assert -1e-12 <= x <= large_level(c) + 1e-12


def test_cycle_costs_match_oracle():
    for i in range(1, 31):
        hold, orde = oracle.det_cycle_costs(i, M1)
        assert det.cycle_holding_cost(i) == pytest.approx(hold, rel=1e-12)
        assert det.cycle_ordering_cost(i, M1) == pytest.approx(orde, rel=1e-12)


def test_running_cost_average_cycle_one():
    s = det.build_schedule(2)
    hold, orde, total = det.running_cost_average(2.0, s, M1)
    assert hold == pytest.approx(1.0, rel=1e-12)
    assert orde == pytest.approx(2.5, rel=1e-12)
    assert total == pytest.approx(3.5, rel=1e-12)


def test_running_cost_average_matches_oracle_partial_sums():
    s = det.build_schedule(10)
    for n in (1, 2, 5, 10):
        t = float(s.start[n])
        _, _, total = det.running_cost_average(t, s, M1)
        assert total == pytest.approx(oracle.det_total_cost(n, M1) / t, rel=1e-12)


def test_running_cost_average_stays_under_asymptotic_bound():
    s = det.build_schedule(30)
    bound = oracle.bounds(M1)["det_total_avg_cost"]
    for n in range(1, 31):
        _, _, total = det.running_cost_average(float(s.start[n]), s, M1)
        assert total <= bound


def test_running_cost_average_against_bruteforce():
    i_max = 6
    s = det.build_schedule(i_max)
    orders, horizon = det_orders(i_max)
    assert horizon == pytest.approx(s.horizon, rel=1e-12)
    rng = np.random.default_rng(42)
    for t in list(rng.uniform(0.05, horizon, size=50)) + [2.0, 4.0, horizon]:
        t = float(t)
        hold, orde, _ = det.running_cost_average(t, s, M1)
        assert hold * t == pytest.approx(holding_integral(orders, t), rel=1e-10, abs=1e-10)
        assert orde * t == pytest.approx(ordering_cost(orders, t, 1.0), rel=1e-10)


def test_exact_measures_cycle_one():
    s = det.build_schedule(2)
    snap = det.exact_measures(2.0, s)
    assert snap.ord_points == {(0.0, 1.0): 1.0, (1.0, 1.0): 0.5}
    assert snap.occ_total() == pytest.approx(1.0, abs=1e-9)
    inside = snap.occ_mass[(snap.occ_edges[:-1] >= 0.0) & (snap.occ_edges[1:] <= 1.0)]
    assert inside.sum() == pytest.approx(1.0, abs=1e-9)


def test_exact_measures_total_masses():
    s = det.build_schedule(8)
    rng = np.random.default_rng(3)
    orders, _ = det_orders(8)
    for t in rng.uniform(0.5, s.horizon, size=20):
        snap = det.exact_measures(float(t), s)
        assert snap.occ_total() == pytest.approx(1.0, abs=1e-9)
        n_before = sum(1 for tt, _, _ in orders if tt < t)
        assert snap.ord_total() * t == pytest.approx(n_before, rel=1e-12)


def test_exact_measures_against_bruteforce():
    i_max = 5
    s = det.build_schedule(i_max)
    orders, horizon = det_orders(i_max)
    edges = det.default_occ_edges(large_level(i_max))
    rng = np.random.default_rng(7)
    for t in list(rng.uniform(0.5, horizon, size=15)) + [float(s.start[n]) for n in range(1, 6)]:
        t = float(t)
        snap = det.exact_measures(t, s, edges=edges)
        brute_pts = ordering_points(orders, t)
        assert set(snap.ord_points) == set(brute_pts)
        for key, w in brute_pts.items():
            assert snap.ord_points[key] == pytest.approx(w, rel=1e-12)
        brute_occ = occupation_masses(orders, t, list(edges))
        np.testing.assert_allclose(snap.occ_mass, brute_occ, rtol=1e-9, atol=1e-12)


def test_boundary_snapshot_diagonal_mass_matches_oracle():
    s = det.build_schedule(20)
    edges = det.default_occ_edges(2.0)  # coarse; only point masses matter here
    for n in range(1, 21):
        snap = det.boundary_snapshot(n, s, edges=edges)
        z = large_level(n)
        assert snap.ord_points[(z, z)] == pytest.approx(oracle.det_diagonal_mass(n), rel=1e-12)


def test_holding_cost_per_cycle_is_power_of_two():
    # cumulative holding cost through cycle n is sum of 2**i = 2**(n+1) - 2
    s = det.build_schedule(12)
    for n in range(1, 13):
        t = float(s.start[n])
        hold_avg, _, _ = det.running_cost_average(t, s, M1)
        assert hold_avg * t == pytest.approx(2.0 ** (n + 1) - 2.0, rel=1e-12)


def test_ledger_rows():
    s = det.build_schedule(5)
    led = det.ledger(s, s.boundary_times(), M1)
    assert len(led.rows) == 5
    assert led.rows[0].holding_avg == pytest.approx(1.0)
    assert led.rows[0].ordering_avg == pytest.approx(2.5)
    assert led.rows[0].total_avg == pytest.approx(3.5)


def test_time_domain_errors():
    s = det.build_schedule(3)
    with pytest.raises(ValueError):
        det.running_cost_average(0.0, s, M1)
    with pytest.raises(ValueError):
        det.running_cost_average(s.horizon + 1.0, s, M1)
    with pytest.raises(ValueError):
        det.exact_measures(-1.0, s)
