"""Domain types and cost primitives for the cyclic impulse-ordering policy.

The policy runs in cycles.  Cycle i (i >= 1) places

* 2**(i-1) orders of size 1, each raising the inventory from 0 back to 1
  ("unit" orders, Phase 1),
* one order up to level 2**((i-1)/2) when the inventory next returns to 0
  (the "large" order, opening Phase 2), and
* 2**(i-1) zero-size orders at the same instant as the large order; each
  pays the fixed cost k1 but leaves the inventory unchanged.

The cycle ends when the inventory next returns to 0, which starts cycle i+1.

Non-zero orders are numbered n = 1, 2, 3, ... in time order.  Within a cycle
the unit orders are j = 1..2**(i-1); the large order of cycle i-1 doubles as
order "zero" of cycle i.  Under that convention every non-zero order has the
unique linear index n = 2**(i-1) + i + j - 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

SQRT2 = math.sqrt(2.0)
#: 1 / (sqrt(2) - 1), precomputed once to full precision.
SQRT2_PLUS_1 = SQRT2 + 1.0

#: Largest supported cycle index; beyond this, schedule times overflow the
#: exact-integer range of float64.
MAX_CYCLE = 60


def pow2_half(m: int) -> float:
    """2**(m/2), via exact integer shifts when the exponent is integral."""
    if m < 0:
        return 2.0 ** (m / 2.0)
    half, odd = divmod(m, 2)
    return SQRT2 * float(1 << half) if odd else float(1 << half)


def unit_count(i: int) -> int:
    """Number of unit orders (also of zero-size orders) in cycle i."""
    return 1 << (i - 1)


def large_level(i: int) -> float:
    """Post-order inventory level of the large order of cycle i."""
    return pow2_half(i - 1)


def orders_in_cycle(i: int) -> int:
    """Total orders placed during cycle i, zero-size included: 2**i + 1."""
    return (1 << i) + 1


def nonzero_orders_through(i: int) -> int:
    """Count of non-zero orders in cycles 1..i: 2**i + i - 1."""
    return (1 << i) + i - 1


def all_orders_through(i: int) -> int:
    """Count of all orders in cycles 1..i, zero-size included."""
    return (1 << (i + 1)) + i - 2


@dataclass(frozen=True)
class CostModel:
    """Fixed-plus-proportional ordering cost with holding rate 2|x|.

    k1 is the fixed cost paid by every order, including zero-size orders.
    """

    k1: float = 1.0

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")

    def order_cost(self, y: float, z: float) -> float:
        return order_cost(y, z, self)

    def holding_rate(self, x: float) -> float:
        return holding_rate(x)


def holding_rate(x: float) -> float:
    """Holding/back-order cost rate 2|x|."""
    return 2.0 * abs(x)


def order_cost(y: float, z: float, m: CostModel) -> float:
    """Cost k1 + (z - y) of an order raising the level from y to z.

    A zero-size order (z == y) still pays k1.  y > z is a domain error:
    order sizes are nonnegative.
    """
    if y > z:
        raise ValueError(f"order size must be nonnegative: y={y} > z={z}")
    return m.k1 + (z - y)


@dataclass(frozen=True)
class CycleAddress:
    """Double index (i, j) of an order: cycle i, order j within the cycle.

    j = 1..2**(i-1) are the unit orders, j = 2**(i-1)+1 is the large order
    and j = 2**(i-1)+2 .. 2**i + 1 are the zero-size orders.  j = 0 (i >= 2)
    is the alias for the large order of cycle i-1 used by the linear index.
    """

    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i < 1:
            raise ValueError(f"cycle index must be >= 1, got {self.i}")
        if not 0 <= self.j <= (1 << self.i) + 1:
            raise ValueError(f"order index {self.j} out of range for cycle {self.i}")
        if self.j == 0 and self.i < 2:
            raise ValueError("j=0 aliases the previous cycle's large order; needs i >= 2")

    @property
    def kind(self) -> str:
        """'unit', 'large' or 'zero'."""
        if self.j == 0:
            return "large"
        nu = unit_count(self.i)
        if self.j <= nu:
            return "unit"
        return "large" if self.j == nu + 1 else "zero"

    def canonical(self) -> "CycleAddress":
        """Rewrite a large order (i, 2**(i-1)+1) in its j=0 alias (i+1, 0)."""
        if self.j == unit_count(self.i) + 1:
            return CycleAddress(self.i + 1, 0)
        return self

    @property
    def start_level(self) -> float:
        """Post-order level, i.e. the start level of the sub-cycle it opens."""
        if self.kind == "unit":
            return 1.0
        if self.kind == "zero":
            return large_level(self.i)
        return large_level(self.i - 1) if self.j == 0 else large_level(self.i)


def linear_index(a: CycleAddress) -> int:
    """Linear index n = 2**(i-1) + i + j - 2 of a non-zero order.

    Defined on the canonical addresses only: unit orders (i, 1..2**(i-1))
    and the j=0 alias of a large order.  Zero-size orders and the natural
    large-order address (i, 2**(i-1)+1) are domain errors; use
    ``a.canonical()`` for the latter.
    """
    nu = unit_count(a.i)
    if not (a.j == 0 or 1 <= a.j <= nu):
        raise ValueError(f"({a.i},{a.j}) is not a canonical non-zero-order address")
    return (1 << (a.i - 1)) + a.i + a.j - 2


def address_from_index(n: int) -> CycleAddress:
    """Inverse of linear_index; exact for n up to 2**60."""
    if n < 1:
        raise ValueError(f"linear index must be >= 1, got {n}")
    if n == 1:
        return CycleAddress(1, 1)
    # cycle block i covers n in [2**(i-1)+i-2, 2**i+i-2]
    i = max(2, n.bit_length() - 1)
    while (1 << i) + i - 2 < n:
        i += 1
    while (1 << (i - 1)) + i - 2 > n:
        i -= 1
    j = n - ((1 << (i - 1)) + i - 2)
    return CycleAddress(i, j)


@dataclass(frozen=True)
class OrderEvent:
    """One order: time, pre/post inventory levels and its cycle address."""

    time: float
    pre_level: float
    post_level: float
    address: CycleAddress
    is_zero_size: bool = field(default=False)

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError("order time must be nonnegative")
        if self.post_level < self.pre_level:
            raise ValueError("orders cannot decrease the inventory level")
        object.__setattr__(self, "is_zero_size", self.post_level == self.pre_level)

    def cost(self, m: CostModel) -> float:
        return order_cost(self.pre_level, self.post_level, m)


@dataclass(frozen=True)
class CycleRecord:
    """One completed sub-cycle: start level, duration and holding cost.

    holding_cost is None when the sampling mode does not resolve the path
    (renewal mode records durations only).
    """

    start_level: float
    duration: float
    holding_cost: float | None = None

    def __post_init__(self) -> None:
        if not self.start_level > 0:
            raise ValueError("sub-cycles start from a positive level")
        if not self.duration > 0:
            raise ValueError("sub-cycle duration must be positive")
        if self.holding_cost is not None and self.holding_cost < 0:
            raise ValueError("holding cost is nonnegative")


@dataclass(frozen=True, eq=False)
class Trace:
    """A realized path summary produced by the stochastic engine.

    ``order_times`` holds the times of the individually materialized non-zero
    orders (sigma_1, sigma_2, ...).  Cycles above ``materialized_i`` are kept
    only in aggregate (per-cycle boundary times), which is how very deep
    renewal runs stay within memory; ``large_times`` and ``cycle_ends`` are
    always populated for every cycle.

    In path mode ``holding`` aligns with ``order_times``: holding[k] is the
    holding cost accumulated over the sub-cycle opened by order k+1, and
    ``occ_time`` maps each cycle label to the cumulative time-per-bin
    occupancy histogram at that cycle's large-order snapshot time.
    """

    i_max: int
    mode: str  # "renewal" or "path"
    horizon: float
    order_times: np.ndarray
    materialized_i: int
    large_times: np.ndarray
    cycle_ends: np.ndarray
    holding: np.ndarray | None = None
    include_zero_orders: bool = True
    occ_edges: np.ndarray | None = None
    occ_time: dict[int, np.ndarray] | None = None

    @property
    def fully_materialized(self) -> bool:
        return self.materialized_i >= self.i_max

    @property
    def n_materialized(self) -> int:
        return int(self.order_times.size)

    def betas(self) -> np.ndarray:
        """Inter-order durations beta_k = sigma_{k+1} - sigma_k.

        The final sub-cycle (opened by the last order) ends at the horizon.
        Requires a fully materialized trace.
        """
        if not self.fully_materialized:
            raise ValueError("betas need a fully materialized trace")
        return np.diff(np.append(self.order_times, self.horizon))

    def start_levels(self) -> np.ndarray:
        """Start level of the sub-cycle opened by each materialized order."""
        out = np.ones(self.n_materialized)
        for i in range(1, self.materialized_i + 1):
            out[nonzero_orders_through(i) - 1] = large_level(i)
        return out

    def events(self) -> Iterator[OrderEvent]:
        """All orders in time order (large order first at a Phase-2 instant,
        then its zero-size block).  Materialized cycles only."""
        k = 0
        for i in range(1, self.materialized_i + 1):
            nu = unit_count(i)
            for j in range(1, nu + 1):
                yield OrderEvent(float(self.order_times[k]), 0.0, 1.0, CycleAddress(i, j))
                k += 1
            z = large_level(i)
            t_large = float(self.order_times[k])
            yield OrderEvent(t_large, 0.0, z, CycleAddress(i, nu + 1))
            k += 1
            if self.include_zero_orders:
                for j in range(1, nu + 1):
                    yield OrderEvent(t_large, z, z, CycleAddress(i, nu + 1 + j))

    def cycle_records(self) -> Iterator[CycleRecord]:
        """CycleRecords for the materialized non-zero sub-cycles."""
        if not self.fully_materialized:
            raise ValueError("cycle records need a fully materialized trace")
        levels = self.start_levels()
        durs = self.betas()
        for k in range(self.n_materialized):
            hold = None if self.holding is None else float(self.holding[k])
            yield CycleRecord(float(levels[k]), float(durs[k]), hold)
