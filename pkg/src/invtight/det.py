"""Exact engine for the constant-demand model under the cyclic policy.

Demand is 1 unit per unit time, the inventory starts at 0 and every quantity
is evaluated in closed form from the cycle structure; there is no time
stepping anywhere, so the engine doubles as an exact target for the
stochastic engine's estimators.

Convention: a window [0, t] counts orders placed strictly before t.  An
order placed at exactly t changes the state from t onward and belongs to the
next window, which keeps every cycle-boundary evaluation equal to the sum
over completed cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import CostLedger, LedgerRow, MeasureSnapshot
from .model import MAX_CYCLE, CostModel, large_level, order_cost, unit_count


@dataclass(frozen=True, eq=False)
class DetSchedule:
    """Order schedule for cycles 1..i_max.

    start[i-1] is the start time of cycle i and start[i_max] the horizon.
    Within cycle i the unit orders sit at start + 0, 1, ..., 2**(i-1) - 1,
    the large order (with its zero-size block) at start + 2**(i-1).
    """

    i_max: int
    start: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.start[self.i_max])

    def cycle_start(self, i: int) -> float:
        return float(self.start[i - 1])

    def cycle_length(self, i: int) -> float:
        return float(self.start[i] - self.start[i - 1])

    def large_time(self, i: int) -> float:
        return float(self.start[i - 1] + unit_count(i))

    def boundary_times(self) -> np.ndarray:
        """Cycle end times t(n+1,1), the canonical snapshot instants."""
        return self.start[1:].copy()


def build_schedule(i_max: int) -> DetSchedule:
    """Accumulate the cycle start times for cycles 1..i_max."""
    if not 1 <= i_max <= MAX_CYCLE:
        raise ValueError(f"i_max must be in 1..{MAX_CYCLE}, got {i_max}")
    start = np.empty(i_max + 1)
    start[0] = 0.0
    for i in range(1, i_max + 1):
        # Phase 1: 2**(i-1) unit sub-cycles of length 1; Phase 2: one
        # sub-cycle draining the large order
        start[i] = start[i - 1] + float(unit_count(i)) + large_level(i)
    return DetSchedule(i_max=i_max, start=start)


def _locate(t: float, s: DetSchedule) -> tuple[int, float]:
    """(cycle containing t, offset into it); cycle i_max+1 marks the horizon."""
    c = int(np.searchsorted(s.start, t, side="right"))
    return c, t - float(s.start[c - 1])


def state_at(t: float, s: DetSchedule) -> float:
    """Inventory level x(t), right-continuous at order times."""
    if not 0 <= t < s.horizon:
        raise ValueError(f"t={t} outside the schedule window [0, {s.horizon})")
    c, off = _locate(t, s)
    nu = unit_count(c)
    if off < nu:
        return 1.0 - (off - math.floor(off))
    return large_level(c) - (off - nu)


def cycle_holding_cost(i: int) -> float:
    """Holding cost accumulated over cycle i, by per-segment integration.

    Each sub-cycle draining level z contributes integral(2(z-s), 0..z) = z*z.
    """
    z = large_level(i)
    return unit_count(i) * 1.0 + z * z


def cycle_ordering_cost(i: int, m: CostModel) -> float:
    """Ordering cost of cycle i, summed order by order kind."""
    nu = unit_count(i)
    z = large_level(i)
    return nu * order_cost(0.0, 1.0, m) + order_cost(0.0, z, m) + nu * order_cost(z, z, m)


def _ordering_counts(t: float, s: DetSchedule) -> dict[tuple[float, float], float]:
    """Raw order counts per (pre, post) point over [0, t)."""
    c, off = _locate(t, s)
    counts: dict[tuple[float, float], float] = {}

    def bump(key: tuple[float, float], n: float) -> None:
        counts[key] = counts.get(key, 0.0) + n

    for i in range(1, c):
        z = large_level(i)
        bump((0.0, 1.0), unit_count(i))
        bump((0.0, z), 1)
        bump((z, z), unit_count(i))
    if c <= s.i_max:
        nu = unit_count(c)
        placed_units = min(nu, math.ceil(off))
        if placed_units:
            bump((0.0, 1.0), placed_units)
        if off > nu:
            z = large_level(c)
            bump((0.0, z), 1)
            bump((z, z), nu)
    return counts


def running_cost_average(t: float, s: DetSchedule, m: CostModel) -> tuple[float, float, float]:
    """(holding, ordering, total) cost averages over [0, t]."""
    if not 0 < t <= s.horizon:
        raise ValueError(f"t={t} outside (0, {s.horizon}]")
    c, off = _locate(t, s)
    holding = sum(cycle_holding_cost(i) for i in range(1, c))
    if c <= s.i_max:
        nu = unit_count(c)
        if off <= nu:
            whole = math.floor(off)
            frac = off - whole
            holding += whole * 1.0 + frac * (2.0 - frac)
        else:
            e = off - nu
            holding += nu * 1.0 + e * (2.0 * large_level(c) - e)
    ordering = 0.0
    for (y, z), n in _ordering_counts(t, s).items():
        ordering += n * order_cost(y, z, m)
    return holding / t, ordering / t, (holding + ordering) / t


def default_occ_edges(z_max: float, width: float = 1.0 / 16.0, max_bins: int = 1 << 16) -> np.ndarray:
    """Uniform bin edges on [0, z_max], widening the bins when z_max is huge.

    Widths stay power-of-two multiples of the base so that any window size
    on the same dyadic grid aligns with a bin edge.
    """
    hi = max(z_max, width)
    while hi / width > max_bins:
        width *= 2.0
    n = math.ceil(hi / width - 1e-9)
    return width * np.arange(n + 1)


def exact_occupation(t: float, s: DetSchedule, edges: np.ndarray) -> np.ndarray:
    """Occupation histogram over [0, t]: fraction of time per level bin.

    The path is piecewise linear with slope -1, so a sub-cycle draining
    level z occupies every level of [0, z] for exactly one time unit per
    unit of level; bin masses are exact interval overlaps.
    """
    if not 0 < t <= s.horizon:
        raise ValueError(f"t={t} outside (0, {s.horizon}]")
    lo = edges[:-1]
    hi = edges[1:]
    masses = np.zeros(lo.size)

    def add(a: float, b: float, count: float = 1.0) -> None:
        if b > a:
            masses[:] += count * np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)

    c, off = _locate(t, s)
    for i in range(1, c):
        add(0.0, 1.0, unit_count(i))
        add(0.0, large_level(i))
    if c <= s.i_max:
        nu = unit_count(c)
        if off <= nu:
            whole = math.floor(off)
            add(0.0, 1.0, whole)
            add(1.0 - (off - whole), 1.0)
        else:
            add(0.0, 1.0, nu)
            z = large_level(c)
            add(z - (off - nu), z)
    return masses / t


def exact_measures(
    t: float,
    s: DetSchedule,
    edges: np.ndarray | None = None,
    label: str | None = None,
) -> MeasureSnapshot:
    """Occupation and ordering measures over [0, t], both exact."""
    if edges is None:
        c, _ = _locate(min(t, np.nextafter(s.horizon, 0.0)), s)
        edges = default_occ_edges(large_level(min(c, s.i_max)))
    counts = _ordering_counts(t, s)
    return MeasureSnapshot(
        label=label if label is not None else f"t={t!r}",
        t=t,
        ord_points={k: n / t for k, n in counts.items()},
        occ_edges=edges,
        occ_mass=exact_occupation(t, s, edges),
    )


def boundary_snapshot(n: int, s: DetSchedule, edges: np.ndarray | None = None) -> MeasureSnapshot:
    """Snapshot at the end of cycle n, covering exactly cycles 1..n."""
    if not 1 <= n <= s.i_max:
        raise ValueError(f"cycle label {n} outside 1..{s.i_max}")
    return exact_measures(float(s.start[n]), s, edges=edges, label=f"n={n}")


def ledger(s: DetSchedule, grid: np.ndarray, m: CostModel) -> CostLedger:
    """Running cost averages on a time grid."""
    rows = []
    for t in np.atleast_1d(np.asarray(grid, dtype=float)):
        hold, orde, _ = running_cost_average(float(t), s, m)
        rows.append(LedgerRow(t=float(t), holding_avg=hold, ordering_avg=orde))
    return CostLedger(tuple(rows))
