"""Empirical occupation and ordering measures, tightness diagnostics and
running cost functionals, with associative cross-replication merging.

Snapshots are indexed by a label rather than wall-clock time because in the
stochastic model the natural snapshot instants (each cycle's large-order
time) are random; merging across replications is done per label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    CostModel,
    Trace,
    address_from_index,
    large_level,
    nonzero_orders_through,
    order_cost,
    unit_count,
)


class UnsupportedModeError(ValueError):
    """Raised when an operation needs path data a trace does not carry."""


@dataclass(frozen=True, eq=False)
class MeasureSnapshot:
    """Empirical occupation histogram and ordering point masses at one horizon.

    occ_mass (when present) sums to 1 and is normalized time-per-bin over
    [0, t]; the first and last bins also catch anything outside the edge
    range.  ord_points maps (pre-level, post-level) to weight, with weights
    summing to (number of orders counted) / t.  After merging, t and all
    masses are replication averages and rep_count records the multiplicity.
    """

    label: str
    t: float
    ord_points: dict[tuple[float, float], float]
    occ_edges: np.ndarray | None = None
    occ_mass: np.ndarray | None = None
    rep_count: int = 1

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise ValueError("snapshot horizon must be positive")
        for (y, z) in self.ord_points:
            if y > z:
                raise ValueError(f"ordering point ({y},{z}) violates y <= z")

    def ord_total(self) -> float:
        return float(sum(self.ord_points.values()))

    def occ_total(self) -> float:
        if self.occ_mass is None:
            raise UnsupportedModeError("snapshot carries no occupation histogram")
        return float(self.occ_mass.sum())


def merge(a: MeasureSnapshot, b: MeasureSnapshot) -> MeasureSnapshot:
    """Replication-count weighted average of two snapshots at the same label.

    Associative and commutative up to floating-point roundoff, so results do
    not depend on how replications are grouped across workers.
    """
    if a.label != b.label:
        raise ValueError(f"cannot merge snapshots with labels {a.label!r} and {b.label!r}")
    if (a.occ_mass is None) != (b.occ_mass is None):
        raise ValueError("cannot merge snapshots with and without occupation data")
    if a.occ_edges is not None and not np.array_equal(a.occ_edges, b.occ_edges):
        raise ValueError("cannot merge snapshots with different bin edges")
    wa = a.rep_count / (a.rep_count + b.rep_count)
    wb = 1.0 - wa
    pts = dict(a.ord_points)
    for key, w in b.ord_points.items():
        pts[key] = wa * pts.get(key, 0.0) + wb * w
    for key in a.ord_points.keys() - b.ord_points.keys():
        pts[key] = wa * a.ord_points[key]
    occ = None if a.occ_mass is None else wa * a.occ_mass + wb * b.occ_mass
    return MeasureSnapshot(
        label=a.label,
        t=wa * a.t + wb * b.t,
        ord_points=pts,
        occ_edges=a.occ_edges,
        occ_mass=occ,
        rep_count=a.rep_count + b.rep_count,
    )


def escape_mass(snap: MeasureSnapshot, m_level: float) -> tuple[float, float]:
    """(occupation, ordering) mass outside the compact window of size M.

    Occupation escape is the histogram mass outside [-M, M], apportioning a
    straddling bin linearly; nan when the snapshot has no histogram.
    Ordering escape is the weight of points outside [-M, M]^2.
    """
    if not m_level > 0:
        raise ValueError("M must be positive")
    occ = math.nan
    if snap.occ_mass is not None:
        lo = snap.occ_edges[:-1]
        hi = snap.occ_edges[1:]
        width = hi - lo
        inside = np.clip(np.minimum(hi, m_level) - np.maximum(lo, -m_level), 0.0, None)
        occ = float(np.sum(snap.occ_mass * (1.0 - inside / width)))
    ord_esc = 0.0
    for (y, z), w in snap.ord_points.items():
        if max(abs(y), abs(z)) > m_level:
            ord_esc += w
    return occ, ord_esc


@dataclass(frozen=True)
class TightnessProbe:
    """Escape masses over a geometric grid of window sizes, per snapshot."""

    m_grid: tuple[float, ...]
    rows: tuple[tuple[str, float, float, float], ...]  # (label, M, occ, ord)


def tightness_probe(snapshots: list[MeasureSnapshot], m_grid: tuple[float, ...]) -> TightnessProbe:
    if not m_grid or any(m <= 0 for m in m_grid):
        raise ValueError("M grid must be positive")
    rows = []
    for snap in snapshots:
        for m_level in m_grid:
            occ, orde = escape_mass(snap, m_level)
            rows.append((snap.label, m_level, occ, orde))
    return TightnessProbe(tuple(m_grid), tuple(rows))


@dataclass(frozen=True)
class LedgerRow:
    """Running averages over [0, t]: holding, ordering and their sum.

    Holding is nan when the trace does not resolve the path (renewal mode)
    or t is not a stored snapshot instant.
    """

    t: float
    holding_avg: float
    ordering_avg: float

    @property
    def total_avg(self) -> float:
        return self.holding_avg + self.ordering_avg


@dataclass(frozen=True)
class CostLedger:
    rows: tuple[LedgerRow, ...]


def _count_nonzero_orders(tr: Trace, t: float) -> int:
    """Number of non-zero orders placed by time t (inclusive)."""
    if t > tr.horizon:
        raise ValueError(f"t={t} beyond trace horizon {tr.horizon}")
    n_mat = tr.n_materialized
    if n_mat and t <= tr.order_times[-1]:
        return int(np.searchsorted(tr.order_times, t, side="right"))
    if tr.fully_materialized:
        return n_mat
    # aggregated cycles: order times are resolved only at the per-cycle
    # boundaries (large-order time, cycle end)
    c = int(np.searchsorted(tr.cycle_ends, t, side="left")) + 1  # end_{c} >= t
    if t == tr.cycle_ends[c - 1]:
        # cycle c just ended; the first unit order of cycle c+1 shares the time
        return nonzero_orders_through(c) + (1 if c < tr.i_max else 0)
    if t >= tr.large_times[c - 1]:
        return nonzero_orders_through(c)
    raise ValueError(
        f"t={t} falls inside aggregated cycle {c}; only boundary times are resolved"
    )


def _full_cycles(n: int) -> tuple[int, int]:
    """Decompose a non-zero order count into (cycles whose large order is
    among the n, extra unit orders of the following cycle)."""
    a = address_from_index(n + 1)  # the first order *not* yet placed
    if a.j == 0:  # order n+1 is the large order of cycle a.i - 1
        return a.i - 2, unit_count(a.i - 1)
    return a.i - 1, a.j - 1


def ordering_snapshot(tr: Trace, t: float) -> dict[tuple[float, float], float]:
    """Ordering-measure point weights over [0, t] for a stochastic trace.

    Orders at exactly t are counted; zero-size orders contribute diagonal
    points (z, z).  Points are aggregated exactly by coincident coordinates.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    n = _count_nonzero_orders(tr, t)
    counts: dict[tuple[float, float], float] = {}

    def bump(key: tuple[float, float], c: float) -> None:
        counts[key] = counts.get(key, 0.0) + c

    if n:
        full_i, extra_units = _full_cycles(n)
        for c in range(1, full_i + 1):
            bump((0.0, 1.0), unit_count(c))
            bump((0.0, large_level(c)), 1)
        if extra_units:
            bump((0.0, 1.0), extra_units)
        if tr.include_zero_orders:
            # the zero-size block of cycle c shares its large order's time
            for c in range(1, full_i + 1):
                zc = large_level(c)
                bump((zc, zc), unit_count(c))
    return {key: c / t for key, c in counts.items()}


def snapshot_at_label(tr: Trace, i: int) -> MeasureSnapshot:
    """Snapshot at cycle i's canonical instant, the time of its large order.

    At that instant every order of cycles 1..i has been placed, including
    the zero-size block that shares the large order's time.
    """
    if not 1 <= i <= tr.i_max:
        raise ValueError(f"cycle label {i} outside 1..{tr.i_max}")
    t = float(tr.large_times[i - 1])
    counts: dict[tuple[float, float], float] = {(0.0, 1.0): float((1 << i) - 1 + 1)}
    for c in range(2, i + 1):
        counts[(0.0, large_level(c))] = 1.0
    if tr.include_zero_orders:
        for c in range(1, i + 1):
            zc = large_level(c)
            counts[(zc, zc)] = counts.get((zc, zc), 0.0) + unit_count(c)
    occ_mass = None
    if tr.occ_time is not None and i in tr.occ_time:
        occ_mass = tr.occ_time[i] / t
    return MeasureSnapshot(
        label=f"i={i}",
        t=t,
        ord_points={k: c / t for k, c in counts.items()},
        occ_edges=tr.occ_edges if occ_mass is not None else None,
        occ_mass=occ_mass,
    )


def occupation_snapshot(tr: Trace, t: float) -> MeasureSnapshot:
    """Occupation histogram over [0, t]; t must be a stored snapshot instant.

    Path traces accumulate occupancy at each cycle's large-order time only;
    renewal traces carry no path data at all.
    """
    if tr.occ_time is None:
        raise UnsupportedModeError("renewal-mode traces carry no occupation data")
    for i in range(1, tr.i_max + 1):
        if tr.large_times[i - 1] == t:
            return snapshot_at_label(tr, i)
    raise ValueError(f"t={t} is not one of the stored snapshot instants")


def cost_ledger(
    tr: Trace,
    grid: np.ndarray,
    m: CostModel,
    with_holding: bool | None = None,
) -> CostLedger:
    """Running cost averages of a stochastic trace on a time grid.

    Ordering averages are exact at any resolvable t (order costs depend only
    on the policy structure).  Holding averages need path data and are
    available at the stored snapshot instants; elsewhere they are nan.
    """
    if with_holding is None:
        with_holding = tr.holding is not None
    if with_holding and tr.holding is None:
        raise UnsupportedModeError("holding averages need a path-mode trace")
    hold_prefix = None
    if tr.holding is not None:
        hold_prefix = np.concatenate(([0.0], np.cumsum(tr.holding)))
    rows = []
    for t in np.atleast_1d(np.asarray(grid, dtype=float)):
        t = float(t)
        if not 0 < t <= tr.horizon:
            raise ValueError(f"grid time {t} outside (0, horizon]")
        n = _count_nonzero_orders(tr, t)
        full_i, extra_units = _full_cycles(n) if n else (0, 0)
        cost = 0.0
        for c in range(1, full_i + 1):
            cost += unit_count(c) * order_cost(0.0, 1.0, m)
            cost += order_cost(0.0, large_level(c), m)
        cost += extra_units * order_cost(0.0, 1.0, m)
        if tr.include_zero_orders:
            for c in range(1, full_i + 1):
                cost += unit_count(c) * m.k1
        holding = math.nan
        if with_holding and hold_prefix is not None:
            # complete sub-cycles by t: all n-1 earlier ones when t is the
            # n-th order time, all n when t is a cycle end
            k = None
            hits = np.nonzero(tr.large_times == t)[0]
            if hits.size:
                k = nonzero_orders_through(int(hits[0]) + 1) - 1
            else:
                hits = np.nonzero(tr.cycle_ends == t)[0]
                if hits.size:
                    k = nonzero_orders_through(int(hits[0]) + 1)
            if k is not None:
                holding = float(hold_prefix[k]) / t
        rows.append(LedgerRow(t=t, holding_avg=holding, ordering_avg=cost / t))
    return CostLedger(tuple(rows))


@dataclass
class ScalarStats:
    """Streaming mean / variance accumulator with associative combination."""

    count: int = 0
    mean: float = 0.0
    m2: float = field(default=0.0, repr=False)

    def add(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def combine(self, other: "ScalarStats") -> "ScalarStats":
        if other.count == 0:
            return ScalarStats(self.count, self.mean, self.m2)
        if self.count == 0:
            return ScalarStats(other.count, other.mean, other.m2)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return ScalarStats(n, mean, m2)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)
