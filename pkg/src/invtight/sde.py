"""Monte Carlo engine for the unit-downward-drift, unit-volatility model.

Between orders the inventory follows X(s) = z - s + W(s) until it first hits
0, so sub-cycle durations are first-passage times with mean z and variance z
(inverse Gaussian with mean z and shape z**2).  Two sampling modes:

* renewal: draw each sub-cycle duration exactly (one inverse-Gaussian
  variate), O(1) per sub-cycle, no path information.  Phase-1 blocks of
  cycles deeper than the materialization cap are drawn as a single exact
  convolution draw (a sum of n unit first passages is inverse Gaussian with
  mean n and shape n**2), so very deep runs keep only per-cycle boundaries.
* path: Euler steps x -> x - dt + sqrt(dt) N with a Brownian-bridge
  absorption test between steps, which removes the O(sqrt(dt)) bias of naive
  crossing detection.  Holding cost is the trapezoid of 2|x| along the kept
  steps, cut linearly at an observed crossing.

Every replication owns one RngStream; identical (seed, stream) reproduce a
bit-identical trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import CycleRecord, Trace, large_level, unit_count

#: Guardrails: renewal cycles stay within exact float time arithmetic,
#: path cycles within a desk-scale step budget.
RENEWAL_MAX_I = 40
PATH_MAX_I = 16
#: Cycles with more than 2**22 unit sub-cycles are kept in aggregate.
MATERIALIZE_MAX_I = 22

_CHUNK_ELEMS = 1 << 21  # target elements per stepping pass (~16 MB a scratch array)


class GuardrailError(ValueError):
    """A configuration breaches the engine's resource guardrails."""


@dataclass(frozen=True)
class RngStream:
    """One reproducible random stream: (seed, stream id).

    Streams with the same seed and different ids are statistically
    independent by construction (PCG64 seeded through a SeedSequence spawn
    key), which is what makes replications safe to run concurrently.
    """

    seed: int
    stream: int = 0

    @cached_property
    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings shared by both sampling modes."""

    mode: str = "renewal"
    i_max: int = 8
    dt: float | None = None
    replications: int = 1
    include_zero_orders: bool = True
    track_occupancy: bool | None = None  # default: only in path mode
    occ_bin_width: float = 1.0 / 16.0

    def __post_init__(self) -> None:
        if self.mode not in ("renewal", "path"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.mode == "renewal":
            if not 1 <= self.i_max <= RENEWAL_MAX_I:
                raise GuardrailError(f"renewal mode supports i_max in 1..{RENEWAL_MAX_I}")
        else:
            if not 1 <= self.i_max <= PATH_MAX_I:
                raise GuardrailError(f"path mode supports i_max in 1..{PATH_MAX_I}")
            if self.dt is None or not 0.0 < self.dt <= 0.01:
                raise GuardrailError("path mode needs dt in (0, 0.01]")

    @property
    def occupancy(self) -> bool:
        if self.track_occupancy is None:
            return self.mode == "path"
        return self.track_occupancy and self.mode == "path"


def default_occ_edges(i_max: int, width: float = 1.0 / 16.0) -> np.ndarray:
    """Histogram edges covering the policy's level range plus wide margins.

    The margins keep the tightness window grid (M up to 64) strictly inside
    the edge range; the two outermost bins catch any remaining excursions.
    """
    lo = -16.0
    hi = large_level(i_max) + 128.0
    n = math.ceil((hi - lo) / width)
    return lo + width * np.arange(n + 1)


def sample_first_passage(z: float, rng: RngStream) -> float:
    """Draw one first-passage time from level z to 0 (mean z, variance z)."""
    if not z > 0:
        raise ValueError("start level must be positive")
    return float(rng.generator.wald(z, z * z))


def sample_first_passages(z: float, size: int, rng: RngStream) -> np.ndarray:
    """Vectorized draws of the first-passage time from level z."""
    if not z > 0:
        raise ValueError("start level must be positive")
    return rng.generator.wald(z, z * z, size=size)


def _run_paths(
    levels: np.ndarray,
    dt: float,
    gen: np.random.Generator,
    occ_acc: np.ndarray | None = None,
    occ_lo: float = 0.0,
    occ_inv_w: float = 16.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Step independent paths from the given start levels until absorption.

    Per step: x -> x - dt + sqrt(dt) N.  A step landing at or below 0 is cut
    at the linear crossing time; otherwise absorption fires with the bridge
    probability exp(-2 a b / dt) for endpoints a, b > 0, in which case the
    whole step is kept.  Holding cost uses the per-step trapezoid of 2 x
    (endpoints are positive until the absorbing step).  When occ_acc is
    given, each kept step adds its duration to the bin of its midpoint.

    Returns (durations, holding costs) aligned with ``levels``.
    """
    n = levels.size
    beta = np.zeros(n)
    hold = np.zeros(n)
    idx = np.arange(n)
    x = np.asarray(levels, dtype=float).copy()
    t_acc = np.zeros(n)
    h_acc = np.zeros(n)
    sq = math.sqrt(dt)
    nb = occ_acc.size if occ_acc is not None else 0
    col_idx = None
    while idx.size:
        m = idx.size
        cols = int(max(64, min(_CHUNK_ELEMS // m, 1 << 16)))
        xs = gen.standard_normal((m, cols))
        xs *= sq
        xs -= dt
        np.cumsum(xs, axis=1, out=xs)
        xs += x[:, None]
        u = gen.random((m, cols))
        prev = np.empty_like(xs)
        prev[:, 0] = x
        prev[:, 1:] = xs[:, :-1]
        landed = xs <= 0.0
        # clamp the exponent so entries past an earlier crossing cannot
        # overflow; they are never selected as the first absorption
        pb = np.exp(np.minimum(-2.0 * prev * xs / dt, 0.0))
        done = landed | ((prev > 0.0) & ~landed & (u < pb))
        any_done = done.any(axis=1)
        first = np.argmax(done, axis=1)
        trap = np.cumsum((prev + xs) * dt, axis=1)

        rows = np.nonzero(any_done)[0]
        if rows.size:
            f = first[rows]
            xp = prev[rows, f]
            xn = xs[rows, f]
            landed_r = xn <= 0.0
            theta = np.where(landed_r, xp / (xp - xn), 1.0)
            db = np.where(landed_r, (f + theta) * dt, (f + 1.0) * dt)
            trap_before = np.where(f > 0, trap[rows, np.maximum(f - 1, 0)], 0.0)
            dh = np.where(landed_r, trap_before + theta * dt * xp, trap[rows, f])
            gi = idx[rows]
            beta[gi] = t_acc[rows] + db
            hold[gi] = h_acc[rows] + dh

        if occ_acc is not None:
            if col_idx is None or col_idx.size < cols:
                col_idx = np.arange(1 << 16)
            lim = np.where(any_done, first, cols)
            mask = col_idx[:cols][None, :] < lim[:, None]
            mids = 0.5 * (prev + xs)[mask]
            b = np.clip(((mids - occ_lo) * occ_inv_w).astype(np.int64), 0, nb - 1)
            occ_acc += dt * np.bincount(b, minlength=nb)
            if rows.size:
                mid2 = np.where(landed_r, 0.5 * xp, 0.5 * (xp + xn))
                w2 = np.where(landed_r, theta * dt, dt)
                b2 = np.clip(((mid2 - occ_lo) * occ_inv_w).astype(np.int64), 0, nb - 1)
                occ_acc += np.bincount(b2, weights=w2, minlength=nb)

        keep = np.nonzero(~any_done)[0]
        idx = idx[keep]
        if idx.size:
            x = xs[keep, -1]
            t_acc = t_acc[keep] + cols * dt
            h_acc = h_acc[keep] + trap[keep, -1]
    return beta, hold


def sample_cycle_path(z: float, dt: float, rng: RngStream) -> CycleRecord:
    """Simulate one sub-cycle from level z by discretized stepping."""
    if not z > 0:
        raise ValueError("start level must be positive")
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    beta, hold = _run_paths(np.array([z]), dt, rng.generator)
    return CycleRecord(start_level=z, duration=float(beta[0]), holding_cost=float(hold[0]))


def simulate_policy(cfg: SimConfig, rng: RngStream) -> Trace:
    """Realize cycles 1..i_max of the policy under one random stream.

    Per cycle: the Phase-1 unit sub-cycles (drawn as one batch), then the
    large order with its zero-size block, then the large sub-cycle.  The
    zero-size orders consume no randomness and never advance time, so traces
    with and without them share the same non-zero order times.
    """
    gen = rng.generator
    mat_i = min(cfg.i_max, MATERIALIZE_MAX_I)
    if cfg.mode == "path":
        mat_i = cfg.i_max
    occ_acc = None
    occ_edges = None
    occ_time: dict[int, np.ndarray] | None = None
    occ_lo = 0.0
    occ_inv_w = 1.0 / cfg.occ_bin_width
    if cfg.occupancy:
        occ_edges = default_occ_edges(cfg.i_max, cfg.occ_bin_width)
        occ_acc = np.zeros(occ_edges.size - 1)
        occ_time = {}
        occ_lo = float(occ_edges[0])
    times_parts: list[np.ndarray] = []
    hold_parts: list[np.ndarray] = []
    large_times = np.empty(cfg.i_max)
    cycle_ends = np.empty(cfg.i_max)
    t = 0.0
    for i in range(1, cfg.i_max + 1):
        nu = unit_count(i)
        z = large_level(i)
        if cfg.mode == "renewal":
            if i <= mat_i:
                durs = gen.wald(1.0, 1.0, size=nu)
                offsets = np.concatenate(([0.0], np.cumsum(durs)))
                times_parts.append(t + offsets)
                t_large = t + float(offsets[-1])
            else:
                t_large = t + float(gen.wald(float(nu), float(nu) ** 2))
            big = float(gen.wald(z, z * z))
        else:
            durs, holds = _run_paths(np.ones(nu), cfg.dt, gen, occ_acc, occ_lo, occ_inv_w)
            offsets = np.concatenate(([0.0], np.cumsum(durs)))
            times_parts.append(t + offsets)
            t_large = t + float(offsets[-1])
            if cfg.occupancy:
                occ_time[i] = occ_acc.copy()
            big_arr, big_hold = _run_paths(np.array([z]), cfg.dt, gen, occ_acc, occ_lo, occ_inv_w)
            big = float(big_arr[0])
            hold_parts.append(np.concatenate((holds, big_hold)))
        large_times[i - 1] = t_large
        cycle_ends[i - 1] = t_large + big
        t = t_large + big
    order_times = (
        np.concatenate(times_parts) if times_parts else np.empty(0)
    )
    holding = np.concatenate(hold_parts) if hold_parts else None
    return Trace(
        i_max=cfg.i_max,
        mode=cfg.mode,
        horizon=t,
        order_times=order_times,
        materialized_i=mat_i,
        large_times=large_times,
        cycle_ends=cycle_ends,
        holding=holding,
        include_zero_orders=cfg.include_zero_orders,
        occ_edges=occ_edges,
        occ_time=occ_time,
    )


def renewal_counts(tr: Trace, t: float) -> tuple[int, int, int]:
    """(N, I, J): non-zero orders by time t and the address of the last one.

    N = max{n: sigma_n <= t}; the first order sits at time 0, so N(0) = 1.
    For aggregated cycles only boundary instants are resolvable.
    """
    from .measures import _count_nonzero_orders
    from .model import address_from_index

    if t < 0:
        raise ValueError("t must be nonnegative")
    n = _count_nonzero_orders(tr, t)
    a = address_from_index(n)
    return n, a.i, a.j
