"""Replication campaigns: run many independent streams, merge their
measure snapshots and scalar summaries, and evaluate tightness probes.

One replication is one unit of work with its own RngStream.  Workers only
compute per-replication payloads; merging always folds the payloads in
stream order, so the parallelism degree never changes any output bit.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import det, measures
from .model import CostModel, large_level, nonzero_orders_through
from .sde import GuardrailError, RngStream, SimConfig, simulate_policy

DEFAULT_M_GRID = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


@dataclass(frozen=True)
class CampaignConfig:
    """Fully describes one experiment; serialized into the run manifest."""

    model: str = "sde"  # "det" or "sde"
    mode: str = "renewal"
    i_max: int = 8
    dt: float | None = None
    replications: int = 1
    seed: int = 0
    k1: float = 1.0
    m_grid: tuple[float, ...] = DEFAULT_M_GRID
    parallelism: int = 1
    include_zero_orders: bool = True

    def __post_init__(self) -> None:
        if self.model not in ("det", "sde"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not self.k1 > 0:
            raise ValueError("k1 must be positive")
        if not self.m_grid or any(m <= 0 for m in self.m_grid):
            raise ValueError("M grid must be positive")
        if self.model == "det":
            if not 1 <= self.i_max <= 60:
                raise GuardrailError("det model supports i_max in 1..60")
        else:
            self.sim_config()  # runs the engine guardrails

    def sim_config(self) -> SimConfig:
        return SimConfig(
            mode=self.mode,
            i_max=self.i_max,
            dt=self.dt,
            replications=self.replications,
            include_zero_orders=self.include_zero_orders,
        )

    def cost_model(self) -> CostModel:
        return CostModel(self.k1)


@dataclass
class RepOutcome:
    """Per-replication summaries at every cycle label."""

    stream: int
    snapshots: dict[int, measures.MeasureSnapshot]
    ledger: dict[int, tuple[float, float, float]]
    renewal: dict[int, tuple[float, float]]


@dataclass
class CampaignResult:
    config: CampaignConfig
    labels: list[int]
    snapshots: dict[int, measures.MeasureSnapshot] = field(default_factory=dict)
    ledger_stats: dict[int, dict[str, measures.ScalarStats]] = field(default_factory=dict)
    renewal_stats: dict[int, dict[str, measures.ScalarStats]] = field(default_factory=dict)
    tightness_stats: dict[tuple[int, float], dict[str, measures.ScalarStats]] = field(
        default_factory=dict
    )

    def final_label(self) -> int:
        return self.labels[-1]


def _run_rep(cfg: CampaignConfig, stream: int) -> RepOutcome:
    tr = simulate_policy(cfg.sim_config(), RngStream(cfg.seed, stream))
    m = cfg.cost_model()
    led = measures.cost_ledger(tr, tr.large_times, m)
    snaps: dict[int, measures.MeasureSnapshot] = {}
    ledger: dict[int, tuple[float, float, float]] = {}
    renewal: dict[int, tuple[float, float]] = {}
    for i in range(1, cfg.i_max + 1):
        snaps[i] = measures.snapshot_at_label(tr, i)
        row = led.rows[i - 1]
        ledger[i] = (row.holding_avg, row.ordering_avg, row.total_avg)
        n_label = nonzero_orders_through(i)
        t = float(tr.large_times[i - 1])
        renewal[i] = (t / n_label, n_label / t)
    return RepOutcome(stream=stream, snapshots=snaps, ledger=ledger, renewal=renewal)


def _run_rep_star(args: tuple[CampaignConfig, int]) -> RepOutcome:
    return _run_rep(*args)


def _det_result(cfg: CampaignConfig) -> CampaignResult:
    s = det.build_schedule(cfg.i_max)
    m = cfg.cost_model()
    edges = det.default_occ_edges(large_level(cfg.i_max))
    result = CampaignResult(config=cfg, labels=list(range(1, cfg.i_max + 1)))
    for n in range(1, cfg.i_max + 1):
        snap = det.boundary_snapshot(n, s, edges=edges)
        result.snapshots[n] = snap
        hold, orde, total = det.running_cost_average(float(s.start[n]), s, m)
        stats = {name: measures.ScalarStats() for name in ("holding", "ordering", "total")}
        stats["holding"].add(hold)
        stats["ordering"].add(orde)
        stats["total"].add(total)
        result.ledger_stats[n] = stats
        for m_level in cfg.m_grid:
            occ, orde_esc = measures.escape_mass(snap, m_level)
            cell = {"occ": measures.ScalarStats(), "ord": measures.ScalarStats()}
            cell["occ"].add(occ)
            cell["ord"].add(orde_esc)
            result.tightness_stats[(n, m_level)] = cell
    return result


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    """Run the whole experiment and fold replications in stream order."""
    if cfg.model == "det":
        return _det_result(cfg)
    tasks = [(cfg, r) for r in range(cfg.replications)]
    if cfg.parallelism > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.parallelism, cfg.replications)) as pool:
            outcomes = list(pool.map(_run_rep_star, tasks))
    else:
        outcomes = [_run_rep_star(t) for t in tasks]

    result = CampaignResult(config=cfg, labels=list(range(1, cfg.i_max + 1)))
    metrics = ("holding", "ordering", "total")
    for i in result.labels:
        result.ledger_stats[i] = {name: measures.ScalarStats() for name in metrics}
        result.renewal_stats[i] = {
            "sigma_over_n": measures.ScalarStats(),
            "n_over_t": measures.ScalarStats(),
        }
        for m_level in cfg.m_grid:
            result.tightness_stats[(i, m_level)] = {
                "occ": measures.ScalarStats(),
                "ord": measures.ScalarStats(),
            }
    for out in outcomes:  # stream order: merge is order-independent anyway
        for i in result.labels:
            snap = out.snapshots[i]
            if i in result.snapshots:
                result.snapshots[i] = measures.merge(result.snapshots[i], snap)
            else:
                result.snapshots[i] = snap
            for name, val in zip(metrics, out.ledger[i]):
                result.ledger_stats[i][name].add(val)
            sig_n, n_t = out.renewal[i]
            result.renewal_stats[i]["sigma_over_n"].add(sig_n)
            result.renewal_stats[i]["n_over_t"].add(n_t)
            for m_level in cfg.m_grid:
                occ, orde = measures.escape_mass(snap, m_level)
                result.tightness_stats[(i, m_level)]["occ"].add(occ)
                result.tightness_stats[(i, m_level)]["ord"].add(orde)
    return result


def default_parallelism() -> int:
    return os.cpu_count() or 1
