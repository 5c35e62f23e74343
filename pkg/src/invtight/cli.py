"""Command-line front end: oracle evaluation, simulation campaigns and
tightness studies, with CSV/JSON outputs suitable for plotting.

Numbers are written in shortest round-trip decimal form and rows in a fixed
order, so identical configurations reproduce byte-identical data files; the
manifest additionally records wall time, which is the one volatile field.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import __version__, campaign, measures, oracle
from .campaign import DEFAULT_M_GRID, CampaignConfig, CampaignResult
from .model import CostModel
from .sde import GuardrailError, RngStream, simulate_policy

SCHEMAS = {
    "occupation": "t_label,bin_lo,bin_hi,mass",
    "ordering": "t_label,y,z,weight",
    "tightness": "t_label,M,occ_escape,ord_escape,stderr",
    "ledger": "t_label,holding,ordering,total,stderr",
    "renewal": "t_label,n,t_mean,sigma_over_n,sigma_over_n_stderr,n_over_t,n_over_t_stderr",
    "trace": "event_time,y,z,i,j,is_zero",
}
SCHEMA_VERSION = 1


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, name: str, rows: list[list]) -> None:
    lines = [f"# schema: invtight.{name} v{SCHEMA_VERSION}", SCHEMAS[name]]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _occupation_rows(result: CampaignResult) -> list[list]:
    rows = []
    for i in result.labels:
        snap = result.snapshots[i]
        if snap.occ_mass is None:
            continue
        lo = snap.occ_edges[:-1]
        hi = snap.occ_edges[1:]
        for k in range(lo.size):
            if snap.occ_mass[k] > 0.0:
                rows.append([snap.label, float(lo[k]), float(hi[k]), float(snap.occ_mass[k])])
    return rows


def _ordering_rows(result: CampaignResult) -> list[list]:
    rows = []
    for i in result.labels:
        snap = result.snapshots[i]
        for (y, z) in sorted(snap.ord_points):
            rows.append([snap.label, y, z, snap.ord_points[(y, z)]])
    return rows


def _tightness_rows(result: CampaignResult) -> list[list]:
    rows = []
    for i in result.labels:
        label = result.snapshots[i].label
        for m_level in result.config.m_grid:
            cell = result.tightness_stats[(i, m_level)]
            rows.append(
                [label, m_level, cell["occ"].mean, cell["ord"].mean, cell["ord"].stderr]
            )
    return rows


def _ledger_rows(result: CampaignResult) -> list[list]:
    rows = []
    for i in result.labels:
        stats = result.ledger_stats[i]
        rows.append(
            [
                result.snapshots[i].label,
                stats["holding"].mean,
                stats["ordering"].mean,
                stats["total"].mean,
                stats["total"].stderr,
            ]
        )
    return rows


def _renewal_rows(result: CampaignResult) -> list[list]:
    rows = []
    for i in result.labels:
        stats = result.renewal_stats[i]
        from .model import nonzero_orders_through

        rows.append(
            [
                result.snapshots[i].label,
                nonzero_orders_through(i),
                result.snapshots[i].t,
                stats["sigma_over_n"].mean,
                stats["sigma_over_n"].stderr,
                stats["n_over_t"].mean,
                stats["n_over_t"].stderr,
            ]
        )
    return rows


def _config_dict(cfg: CampaignConfig) -> dict:
    return {
        "model": cfg.model,
        "mode": cfg.mode,
        "i_max": cfg.i_max,
        "dt": cfg.dt,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "k1": cfg.k1,
        "m_grid": list(cfg.m_grid),
        "parallelism": cfg.parallelism,
        "include_zero_orders": cfg.include_zero_orders,
    }


def _write_manifest(out: Path, command: str, cfg_dict: dict, outputs: list[str], wall: float) -> None:
    _write_json(
        out / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config": cfg_dict,
            "version": f"invtight-{__version__}",
            "wall_time_s": wall,
            "outputs": sorted(outputs),
            "csv_schemas": SCHEMAS,
        },
    )


def _stats_obj(s: measures.ScalarStats) -> dict:
    mean = None if math.isnan(s.mean) else s.mean
    return {"mean": mean, "stderr": s.stderr, "count": s.count}


def _dump_trace(cfg: CampaignConfig, out: Path) -> str:
    if cfg.i_max > 16:
        raise GuardrailError("trace dumps are limited to i_max <= 16")
    tr = simulate_policy(cfg.sim_config(), RngStream(cfg.seed, 0))
    rows = []
    for ev in tr.events():
        rows.append(
            [
                float(ev.time),
                float(ev.pre_level),
                float(ev.post_level),
                ev.address.i,
                ev.address.j,
                int(ev.is_zero_size),
            ]
        )
    _write_csv(out / "trace.csv", "trace", rows)
    return "trace.csv"


def cmd_oracle(args: argparse.Namespace) -> int:
    lo, hi = _parse_range(args.n)
    rep = oracle.report(range(lo, hi + 1), CostModel(args.k1))
    text = json.dumps(rep.values, sort_keys=True, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n")
    return 0


def _campaign_config(args: argparse.Namespace) -> CampaignConfig:
    m_grid = tuple(float(v) for v in str(args.m_grid).split(",") if v)
    return CampaignConfig(
        model=args.model,
        mode=args.mode,
        i_max=args.i_max,
        dt=args.dt if args.model == "sde" and args.mode == "path" else None,
        replications=args.reps,
        seed=args.seed,
        k1=args.k1,
        m_grid=m_grid,
        parallelism=args.parallelism,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _campaign_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = campaign.run_campaign(cfg)
    outputs = []
    occ_rows = _occupation_rows(result)
    if occ_rows:
        _write_csv(out / "occupation.csv", "occupation", occ_rows)
        outputs.append("occupation.csv")
    _write_csv(out / "ordering.csv", "ordering", _ordering_rows(result))
    _write_csv(out / "ledger.csv", "ledger", _ledger_rows(result))
    outputs += ["ordering.csv", "ledger.csv"]
    if cfg.model == "sde":
        _write_csv(out / "renewal.csv", "renewal", _renewal_rows(result))
        outputs.append("renewal.csv")
    if args.dump_trace:
        if cfg.model != "sde":
            raise ValueError("--dump-trace applies to the sde model")
        outputs.append(_dump_trace(cfg, out))
    final = result.final_label()
    report = {
        "final_label": result.snapshots[final].label,
        "final_t_mean": result.snapshots[final].t,
        "ledger": {k: _stats_obj(v) for k, v in result.ledger_stats[final].items()},
        "bounds": oracle.bounds(cfg.cost_model()),
    }
    if cfg.model == "sde":
        report["renewal"] = {k: _stats_obj(v) for k, v in result.renewal_stats[final].items()}
    _write_json(out / "report.json", report)
    outputs.append("report.json")
    _write_manifest(out, "simulate", _config_dict(cfg), outputs, time.perf_counter() - t0)
    return 0


def cmd_tightness(args: argparse.Namespace) -> int:
    cfg = _campaign_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = campaign.run_campaign(cfg)
    outputs = ["tightness.csv", "ordering.csv", "report.json"]
    _write_csv(out / "tightness.csv", "tightness", _tightness_rows(result))
    _write_csv(out / "ordering.csv", "ordering", _ordering_rows(result))
    occ_rows = _occupation_rows(result)
    if occ_rows:
        _write_csv(out / "occupation.csv", "occupation", occ_rows)
        outputs.append("occupation.csv")
    m_max = max(cfg.m_grid)
    occ_vals = [result.tightness_stats[(i, m_max)]["occ"].mean for i in result.labels]
    ord_vals = [result.tightness_stats[(i, m_max)]["ord"].mean for i in result.labels]
    occ_known = [v for v in occ_vals if not math.isnan(v)]
    # ordering mass only reaches past a fixed window once the large orders
    # outgrow it; the floor is taken from the first escaping label onward
    escaping = [k for k, v in enumerate(ord_vals) if v > 0.0]
    ord_floor = min(ord_vals[escaping[0] :]) if escaping else 0.0
    verdict = {
        "m_grid": list(cfg.m_grid),
        "largest_M": m_max,
        "occupation": {
            "escape_at_final_label": occ_known[-1] if occ_known else None,
            "threshold": 0.02,
            "tight_signature": bool(occ_known) and occ_known[-1] <= 0.02,
        },
        "ordering": {
            "escape_floor_estimate": ord_floor,
            "first_escaping_label": result.snapshots[result.labels[escaping[0]]].label
            if escaping
            else None,
            "threshold": 0.4,
            "non_tight_signature": ord_floor >= 0.4,
        },
    }
    _write_json(out / "report.json", verdict)
    _write_manifest(out, "tightness", _config_dict(cfg), outputs, time.perf_counter() - t0)
    return 0


def _parse_range(text: str) -> tuple[int, int]:
    parts = str(text).split("..")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad range {text!r}; expected N or LO..HI") from None
    if lo < 1 or hi < lo:
        raise ValueError(f"bad range {text!r}; needs 1 <= LO <= HI")
    return lo, hi


_DEFAULTS = {
    "mode": "renewal",
    "i_max": 8,
    "dt": 1e-3,
    "reps": 1,
    "seed": 0,
    "k1": 1.0,
    "m_grid": ",".join(str(m) for m in DEFAULT_M_GRID),
    "parallelism": None,  # filled with the processor count
}

_CONFIG_TYPES = {
    "model": str,
    "mode": str,
    "i_max": int,
    "dt": float,
    "reps": int,
    "seed": int,
    "k1": float,
    "m_grid": str,
    "parallelism": int,
    "out": str,
}


def _load_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_TYPES[key](val.strip())
    return values


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("det", "sde"), default=None)
    p.add_argument("--mode", choices=("renewal", "path"), default=None)
    p.add_argument("--i-max", dest="i_max", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--m-grid", dest="m_grid", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--config", default=None, help="flat key=value file; flags win")
    p.add_argument("--dump-trace", dest="dump_trace", action="store_true")


def _resolve(args: argparse.Namespace) -> None:
    """Apply defaults < config file < explicit flags."""
    file_vals = _load_config_file(args.config) if args.config else {}
    for key, default in {**_DEFAULTS, "model": None, "out": None}.items():
        if getattr(args, key, None) is None:
            setattr(args, key, file_vals.get(key, default))
    if args.parallelism is None:
        args.parallelism = campaign.default_parallelism()
    if args.model is None:
        raise ValueError("--model is required (det or sde)")
    if args.out is None:
        raise ValueError("--out is required")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invtight",
        description="Cyclic impulse-ordering inventory experiments: exact "
        "deterministic engine, Monte Carlo engine and measure diagnostics.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_or = sub.add_parser("oracle", help="emit closed-form quantities as JSON")
    p_or.add_argument("--n", default="1..10", help="cycle range, e.g. 5 or 1..10")
    p_or.add_argument("--k1", type=float, default=1.0)
    p_or.add_argument("--out", default=None)
    p_or.set_defaults(func=cmd_oracle)

    p_sim = sub.add_parser("simulate", help="run an engine and write CSV outputs")
    _add_run_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate, needs_resolve=True)

    p_tight = sub.add_parser("tightness", help="escape-mass study over an M grid")
    _add_run_flags(p_tight)
    p_tight.set_defaults(func=cmd_tightness, needs_resolve=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "needs_resolve", False):
            _resolve(args)
        return args.func(args)
    except (ValueError, GuardrailError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
