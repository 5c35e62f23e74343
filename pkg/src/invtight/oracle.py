"""Closed-form values for every quantity the engines are checked against.

Everything here is a pure function of small integers and k1.  The engines
compute the same quantities by accumulation or Monte Carlo; any disagreement
is treated as an engine defect first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    MAX_CYCLE,
    SQRT2_PLUS_1,
    CostModel,
    CycleAddress,
    address_from_index,
    pow2_half,
)


def _check_cycle(i: int, name: str = "i") -> None:
    if not 1 <= i <= MAX_CYCLE:
        raise ValueError(f"{name} must be in 1..{MAX_CYCLE}, got {i}")


def det_cycle_length(i: int) -> float:
    """Length of deterministic cycle i: 2**(i-1) + 2**((i-1)/2)."""
    _check_cycle(i)
    return float(1 << (i - 1)) + pow2_half(i - 1)


def det_total_time(n: int) -> float:
    """End time of deterministic cycle n: 2**n + (2**(n/2)-1)/(sqrt(2)-1) - 1."""
    _check_cycle(n, "n")
    return float(1 << n) + (pow2_half(n) - 1.0) * SQRT2_PLUS_1 - 1.0


def det_cycle_costs(i: int, m: CostModel) -> tuple[float, float]:
    """(holding, ordering) cost of deterministic cycle i.

    holding = 2**i; ordering = (2*k1+1)*2**(i-1) + 2**((i-1)/2) + k1.
    """
    _check_cycle(i)
    holding = float(1 << i)
    ordering = (2.0 * m.k1 + 1.0) * float(1 << (i - 1)) + pow2_half(i - 1) + m.k1
    return holding, ordering


def det_total_cost(n: int, m: CostModel) -> float:
    """Total (holding + ordering) cost of deterministic cycles 1..n."""
    _check_cycle(n, "n")
    return (
        (2.0 * m.k1 + 3.0) * (float(1 << n) - 1.0)
        + (pow2_half(n) - 1.0) * SQRT2_PLUS_1
        + m.k1 * n
    )


def det_diagonal_mass(n: int) -> float:
    """Ordering-measure mass at the diagonal point of cycle n, at its end time.

    The 2**(n-1) zero-size orders of cycle n sit at (z, z), z = 2**((n-1)/2),
    giving mass 2**(n-1) / det_total_time(n).  Increases to 1/2 from below.
    """
    _check_cycle(n, "n")
    return float(1 << (n - 1)) / det_total_time(n)


def first_passage_moments(z: float) -> tuple[float, float]:
    """(mean, variance) of the first time level z drains to 0 under the
    unit-downward-drift, unit-volatility noise: both equal z."""
    if not z > 0:
        raise ValueError("start level must be positive")
    return z, z


def first_passage_holding_mean(z: float) -> float:
    """Expected holding cost of one sub-cycle started at level z: z**2 + z."""
    if not z > 0:
        raise ValueError("start level must be positive")
    return z * z + z


def sde_beta_moments(a: CycleAddress) -> tuple[float, float]:
    """(mean, variance) of the duration of the sub-cycle opened by order a.

    Unit orders give (1, 1).  The j=0 alias (i, 0) is the large order of
    cycle i-1, whose sub-cycle starts at 2**((i-2)/2).
    """
    if a.kind == "unit":
        return 1.0, 1.0
    if a.j == 0:
        z = pow2_half(a.i - 2)
        return z, z
    raise ValueError(f"({a.i},{a.j}) does not open a sub-cycle in canonical form")


def sde_cycle_holding_mean(a: CycleAddress) -> float:
    """Expected holding cost of the sub-cycle opened by order a (z**2 + z)."""
    mean_z, _ = sde_beta_moments(a)
    return first_passage_holding_mean(mean_z)


def _decompose(n: int) -> tuple[int, int]:
    a = address_from_index(n)
    return a.i, a.j


def sde_cesaro_interorder(n: int) -> float:
    """Running mean of the expected sub-cycle durations, (1/n) sum E[beta_k].

    Equals (2**(i-1) - 1 + (2**((i-1)/2)-1)/(sqrt(2)-1) + j) / n for
    n = 2**(i-1)+i+j-2.  Converges to 1.
    """
    if n < 2:
        raise ValueError("defined for n >= 2")
    i, j = _decompose(n)
    num = float(1 << (i - 1)) - 1.0 + (pow2_half(i - 1) - 1.0) * SQRT2_PLUS_1 + j
    return num / n


def sde_cesaro_holding(n: int) -> float:
    """Running mean of the expected sub-cycle holding costs, (1/n) sum E[L_k].

    Equals (3*(2**(i-1)-1) + (2**((i-1)/2)-1)/(sqrt(2)-1) + 2j) / n.  This
    exact mean oscillates: it peaks near 3 at each cycle start (j = 0) and
    dips toward 5/2 at the end of each Phase 1 (j = 2**(i-1)).  See
    sde_cesaro_holding_bound for the convergent envelope.
    """
    if n < 2:
        raise ValueError("defined for n >= 2")
    i, j = _decompose(n)
    num = 3.0 * (float(1 << (i - 1)) - 1.0) + (pow2_half(i - 1) - 1.0) * SQRT2_PLUS_1 + 2.0 * j
    return num / n


def sde_cesaro_holding_bound(n: int) -> float:
    """Upper bound on sde_cesaro_holding that converges to 3.

    Obtained by replacing the per-unit-order contribution 2 with 3:
    (3*(2**(i-1)+j) + (2**((i-1)/2)-1)/(sqrt(2)-1) - 3) / n.
    """
    if n < 2:
        raise ValueError("defined for n >= 2")
    i, j = _decompose(n)
    num = 3.0 * (float(1 << (i - 1)) + j) + (pow2_half(i - 1) - 1.0) * SQRT2_PLUS_1 - 3.0
    return num / n


def bounds(m: CostModel) -> dict[str, float]:
    """The four asymptotic constants the experiments are gated against."""
    return {
        "det_total_avg_cost": 6.0 * m.k1 + 9.0,
        "sde_holding_avg": 3.0,
        "sde_ordering_avg": 3.0 * m.k1 + 2.0,
        "ordering_escape_mass": 0.5,
    }


@dataclass(frozen=True)
class OracleReport:
    """Flat name -> value map of closed-form quantities."""

    values: dict[str, float]


def report(n_range: range, m: CostModel) -> OracleReport:
    """Evaluate every closed form over a cycle range, keyed by quantity name."""
    vals: dict[str, float] = {}
    for key, val in bounds(m).items():
        vals[f"bound.{key}"] = val
    for i in n_range:
        vals[f"det_cycle_length[i={i}]"] = det_cycle_length(i)
        vals[f"det_total_time[n={i}]"] = det_total_time(i)
        hold, order = det_cycle_costs(i, m)
        vals[f"det_cycle_holding[i={i}]"] = hold
        vals[f"det_cycle_ordering[i={i}]"] = order
        vals[f"det_total_cost[n={i}]"] = det_total_cost(i, m)
        vals[f"det_diagonal_mass[n={i}]"] = det_diagonal_mass(i)
        z = pow2_half(i - 1)
        vals[f"sde_large_beta_mean[i={i}]"] = z
        vals[f"sde_large_holding_mean[i={i}]"] = first_passage_holding_mean(z)
        n_large = (1 << i) + i - 1
        if n_large >= 2:
            vals[f"sde_cesaro_interorder[n={n_large}]"] = sde_cesaro_interorder(n_large)
            vals[f"sde_cesaro_holding[n={n_large}]"] = sde_cesaro_holding(n_large)
            vals[f"sde_cesaro_holding_bound[n={n_large}]"] = sde_cesaro_holding_bound(n_large)
    return OracleReport(vals)
