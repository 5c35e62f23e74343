import math

import numpy as np
import pytest
from scipy import stats

from invtight import measures, oracle, sde
from invtight.model import CycleAddress, large_level, linear_index, nonzero_orders_through, unit_count


def test_rng_stream_reproducible_and_distinct():
    a = sde.sample_first_passages(1.0, 8, sde.RngStream(99, 0))
    b = sde.sample_first_passages(1.0, 8, sde.RngStream(99, 0))
    c = sde.sample_first_passages(1.0, 8, sde.RngStream(99, 1))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_stream_is_stateful_within_a_stream():
    rng = sde.RngStream(5, 0)
    x = sde.sample_first_passage(1.0, rng)
    y = sde.sample_first_passage(1.0, rng)
    assert x != y


def test_first_passage_samples_positive_and_validated():
    draws = sde.sample_first_passages(2.0, 10_000, sde.RngStream(1, 0))
    assert (draws > 0).all()
    with pytest.raises(ValueError):
        sde.sample_first_passage(0.0, sde.RngStream(1, 0))
    with pytest.raises(ValueError):
        sde.sample_first_passages(-1.0, 5, sde.RngStream(1, 0))


def test_first_passage_moments_quick():
    for z, stream in ((1.0, 0), (4.0, 1)):
        draws = sde.sample_first_passages(z, 200_000, sde.RngStream(314, stream))
        mean_t, var_t = oracle.first_passage_moments(z)
        assert draws.mean() == pytest.approx(mean_t, abs=4.0 * math.sqrt(z / draws.size))
        assert draws.var(ddof=1) == pytest.approx(var_t, rel=0.03)


def test_sample_cycle_path_record():
    dt = 5e-3
    rec = sde.sample_cycle_path(1.0, dt, sde.RngStream(11, 0))
    assert rec.start_level == 1.0
    assert rec.duration >= dt
    assert rec.holding_cost >= 0.0
    with pytest.raises(ValueError):
        sde.sample_cycle_path(1.0, 0.5, sde.RngStream(11, 0))
    with pytest.raises(ValueError):
        sde.sample_cycle_path(-1.0, dt, sde.RngStream(11, 0))


def test_sim_config_guardrails():
    with pytest.raises(sde.GuardrailError):
        sde.SimConfig(mode="renewal", i_max=41)
    with pytest.raises(sde.GuardrailError):
        sde.SimConfig(mode="path", i_max=17, dt=1e-3)
    with pytest.raises(sde.GuardrailError):
        sde.SimConfig(mode="path", i_max=4, dt=0.5)
    with pytest.raises(sde.GuardrailError):
        sde.SimConfig(mode="path", i_max=4, dt=None)
    with pytest.raises(ValueError):
        sde.SimConfig(mode="exact", i_max=4)


def test_policy_cycle_one_order_sizes():
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=1), sde.RngStream(0, 0))
    sizes = [ev.post_level - ev.pre_level for ev in tr.events()]
    assert sizes == [1.0, 1.0, 0.0]


def test_policy_order_counts_per_cycle():
    i_max = 7
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=i_max), sde.RngStream(123, 4))
    per_cycle: dict[int, int] = {}
    for ev in tr.events():
        per_cycle[ev.address.i] = per_cycle.get(ev.address.i, 0) + 1
    assert per_cycle == {i: (1 << i) + 1 for i in range(1, i_max + 1)}
    assert tr.n_materialized == nonzero_orders_through(i_max)


def test_policy_zero_orders_share_large_order_time():
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=5), sde.RngStream(9, 0))
    by_cycle: dict[int, list] = {}
    for ev in tr.events():
        by_cycle.setdefault(ev.address.i, []).append(ev)
    for i, evs in by_cycle.items():
        zeros = [e for e in evs if e.is_zero_size]
        larges = [e for e in evs if not e.is_zero_size and e.post_level == large_level(i) and e.address.j == unit_count(i) + 1]
        assert len(zeros) == unit_count(i)
        assert len(larges) == 1
        assert all(z.time == larges[0].time for z in zeros)


def test_sigma_sequence_nondecreasing_and_started_at_zero():
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=8), sde.RngStream(21, 3))
    assert tr.order_times[0] == 0.0
    assert (np.diff(tr.order_times) >= 0).all()
    assert tr.horizon >= tr.order_times[-1]


def test_renewal_counts_examples():
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=6), sde.RngStream(2, 0))
    assert sde.renewal_counts(tr, 0.0) == (1, 1, 1)
    rng = np.random.default_rng(0)
    for t in rng.uniform(0.0, tr.horizon, size=100):
        n, i, j = sde.renewal_counts(tr, float(t))
        assert tr.order_times[n - 1] <= t
        assert n == tr.n_materialized or tr.order_times[n] > t
        assert 0 <= j <= unit_count(i)
        assert linear_index(CycleAddress(i, j)) == n
    with pytest.raises(ValueError):
        sde.renewal_counts(tr, tr.horizon + 1.0)


def test_renewal_counts_at_label_times():
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=9), sde.RngStream(17, 5))
    for i in range(1, 10):
        n, ci, cj = sde.renewal_counts(tr, float(tr.large_times[i - 1]))
        assert n == nonzero_orders_through(i)
        assert (ci, cj) == (i + 1, 0)


def test_per_replication_determinism():
    for mode, kw in (("renewal", {}), ("path", {"dt": 2e-3})):
        cfg = sde.SimConfig(mode=mode, i_max=5, **kw)
        a = sde.simulate_policy(cfg, sde.RngStream(33, 7))
        b = sde.simulate_policy(cfg, sde.RngStream(33, 7))
        assert a.horizon == b.horizon
        np.testing.assert_array_equal(a.order_times, b.order_times)
        if a.holding is not None:
            np.testing.assert_array_equal(a.holding, b.holding)


def test_zero_suppression_leaves_sigma_unchanged():
    base = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=6), sde.RngStream(4, 2))
    nozero = sde.simulate_policy(
        sde.SimConfig(mode="renewal", i_max=6, include_zero_orders=False), sde.RngStream(4, 2)
    )
    np.testing.assert_array_equal(base.order_times, nozero.order_times)
    assert not any(ev.is_zero_size for ev in nozero.events())


def test_aggregated_renewal_mode():
    i_max = sde.MATERIALIZE_MAX_I + 2
    tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=i_max), sde.RngStream(8, 0))
    assert tr.materialized_i == sde.MATERIALIZE_MAX_I
    assert not tr.fully_materialized
    assert tr.n_materialized == nonzero_orders_through(sde.MATERIALIZE_MAX_I)
    # boundary instants stay exactly resolvable
    n, i, j = sde.renewal_counts(tr, float(tr.large_times[i_max - 1]))
    assert n == nonzero_orders_through(i_max)
    assert (i, j) == (i_max + 1, 0)
    n_end, _, _ = sde.renewal_counts(tr, float(tr.cycle_ends[i_max - 2]))
    assert n_end == nonzero_orders_through(i_max - 1) + 1
    with pytest.raises(ValueError):
        mid = 0.5 * (tr.cycle_ends[i_max - 2] + tr.large_times[i_max - 1])
        sde.renewal_counts(tr, float(mid))


def test_sigma_over_n_near_one():
    # quick version of the strong-law check
    for stream in range(5):
        tr = sde.simulate_policy(sde.SimConfig(mode="renewal", i_max=14), sde.RngStream(60, stream))
        n = tr.n_materialized
        assert 0.9 <= float(tr.order_times[-1]) / n <= 1.1


def test_path_mode_beta_matches_renewal_distribution():
    # two-sample KS between exact and discretized unit sub-cycle durations
    n = 10_000
    exact = sde.sample_first_passages(1.0, n, sde.RngStream(71, 0))
    gen = sde.RngStream(71, 1).generator
    approx, _ = sde._run_paths(np.ones(n), 1e-4, gen)
    d_stat = stats.ks_2samp(exact, approx).statistic
    crit = 1.628 * math.sqrt(2.0 / n)  # 1% level for equal sample sizes
    assert d_stat < crit


def test_path_mode_moments_coarse():
    gen = sde.RngStream(5150, 0).generator
    beta, hold = sde._run_paths(np.ones(20_000), 5e-3, gen)
    assert beta.mean() == pytest.approx(1.0, rel=0.05)
    assert hold.mean() == pytest.approx(2.0, rel=0.05)
    assert (beta >= 5e-3).all()
    assert (hold >= 0.0).all()


def test_path_trace_holding_aligns_with_orders():
    cfg = sde.SimConfig(mode="path", i_max=4, dt=2e-3)
    tr = sde.simulate_policy(cfg, sde.RngStream(88, 0))
    assert tr.holding.size == tr.n_materialized
    assert (tr.holding >= 0.0).all()
    # the sum of sub-cycle durations reproduces the horizon
    assert float(tr.betas().sum()) == pytest.approx(tr.horizon, rel=1e-9)


def test_occupancy_accumulates_per_label():
    cfg = sde.SimConfig(mode="path", i_max=3, dt=2e-3)
    tr = sde.simulate_policy(cfg, sde.RngStream(13, 1))
    assert sorted(tr.occ_time) == [1, 2, 3]
    for i in range(1, 4):
        total = float(tr.occ_time[i].sum())
        assert total == pytest.approx(float(tr.large_times[i - 1]), rel=1e-9)
