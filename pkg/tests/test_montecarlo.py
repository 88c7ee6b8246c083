import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from typsep.chsh import ChshSetting
from typsep.fock import SectorSpec, enumerate_basis
from typsep.hilbert import make_space
from typsep.montecarlo import (
    ExperimentPlan,
    GroupedTables,
    Histogram,
    Path,
    SampleStats,
    chunk_size,
    diagonal_tables,
    ks_distance,
    ks_two_sample,
    map_chunks,
    resolve_mode,
    resolve_path,
    run_chsh_distribution,
    run_correlation_sweep,
    run_distribution,
    run_variance_scan,
    sample_chsh,
    sample_correlations,
    worker_count,
)
from typsep.observables import microcanonical_average, mode_parity_observable


def bose(m, n=5):
    return SectorSpec("bose", n, m)


# ---------------------------------------------------------------- SampleStats


@given(
    values=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=300),
    k=st.sampled_from([1, 2, 4, 8]),
)
@settings(max_examples=120, deadline=None)
def test_sharded_stats_match_single_pass(values, k):
    v = np.array(values)
    whole = SampleStats().update(v)
    merged = SampleStats()
    for shard in np.array_split(v, k):
        merged = merged.merge(SampleStats().update(shard))
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, rel=1e-10, abs=1e-10)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-10, abs=1e-6)
    assert (merged.min, merged.max) == (whole.min, whole.max)


def test_stats_against_numpy():
    v = np.random.default_rng(0).normal(3.0, 2.0, size=1001)
    s = SampleStats().update(v[:500]).update(v[500:])
    w = SampleStats()
    for x in v:
        w.push(float(x))
    for got in (s, w):
        assert got.mean == pytest.approx(v.mean(), rel=1e-12)
        assert got.variance == pytest.approx(v.var(ddof=1), rel=1e-10)
        assert got.stderr == pytest.approx(v.std(ddof=1) / math.sqrt(v.size), rel=1e-10)


def test_empty_stats():
    s = SampleStats()
    assert s.variance == 0.0 and math.isnan(s.stderr)
    assert s.update([]).count == 0


# ---------------------------------------------------------------- Histogram


def test_histogram_counts_and_edges():
    h = Histogram(-1.0, 1.0, 4).add([-1.0, -0.5, -0.01, 0.0, 0.99, 1.0, -3.0, 5.0])
    assert h.counts.tolist() == [1, 2, 1, 1]
    assert (h.underflow, h.overflow, h.total) == (1, 2, 8)
    np.testing.assert_allclose(h.edges, [-1, -0.5, 0, 0.5, 1])


@given(st.lists(st.floats(-10, 10, allow_nan=False), max_size=200), st.integers(1, 50))
@settings(max_examples=60, deadline=None)
def test_histogram_total_equals_samples(values, bins):
    h = Histogram(-3, 4, bins).add(values)
    assert h.total == len(values)
    for v in values:
        one = Histogram(-3, 4, bins).add([v])
        if one.counts.any():
            i = int(np.argmax(one.counts))
            assert h.edges[i] - 1e-12 <= v < h.edges[i + 1] + 1e-12


def test_histogram_merge_and_validation():
    a = Histogram(0, 1, 5).add([0.1, 0.3])
    b = Histogram(0, 1, 5).add([0.3, 2.0])
    m = a.merge(b)
    assert m.total == 4 and m.counts[1] == 2 and m.overflow == 1
    with pytest.raises(ValueError):
        a.merge(Histogram(0, 2, 5))
    with pytest.raises(ValueError):
        Histogram(1, 1, 3)


def test_histogram_density_integrates_to_inside_fraction():
    h = Histogram(-2, 2, 40).add(np.random.default_rng(1).normal(size=10_000))
    inside = h.counts.sum() / h.total
    assert (h.density() * h.width).sum() == pytest.approx(inside, rel=1e-12)


# ---------------------------------------------------------------- KS


def test_ks_against_scipy():
    x = np.random.default_rng(3).normal(0.1, 1.0, size=5000)
    assert ks_distance(x) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    y = np.random.default_rng(4).normal(size=3000)
    assert ks_two_sample(x, y) == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-12)


def test_ks_from_reference_is_small():
    x = np.random.default_rng(5).normal(size=100_000)
    assert ks_distance(x) < 0.01


def test_ks_constant_stream():
    assert ks_distance(np.full(100, 0.3)) >= 0.5


def test_ks_sort_invariance():
    x = np.random.default_rng(6).normal(size=1000)
    assert ks_distance(x) == ks_distance(np.sort(x)) == ks_distance(x[::-1])


def test_ks_needs_ten_samples():
    with pytest.raises(ValueError):
        ks_distance(np.zeros(9))
    with pytest.raises(ValueError):
        ks_two_sample(np.zeros(9), np.zeros(20))


# ---------------------------------------------------------------- execution


def test_map_chunks_order_and_threads():
    calls = list(map_chunks(lambda s, e: (s, e), 103, 10, threads=4))
    assert calls == [(s, min(s + 10, 103)) for s in range(0, 103, 10)]
    assert list(map_chunks(lambda s, e: (s, e), 103, 10, threads=1)) == calls


def test_worker_count_reads_env(monkeypatch):
    monkeypatch.setenv("THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("THREADS", "0")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.delenv("THREADS")
    assert worker_count() >= 1


def test_chunk_size_bounds():
    assert chunk_size(1) == 4096
    assert chunk_size(454276) == 4
    assert chunk_size(10**8) == 1


def test_resolve_helpers():
    assert resolve_mode("M", 20) == 20 and resolve_mode("m", 3) == 3 and resolve_mode(4, 9) == 4
    with pytest.raises(ValueError):
        resolve_mode(-1, 3)
    assert resolve_path("auto", 900) is Path.FULL
    assert resolve_path("auto", 10**5) is Path.FAST
    assert resolve_path("full", 10**5) is Path.FULL


def correlations(space, pairs, n, seed, path=Path.FULL, threads=None):
    return np.concatenate(list(sample_correlations(space, pairs, n, seed, path, threads)))


def test_sampling_is_thread_independent():
    basis = enumerate_basis(bose(12))
    space = make_space(basis, basis)
    pairs = [(mode_parity_observable(basis, 0), mode_parity_observable(basis, q)) for q in (0, 2, 5)]
    one = correlations(space, pairs, 9000, 21, threads=1)
    four = correlations(space, pairs, 9000, 21, threads=4)
    assert one.tobytes() == four.tobytes()
    fast1 = correlations(space, pairs, 9000, 21, Path.FAST, threads=1)
    fast3 = correlations(space, pairs, 9000, 21, Path.FAST, threads=3)
    assert fast1.tobytes() == fast3.tobytes()
    setting = ChshSetting()
    c1 = [np.concatenate(x) for x in zip(*sample_chsh(space, setting, 5000, 2, "full", 1))]
    c4 = [np.concatenate(x) for x in zip(*sample_chsh(space, setting, 5000, 2, "full", 4))]
    assert all(a.tobytes() == b.tobytes() for a, b in zip(c1, c4))


def test_grouped_tables_partition_basis():
    basis = enumerate_basis(bose(10))
    pairs = [(mode_parity_observable(basis, 0), mode_parity_observable(basis, q)) for q in (1, 3)]
    tables = diagonal_tables(pairs)
    groups = GroupedTables.from_tables(tables)
    assert groups.counts.sum() == basis.dim**2
    for k in range(2):
        assert (groups.patterns[k] * groups.counts).sum() == pytest.approx(tables[k].sum())


def test_fast_correlation_path_matches_full_in_law():
    basis = enumerate_basis(bose(10))
    space = make_space(basis, basis)
    pairs = [(mode_parity_observable(basis, 0), mode_parity_observable(basis, 1))]
    full = correlations(space, pairs, 50_000, 1)[:, 0]
    fast = correlations(space, pairs, 50_000, 2, Path.FAST)[:, 0]
    assert ks_two_sample(full, fast) < 0.015


# ---------------------------------------------------------------- experiments


def test_sweep_values_in_range():
    plan = ExperimentPlan(bose(20), bose(20), samples=2, seed=4)
    res = run_correlation_sweep(plan, range(21))
    assert len(res.showcase) == 2
    for values in res.showcase.values():
        assert len(values) == 21 and all(-1.0 <= v <= 1.0 for v in values)
    assert all(row.samples == 2 for row in res.rows)


def test_sweep_means_track_hilbert_average():
    plan = ExperimentPlan(bose(25), bose(25), samples=1000, seed=8)
    res = run_correlation_sweep(plan, range(26))
    for row in res.rows:
        assert abs(row.sample_mean - row.hilbert_average) <= 4 * row.exact_std / math.sqrt(1000) + 1e-15


def test_sweep_fermi_flat_top():
    spec = SectorSpec("fermi", 5, 30)
    plan = ExperimentPlan(spec, spec, samples=50, seed=2)
    qs = list(range(31))
    res = run_correlation_sweep(plan, qs)
    a_factor = microcanonical_average(mode_parity_observable(enumerate_basis(spec), 0))
    for row in res.rows[25:]:
        assert row.hilbert_average == a_factor
    for values in res.showcase.values():
        assert len(set(values[25:])) == 1


def test_variance_scan_zero_rows_and_bound():
    plan = ExperimentPlan(bose(0), bose(0), samples=500, seed=1)
    rows = run_variance_scan(plan, range(0, 9))
    for r in rows:
        assert r.exact_var < r.inv_dim
        if (r.pair == "0,0" and r.quanta <= 4) or (r.pair == "M,M" and r.quanta <= 1):
            assert r.exact_var == 0.0 and r.empirical_var == 0.0
        else:
            assert r.exact_var > 0.0


def test_variance_scan_skips_empty_sectors():
    spec = SectorSpec("fermi", 3, 0)
    rows = run_variance_scan(ExperimentPlan(spec, spec, samples=10), range(0, 5))
    assert sorted({r.quanta for r in rows}) == [3, 4]


@pytest.mark.parametrize("m", [10, 20])
def test_variance_ratio_at_1e4(m):
    plan = ExperimentPlan(bose(m), bose(m), samples=10_000, seed=31)
    for r in run_variance_scan(plan, [m], pairs=((0, 0), (0, 3))):
        assert 0.8 <= r.empirical_var / r.exact_var <= 1.2


def test_distribution_standardization():
    plan = ExperimentPlan(bose(8), bose(8), samples=20_000, seed=6)
    hist, summary, values = run_distribution(plan, standardize=True)
    n = summary.samples
    assert hist.total == n == values.size
    assert abs(summary.mean) < 4 / math.sqrt(n)
    assert abs(summary.variance - 1) < 4 * math.sqrt(2 / n)
    raw = run_distribution(plan, standardize=False, lo=-1, hi=1)[2]
    oracle = SampleStats().update(raw)
    assert summary.mean == pytest.approx((oracle.mean - summary.exact_mean) / summary.exact_std, abs=1e-12)
    assert summary.ks_normal is not None and 0 < summary.ks_normal < 1


def test_distribution_rejects_degenerate():
    with pytest.raises(ValueError):
        run_distribution(ExperimentPlan(bose(3), bose(3), samples=10))


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan(bose(3), bose(3), samples=0)


@pytest.mark.parametrize("m, dim", [(2, 4), (3, 9)])
def test_chsh_small_d_extended_and_block(m, dim):
    plan = ExperimentPlan(bose(m), bose(m), samples=100_000, seed=3)
    h_ext, h_blk, s = run_chsh_distribution(plan)
    assert s.dim == dim and h_ext.total == h_blk.total == 100_000
    assert abs(s.mean - s.trace_mean) < 4 * s.stderr
    assert abs(s.block_mean - s.block_only_mean) < 4 * s.block_stderr
    assert s.violation_fraction > 0 and s.block_violation_fraction > 0
    assert -2 * math.sqrt(2) - 1e-12 <= s.min <= s.max <= 2 * math.sqrt(2) + 1e-12


def test_chsh_block_reading_violates_at_m10():
    plan = ExperimentPlan(bose(10), bose(10), samples=20_000, seed=5, path="fast")
    _, _, s = run_chsh_distribution(plan)
    assert s.block_violation_fraction > 0
    assert abs(s.block_violation_fraction - s.analytic_violation_fraction) < 5 * math.sqrt(0.0126 / 20_000)
