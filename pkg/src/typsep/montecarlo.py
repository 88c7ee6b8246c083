"""Monte Carlo drivers for the correlation and CHSH experiments.

Samples are processed in fixed-size chunks of consecutive global sample
indices. Chunk boundaries depend only on the sample count and the space
dimension, sample i always uses RNG stream i, and chunk results are reduced
in chunk order, so the number of worker threads never changes any output bit.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import special

from . import chsh
from .chsh import ChshSetting
from .fock import SectorBasis, SectorSpec, enumerate_basis
from .hilbert import BipartiteSpace, gaussian_batch, make_space, stream_generator
from .observables import (
    DiagonalObservable,
    exact_variance,
    hilbert_average,
    mode_parity_observable,
)

CHUNK_ELEMENTS = 2**21
MAX_CHUNK = 4096
FAST_CHSH_ABOVE = 10**4


class Path(str, Enum):
    AUTO = "auto"
    FULL = "full"
    FAST = "fast"


# ---------------------------------------------------------------- statistics


@dataclass
class SampleStats:
    """Streaming count, mean, second central moment, min and max."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    def update(self, values) -> SampleStats:
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size == 0:
            return self
        batch_mean = float(v.mean())
        batch = SampleStats(v.size, batch_mean, float(((v - batch_mean) ** 2).sum()), float(v.min()), float(v.max()))
        merged = self.merge(batch)
        self.count, self.mean, self.m2, self.min, self.max = merged.count, merged.mean, merged.m2, merged.min, merged.max
        return self

    def push(self, value: float) -> SampleStats:
        """Single-value Welford step."""
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)
        self.min = min(self.min, value)
        self.max = max(self.max, value)
        return self

    def merge(self, other: SampleStats) -> SampleStats:
        if other.count == 0:
            return SampleStats(self.count, self.mean, self.m2, self.min, self.max)
        if self.count == 0:
            return SampleStats(other.count, other.mean, other.m2, other.min, other.max)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return SampleStats(n, mean, m2, min(self.min, other.min), max(self.max, other.max))

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count else math.nan


@dataclass
class Histogram:
    """Uniform bins on [lo, hi); values outside land in underflow / overflow."""

    lo: float
    hi: float
    bins: int
    counts: np.ndarray = field(default=None)
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        if not self.hi > self.lo or self.bins < 1:
            raise ValueError("histogram needs hi > lo and at least one bin")
        if self.counts is None:
            self.counts = np.zeros(self.bins, dtype=np.int64)

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.bins + 1)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def add(self, values) -> Histogram:
        v = np.asarray(values, dtype=float).reshape(-1)
        idx = np.floor((v - self.lo) / self.width)
        below = idx < 0
        above = idx >= self.bins
        self.underflow += int(below.sum())
        self.overflow += int(above.sum())
        inside = idx[~(below | above)].astype(np.int64)
        self.counts += np.bincount(inside, minlength=self.bins)
        return self

    def merge(self, other: Histogram) -> Histogram:
        if (self.lo, self.hi, self.bins) != (other.lo, other.hi, other.bins):
            raise ValueError("cannot merge histograms with different binning")
        return Histogram(self.lo, self.hi, self.bins, self.counts + other.counts,
                         self.underflow + other.underflow, self.overflow + other.overflow)

    def density(self) -> np.ndarray:
        """Counts per unit abscissa, normalized by every recorded sample."""
        return self.counts / (max(self.total, 1) * self.width)


def normal_cdf(x):
    return special.ndtr(x)


def ks_distance(samples, cdf: Callable = normal_cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def ks_two_sample(x, y) -> float:
    """Sup distance between two empirical CDFs."""
    x = np.sort(np.asarray(x, dtype=float).reshape(-1))
    y = np.sort(np.asarray(y, dtype=float).reshape(-1))
    if min(x.size, y.size) < 10:
        raise ValueError("need at least 10 samples in each stream")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


# ---------------------------------------------------------------- execution


def worker_count() -> int:
    """Threads to use: THREADS from the environment, else every core."""
    raw = os.environ.get("THREADS", "").strip()
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def chunk_size(dim: int) -> int:
    return max(1, min(MAX_CHUNK, CHUNK_ELEMENTS // max(dim, 1)))


def map_chunks(fn: Callable[[int, int], object], n: int, size: int, threads: int | None = None) -> Iterator:
    """fn(start, stop) over consecutive chunks of range(n), yielded in chunk order."""
    bounds = [(s, min(s + size, n)) for s in range(0, n, size)]
    threads = threads or worker_count()
    if threads == 1 or len(bounds) <= 1:
        for s, e in bounds:
            yield fn(s, e)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # bounded look-ahead keeps memory flat for long runs
        window = threads * 2
        pending = []
        for s, e in bounds:
            pending.append(pool.submit(fn, s, e))
            if len(pending) >= window:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


# ---------------------------------------------------------------- sampling kernels


def diagonal_tables(obs_pairs: Sequence[tuple[DiagonalObservable, DiagonalObservable]]) -> np.ndarray:
    """(k, D_A * D_B) eigenvalue table of each product O_A (x) O_B."""
    return np.stack([np.multiply.outer(a.values, b.values).reshape(-1) for a, b in obs_pairs])


def correlation_chunk_full(space: BipartiteSpace, tables: np.ndarray, seed: int, start: int, stop: int) -> np.ndarray:
    """(stop-start, k) correlators of sampled states for diagonal product tables."""
    phi = gaussian_batch(space.dim, seed, range(start, stop))
    w = phi.real**2 + phi.imag**2
    norm_sq = w.sum(axis=1)
    return np.stack([(w * t).sum(axis=1) / norm_sq for t in tables], axis=1)


@dataclass(frozen=True)
class GroupedTables:
    """Product-basis states grouped by their joint eigenvalue pattern."""

    patterns: np.ndarray  # (k, G)
    counts: np.ndarray  # (G,)

    @classmethod
    def from_tables(cls, tables: np.ndarray) -> GroupedTables:
        patterns, counts = np.unique(tables.T, axis=0, return_counts=True)
        return cls(np.ascontiguousarray(patterns.T), counts.astype(float))


def correlation_chunk_fast(groups: GroupedTables, seed: int, start: int, stop: int) -> np.ndarray:
    """Same law as :func:`correlation_chunk_full` for diagonal observables.

    The summed weight |psi_i|^2 of a group of c basis states sharing one
    eigenvalue pattern is Gamma(c)-distributed (up to a common scale), so one
    gamma draw per group replaces c complex Gaussians.
    """
    g = np.empty((stop - start, groups.counts.size))
    for row, s in enumerate(range(start, stop)):
        g[row] = stream_generator(seed, s).standard_gamma(groups.counts)
    norm_sq = g.sum(axis=1)
    return np.stack([(g * t).sum(axis=1) / norm_sq for t in groups.patterns], axis=1)


def sample_correlations(space: BipartiteSpace, obs_pairs, samples: int, seed: int, path: Path = Path.FULL,
                        threads: int | None = None) -> Iterator[np.ndarray]:
    """Yield (chunk, k) arrays of correlators for ``samples`` uniform states, in sample order."""
    tables = diagonal_tables(obs_pairs)
    if Path(path) is Path.FAST:
        groups = GroupedTables.from_tables(tables)
        fn = lambda s, e: correlation_chunk_fast(groups, seed, s, e)  # noqa: E731
        size = chunk_size(groups.counts.size)
    else:
        fn = lambda s, e: correlation_chunk_full(space, tables, seed, s, e)  # noqa: E731
        size = chunk_size(space.dim)
    yield from map_chunks(fn, samples, size, threads)


def chsh_chunk_full(space: BipartiteSpace, setting: ChshSetting, seed: int, start: int, stop: int):
    phi = gaussian_batch(space.dim, seed, range(start, stop))
    return chsh.chsh_values_batch(phi, space.shape, setting)


def resolve_path(path: Path | str, dim: int) -> Path:
    path = Path(path)
    if path is Path.AUTO:
        return Path.FAST if dim > FAST_CHSH_ABOVE else Path.FULL
    return path


def sample_chsh(space: BipartiteSpace, setting: ChshSetting, samples: int, seed: int, path: Path = Path.AUTO,
                threads: int | None = None) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (extended, block) chunks of <F> for ``samples`` uniform states."""
    setting.check(space)
    if resolve_path(path, space.dim) is Path.FAST:
        fn = lambda s, e: chsh.chsh_fast_batch(space.shape, setting, seed, range(s, e))  # noqa: E731
        size = chunk_size(2 * space.dim_b + 2 * space.dim_a)
    else:
        fn = lambda s, e: chsh_chunk_full(space, setting, seed, s, e)  # noqa: E731
        size = chunk_size(space.dim)
    yield from map_chunks(fn, samples, size, threads)


# ---------------------------------------------------------------- experiments


def resolve_mode(selector: int | str, quanta: int) -> int:
    """A mode selector is a level index or the literal 'M' (the sector's quanta)."""
    if isinstance(selector, str):
        s = selector.strip()
        if s.upper() == "M":
            return quanta
        selector = int(s)
    if selector < 0:
        raise ValueError("mode index must be nonnegative")
    return int(selector)


@dataclass(frozen=True)
class ExperimentPlan:
    spec_a: SectorSpec
    spec_b: SectorSpec
    samples: int
    seed: int = 0
    obs_a: int | str = 0
    obs_b: int | str = 0
    path: Path = Path.FULL

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")
        object.__setattr__(self, "path", Path(self.path))

    def bases(self) -> tuple[SectorBasis, SectorBasis]:
        return enumerate_basis(self.spec_a), enumerate_basis(self.spec_b)

    def space(self) -> BipartiteSpace:
        return make_space(*self.bases())

    def at_quanta(self, quanta: int) -> ExperimentPlan:
        return ExperimentPlan(self.spec_a.with_quanta(quanta), self.spec_b.with_quanta(quanta), self.samples,
                              self.seed, self.obs_a, self.obs_b, self.path)


@dataclass(frozen=True)
class SweepRow:
    q: int
    samples: int
    sample_mean: float
    sample_std: float
    hilbert_average: float
    exact_std: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    showcase: dict[int, list[float]]  # sample index -> correlation per q


def run_correlation_sweep(plan: ExperimentPlan, qs: Sequence[int], showcase: int = 2,
                          threads: int | None = None) -> SweepResult:
    """<O_A^(p) O_B^(q)> over q, each sampled state evaluated at every q."""
    basis_a, basis_b = plan.bases()
    space = make_space(basis_a, basis_b)
    obs_a = mode_parity_observable(basis_a, resolve_mode(plan.obs_a, plan.spec_a.quanta))
    pairs = [(obs_a, mode_parity_observable(basis_b, q)) for q in qs]
    stats = [SampleStats() for _ in qs]
    shown: dict[int, list[float]] = {}
    seen = 0
    for block in sample_correlations(space, pairs, plan.samples, plan.seed, plan.path, threads):
        for i in range(min(showcase - seen, block.shape[0])):
            shown[seen + i] = [float(v) for v in block[i]]
        seen += block.shape[0]
        for k, st in enumerate(stats):
            st.update(block[:, k])
    rows = [
        SweepRow(q, st.count, st.mean, st.std, hilbert_average(a, b), math.sqrt(max(exact_variance(a, b), 0.0)))
        for q, st, (a, b) in zip(qs, stats, pairs)
    ]
    return SweepResult(rows, shown)


@dataclass(frozen=True)
class VarianceRow:
    pair: str
    quanta: int
    dim: int
    empirical_var: float
    exact_var: float
    inv_dim: float


def run_variance_scan(plan: ExperimentPlan, ms: Sequence[int],
                      pairs: Sequence[tuple[int | str, int | str]] = ((0, 0), ("M", "M")),
                      threads: int | None = None) -> list[VarianceRow]:
    """Mean of (<O_A O_B> - hilbert average)^2 over sampled states, per quanta M and observable pair."""
    rows = []
    for m in ms:
        sub = plan.at_quanta(m)
        basis_a, basis_b = sub.bases()
        if basis_a.dim == 0 or basis_b.dim == 0:
            continue
        space = make_space(basis_a, basis_b)
        obs = [(mode_parity_observable(basis_a, resolve_mode(pa, m)), mode_parity_observable(basis_b, resolve_mode(pb, m)))
               for pa, pb in pairs]
        means = np.array([hilbert_average(a, b) for a, b in obs])
        sq = [0.0] * len(obs)
        n = 0
        for block in sample_correlations(space, obs, plan.samples, plan.seed, plan.path, threads):
            dev = block - means
            for k in range(len(obs)):
                sq[k] += float(np.dot(dev[:, k], dev[:, k]))
            n += block.shape[0]
        for (pa, pb), (a, b), s in zip(pairs, obs, sq):
            rows.append(VarianceRow(f"{pa},{pb}", m, space.dim, s / n, exact_variance(a, b), 1.0 / space.dim))
    return rows


@dataclass(frozen=True)
class DistributionSummary:
    samples: int
    exact_mean: float
    exact_std: float
    standardized: bool
    mean: float
    variance: float
    ks_normal: float | None


def run_distribution(plan: ExperimentPlan, standardize: bool = True, lo: float = -5.0, hi: float = 5.0,
                     bins: int = 100, threads: int | None = None) -> tuple[Histogram, DistributionSummary, np.ndarray]:
    """Histogram of correlators, standardized with the exact mean and std when asked.

    Returns the histogram, a summary, and the (possibly standardized) sample array.
    """
    basis_a, basis_b = plan.bases()
    space = make_space(basis_a, basis_b)
    a = mode_parity_observable(basis_a, resolve_mode(plan.obs_a, plan.spec_a.quanta))
    b = mode_parity_observable(basis_b, resolve_mode(plan.obs_b, plan.spec_b.quanta))
    mu, var = hilbert_average(a, b), exact_variance(a, b)
    if standardize and var <= 0.0:
        raise ValueError("the correlator has zero variance in this sector; nothing to standardize")
    sd = math.sqrt(max(var, 0.0))
    values = np.concatenate([blk[:, 0] for blk in sample_correlations(space, [(a, b)], plan.samples, plan.seed, plan.path, threads)])
    if standardize:
        values = (values - mu) / sd
    hist = Histogram(lo, hi, bins).add(values)
    st = SampleStats().update(values)
    ks = ks_distance(values) if standardize and values.size >= 10 else None
    return hist, DistributionSummary(values.size, mu, sd, standardize, st.mean, st.variance, ks), values


@dataclass(frozen=True)
class ChshSummary:
    samples: int
    dim: int
    path: str
    mean: float
    stderr: float
    trace_mean: float
    block_only_mean: float
    violation_fraction: float
    block_mean: float
    block_stderr: float
    block_violation_fraction: float
    analytic_violation_fraction: float
    min: float
    max: float


def run_chsh_distribution(plan: ExperimentPlan, setting: ChshSetting = ChshSetting(), lo: float = -40.0,
                          hi: float = 12.0, bins: int = 200, threads: int | None = None
                          ) -> tuple[Histogram, Histogram, ChshSummary]:
    """Histograms of D(<F> - 2) for the extended and block readings, plus a summary."""
    space = plan.space()
    path = resolve_path(plan.path, space.dim)
    h_ext, h_blk = Histogram(lo, hi, bins), Histogram(lo, hi, bins)
    s_ext, s_blk = SampleStats(), SampleStats()
    viol_ext = viol_blk = 0
    for ext, blk in sample_chsh(space, setting, plan.samples, plan.seed, path, threads):
        h_ext.add(space.dim * (ext - 2.0))
        h_blk.add(space.dim * (blk - 2.0))
        s_ext.update(ext)
        s_blk.update(blk)
        viol_ext += int((ext > 2.0).sum())
        viol_blk += int((blk > 2.0).sum())
    exact = chsh.chsh_mean_exact(setting, space)
    n = s_ext.count
    summary = ChshSummary(
        samples=n, dim=space.dim, path=path.value,
        mean=s_ext.mean, stderr=s_ext.stderr,
        trace_mean=exact.trace_mean, block_only_mean=exact.block_only_mean,
        violation_fraction=viol_ext / n,
        block_mean=s_blk.mean, block_stderr=s_blk.stderr, block_violation_fraction=viol_blk / n,
        analytic_violation_fraction=chsh.violation_fraction_analytic(),
        min=s_ext.min, max=s_ext.max,
    )
    return h_ext, h_blk, summary
