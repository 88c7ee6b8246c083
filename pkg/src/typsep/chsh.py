"""CHSH functional built from two designated configuration pairs.

On subsystem A the pair (|+>, |->) carries Pauli sigma_x / sigma_z; on B the
pair carries sigma_u / sigma_v. Every observable is the identity on the other
configurations of its sector, and

    F = sigma_x^A (sigma_u^B + sigma_v^B) + sigma_z^A (sigma_u^B - sigma_v^B).

Under ``Convention.RELABELED`` (the default) sigma_u = (X - Z)/sqrt2 and
sigma_v = (X + Z)/sqrt2 on the B pair, so that the state with
Psi_{+-} = Psi_{-+} reaches the Tsirelson value 2 sqrt2. ``Convention.LITERAL``
keeps sigma_u = (Z - X)/sqrt2, sigma_v = (Z + X)/sqrt2; both give the block
spectrum {2 sqrt2, 0, 0, -2 sqrt2}.

Two readings of <F> are available:

* ``Reading.EXTENDED``: the expectation value of F itself on the full space.
  Besides the pair (x) pair block, F acts non-trivially (traceless, +-2) on
  pairA (x) rest_B and rest_A (x) pairB.
* ``Reading.BLOCK``: F counted as 2 everywhere outside the 4-dimensional
  block. Its uniform-measure mean is 2 - 8/D and its large-D law is
  :func:`analytic_density`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError
from .hilbert import BipartiteSpace, PureState, SeedSpec, complex_gaussians, stream_generator
from .observables import TwoLevelObservable, correlations_batch

SQRT2 = math.sqrt(2.0)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
TSIRELSON = 2.0 * SQRT2


class Convention(str, Enum):
    RELABELED = "relabeled"
    LITERAL = "literal"


class Reading(str, Enum):
    EXTENDED = "extended"
    BLOCK = "block"


@dataclass(frozen=True)
class ChshSetting:
    pair_a: tuple[int, int] = (0, 1)
    pair_b: tuple[int, int] = (0, 1)
    convention: Convention = Convention.RELABELED

    def __post_init__(self):
        object.__setattr__(self, "pair_a", tuple(int(i) for i in self.pair_a))
        object.__setattr__(self, "pair_b", tuple(int(i) for i in self.pair_b))
        object.__setattr__(self, "convention", Convention(self.convention))
        for pair in (self.pair_a, self.pair_b):
            if len(pair) != 2 or pair[0] == pair[1] or min(pair) < 0:
                raise ValueError(f"a pair needs two distinct nonnegative indices, got {pair}")

    def blocks(self) -> dict[str, np.ndarray]:
        """2x2 blocks of sigma_x^A, sigma_z^A, sigma_u^B, sigma_v^B."""
        if self.convention is Convention.RELABELED:
            u = (PAULI_X - PAULI_Z) / SQRT2
            v = (PAULI_X + PAULI_Z) / SQRT2
        else:
            u = (PAULI_Z - PAULI_X) / SQRT2
            v = (PAULI_Z + PAULI_X) / SQRT2
        return {"x": PAULI_X, "z": PAULI_Z, "u": u, "v": v}

    def check(self, space: BipartiteSpace):
        if max(self.pair_a) >= space.dim_a or max(self.pair_b) >= space.dim_b:
            raise DimensionMismatchError(f"pairs {self.pair_a}, {self.pair_b} do not fit a {space.dim_a} x {space.dim_b} space")


@dataclass(frozen=True)
class ChshObservables:
    sx_a: TwoLevelObservable
    sz_a: TwoLevelObservable
    su_b: TwoLevelObservable
    sv_b: TwoLevelObservable


def build_chsh(setting: ChshSetting, space: BipartiteSpace) -> ChshObservables:
    setting.check(space)
    b = setting.blocks()
    return ChshObservables(
        TwoLevelObservable(space.dim_a, setting.pair_a, b["x"]),
        TwoLevelObservable(space.dim_a, setting.pair_a, b["z"]),
        TwoLevelObservable(space.dim_b, setting.pair_b, b["u"]),
        TwoLevelObservable(space.dim_b, setting.pair_b, b["v"]),
    )


def block_operator(setting: ChshSetting) -> np.ndarray:
    """F on pair (x) pair, basis order (++, +-, -+, --)."""
    b = setting.blocks()
    return np.kron(b["x"], b["u"] + b["v"]) + np.kron(b["z"], b["u"] - b["v"])


def dense_operator(setting: ChshSetting, space: BipartiteSpace) -> np.ndarray:
    """F as a dense D x D matrix. Intended for small spaces and checks."""
    ob = build_chsh(setting, space)
    mu, mv = ob.su_b.matrix(), ob.sv_b.matrix()
    return np.kron(ob.sx_a.matrix(), mu + mv) + np.kron(ob.sz_a.matrix(), mu - mv)


@dataclass(frozen=True)
class BlockAmplitudes:
    pp: complex
    pm: complex
    mp: complex
    mm: complex
    residual: float

    @classmethod
    def from_state(cls, state: PureState, setting: ChshSetting) -> BlockAmplitudes:
        setting.check(state.space)
        g = state.grid
        (ap, am), (bp, bm) = setting.pair_a, setting.pair_b
        comps = [complex(g[ap, bp]), complex(g[ap, bm]), complex(g[am, bp]), complex(g[am, bm])]
        weight = sum(abs(c) ** 2 for c in comps)
        return cls(*comps, residual=max(0.0, 1.0 - weight))

    @property
    def eta(self) -> float:
        """2 |Psi_{+-}|^2."""
        return 2.0 * abs(self.pm) ** 2

    def vector(self) -> np.ndarray:
        return np.array([self.pp, self.pm, self.mp, self.mm])


def _block_indices(setting: ChshSetting, shape: tuple[int, int]) -> np.ndarray:
    (ap, am), (bp, bm) = setting.pair_a, setting.pair_b
    db = shape[1]
    return np.array([ap * db + bp, ap * db + bm, am * db + bp, am * db + bm])


def _quad(op: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Real part of <v|op|v> for each row v."""
    return np.einsum("ni,ij,nj->n", vecs.conj(), op, vecs).real


def chsh_values_batch(amps: np.ndarray, shape: tuple[int, int], setting: ChshSetting) -> tuple[np.ndarray, np.ndarray]:
    """(extended, block) readings of <F> for each amplitude row; rows need not be normalized."""
    space = BipartiteSpace(*shape)
    ob = build_chsh(setting, space)
    amps = np.asarray(amps).reshape(-1, space.dim)
    extended = (
        correlations_batch(amps, shape, ob.sx_a, ob.su_b)
        + correlations_batch(amps, shape, ob.sx_a, ob.sv_b)
        + correlations_batch(amps, shape, ob.sz_a, ob.su_b)
        - correlations_batch(amps, shape, ob.sz_a, ob.sv_b)
    )
    norm_sq = (amps.real**2 + amps.imag**2).sum(axis=1)
    beta = amps[:, _block_indices(setting, shape)]
    block = 2.0 + _quad(block_operator(setting) - 2.0 * np.eye(4), beta) / norm_sq
    return extended, block


def chsh_value(state: PureState, setting: ChshSetting, reading: Reading = Reading.EXTENDED) -> float:
    extended, block = chsh_values_batch(state.amplitudes[None, :], state.space.shape, setting)
    return float(extended[0] if Reading(reading) is Reading.EXTENDED else block[0])


@dataclass(frozen=True)
class ChshMean:
    trace_mean: float
    block_only_mean: float


def chsh_mean_exact(setting: ChshSetting, space: BipartiteSpace) -> ChshMean:
    """Uniform-measure mean of <F>: Tr(F)/D, next to the block-only value 2 - 8/D."""
    ob = build_chsh(setting, space)
    tu, tv = ob.su_b.trace(), ob.sv_b.trace()
    trace = ob.sx_a.trace() * (tu + tv) + ob.sz_a.trace() * (tu - tv)
    return ChshMean(trace / space.dim, 2.0 - 8.0 / space.dim)


# large-D law of the block reading, in x = D(<F> - 2)/2
_RATE_POS = SQRT2 + 1.0
_RATE_NEG = SQRT2 - 1.0
_C_POS = 1.0 / (3.0 * SQRT2 + 4.0)
_C_NEG = 1.0 / (3.0 * SQRT2 - 4.0)


def _shape_x(x):
    x = np.asarray(x, dtype=float)
    xn = np.minimum(x, 0.0)
    pos = _C_POS * np.exp(-np.maximum(x, 0.0) * _RATE_POS)
    neg = _C_NEG * np.exp(xn * _RATE_NEG) + 2.0 * np.exp(xn) * (xn - 2.0)
    return np.where(x > 0, pos, neg)


def density_x(x):
    """Probability density of x = D(<F> - 2)/2; integrates to one over x."""
    out = _shape_x(x) / 4.0
    return float(out) if np.ndim(out) == 0 else out


def cdf_x(x):
    """Cumulative distribution of x under :func:`density_x`."""
    x = np.asarray(x, dtype=float)
    xn = np.minimum(x, 0.0)
    below = (_C_NEG / _RATE_NEG * np.exp(xn * _RATE_NEG) + 2.0 * np.exp(xn) * (xn - 3.0)) / 4.0
    above = 1.0 - violation_fraction_analytic() * np.exp(-np.maximum(x, 0.0) * _RATE_POS)
    out = np.where(x > 0, above, below)
    return float(out) if np.ndim(out) == 0 else out


def analytic_density(dim: int, f):
    """Large-D density of <F> at value(s) f for a product space of dimension ``dim``."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    x = dim * (np.asarray(f, dtype=float) - 2.0) / 2.0
    out = dim / 8.0 * _shape_x(x)
    return float(out) if np.ndim(out) == 0 else out


def violation_fraction_analytic() -> float:
    """Mass of the large-D law above <F> = 2, i.e. 1/(40 + 28 sqrt2)."""
    return (10.0 - 7.0 * SQRT2) / 8.0


@dataclass(frozen=True)
class _FastLayout:
    size: int
    remainder: int
    rows_p: np.ndarray
    rows_m: np.ndarray
    cols_p: np.ndarray
    cols_m: np.ndarray
    block: np.ndarray
    cross_a: np.ndarray
    cross_b: np.ndarray
    block_op: np.ndarray


def _fast_layout(shape: tuple[int, int], setting: ChshSetting) -> _FastLayout:
    da, db = shape
    setting.check(BipartiteSpace(da, db))
    (ap, am), (bp, bm) = setting.pair_a, setting.pair_b
    # support of F - 2: pair rows of A in full, plus the pair columns of B elsewhere
    support = [a * db + b for a in range(da) for b in (range(db) if a in (ap, am) else sorted((bp, bm)))]
    pos = {flat: k for k, flat in enumerate(support)}
    rest_b = [b for b in range(db) if b not in (bp, bm)]
    rest_a = [a for a in range(da) if a not in (ap, am)]
    b = setting.blocks()
    return _FastLayout(
        size=len(support),
        remainder=da * db - len(support),
        rows_p=np.array([pos[ap * db + c] for c in rest_b], dtype=np.intp),
        rows_m=np.array([pos[am * db + c] for c in rest_b], dtype=np.intp),
        cols_p=np.array([pos[r * db + bp] for r in rest_a], dtype=np.intp),
        cols_m=np.array([pos[r * db + bm] for r in rest_a], dtype=np.intp),
        block=np.array([pos[i] for i in _block_indices(setting, shape)], dtype=np.intp),
        # off the B pair sigma_u = sigma_v = 1, so F = 2 sigma_x^A there; off the A pair F = 2 sigma_u^B
        cross_a=2.0 * b["x"] - 2.0 * np.eye(2),
        cross_b=2.0 * b["u"] - 2.0 * np.eye(2),
        block_op=block_operator(setting) - 2.0 * np.eye(4),
    )


def chsh_fast_batch(shape: tuple[int, int], setting: ChshSetting, seed: int, streams) -> tuple[np.ndarray, np.ndarray]:
    """(extended, block) readings of <F> for uniform states, one per stream index.

    Only the amplitudes on which F - 2 acts are drawn; the squared norm of the
    remaining D - s amplitudes is a single chi-square draw with 2(D - s)
    degrees of freedom. The result has the same law as evaluating F on a full
    sampled state.
    """
    lay = _fast_layout(shape, setting)
    streams = np.asarray(streams, dtype=np.uint64)
    z = np.empty((len(streams), lay.size), dtype=np.complex128)
    rest = np.zeros(len(streams))
    for row, s in enumerate(streams):
        rng = stream_generator(seed, int(s))
        z[row] = complex_gaussians(rng, lay.size)
        if lay.remainder:
            rest[row] = rng.chisquare(2 * lay.remainder)
    norm_sq = (z.real**2 + z.imag**2).sum(axis=1) + rest
    q_block = _quad(lay.block_op, z[:, lay.block])
    pair_a = np.stack([z[:, lay.rows_p], z[:, lay.rows_m]], axis=-1).reshape(-1, 2)
    pair_b = np.stack([z[:, lay.cols_p], z[:, lay.cols_m]], axis=-1).reshape(-1, 2)
    q_a = _quad(lay.cross_a, pair_a).reshape(len(streams), -1).sum(axis=1)
    q_b = _quad(lay.cross_b, pair_b).reshape(len(streams), -1).sum(axis=1)
    extended = 2.0 + (q_block + q_a + q_b) / norm_sq
    block = 2.0 + q_block / norm_sq
    return extended, block


def sample_chsh_fast(space: BipartiteSpace, setting: ChshSetting, seed: SeedSpec, reading: Reading = Reading.EXTENDED) -> float:
    extended, block = chsh_fast_batch(space.shape, setting, seed.seed, [seed.stream])
    return float(extended[0] if Reading(reading) is Reading.EXTENDED else block[0])
