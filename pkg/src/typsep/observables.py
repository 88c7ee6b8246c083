"""Subsystem observables, correlators and their uniform-measure moments.

Two observable classes cover everything the experiments need:

* ``DiagonalObservable``: one eigenvalue per sector configuration.
* ``TwoLevelObservable``: identity except for a Hermitian 2x2 block acting
  on a designated pair of configurations.

A correlator <O_A O_B> is evaluated as the Rayleigh quotient
<psi|O_A (x) O_B|psi> / <psi|psi>. For normalized states this is the plain
expectation value; dividing by the squared norm also makes degenerate cases
(O_A (x) O_B = +-identity) come out exactly +-1 in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatchError
from .fock import SectorBasis
from .hilbert import BipartiteSpace, PureState

HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class DiagonalObservable:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size and (v.min() < -1.0 or v.max() > 1.0):
            raise ValueError("eigenvalues must lie in [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    def diagonal(self) -> np.ndarray:
        return self.values

    def trace(self) -> float:
        return float(self.values.sum())

    def trace_sq(self) -> float:
        """Tr(O^2)."""
        return float(np.dot(self.values, self.values))

    def matrix(self) -> np.ndarray:
        return np.diag(self.values).astype(np.complex128)

    def act(self, grid: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * grid.ndim
        shape[axis] = self.dim
        return grid * self.values.reshape(shape)


@dataclass(frozen=True)
class TwoLevelObservable:
    """Identity on all basis states except ``pair``, where ``block`` acts.

    ``block`` is written in the ordered basis (pair[0], pair[1]).
    """

    dim: int
    pair: tuple[int, int]
    block: np.ndarray

    def __post_init__(self):
        i, j = (int(p) for p in self.pair)
        if i == j:
            raise ValueError("pair indices must be distinct")
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise ValueError(f"pair {self.pair} out of range for dimension {self.dim}")
        b = np.array(self.block, dtype=np.complex128)
        if b.shape != (2, 2):
            raise ValueError("block must be 2x2")
        if np.max(np.abs(b - b.conj().T)) > HERMITIAN_TOL:
            raise ValueError("block must be Hermitian")
        ev = np.linalg.eigvalsh(b)
        if ev[0] < -1.0 - HERMITIAN_TOL or ev[-1] > 1.0 + HERMITIAN_TOL:
            raise ValueError("block eigenvalues must lie in [-1, 1]")
        b.setflags(write=False)
        object.__setattr__(self, "pair", (i, j))
        object.__setattr__(self, "block", b)

    def diagonal(self) -> np.ndarray:
        d = np.ones(self.dim)
        d[list(self.pair)] = self.block.diagonal().real
        return d

    def trace(self) -> float:
        return float(self.dim - 2 + self.block.trace().real)

    def trace_sq(self) -> float:
        return float(self.dim - 2 + np.sum(np.abs(self.block) ** 2))

    def matrix(self) -> np.ndarray:
        m = np.eye(self.dim, dtype=np.complex128)
        idx = np.ix_(self.pair, self.pair)
        m[idx] = self.block
        return m

    def act(self, grid: np.ndarray, axis: int) -> np.ndarray:
        out = np.array(grid, dtype=np.result_type(grid, self.block))
        i, j = self.pair
        g = np.moveaxis(grid, axis, 0)
        o = np.moveaxis(out, axis, 0)
        (b00, b01), (b10, b11) = self.block
        o[i] = b00 * g[i] + b01 * g[j]
        o[j] = b10 * g[i] + b11 * g[j]
        return out


Observable = Union[DiagonalObservable, TwoLevelObservable]


def mode_parity_observable(basis: SectorBasis, q: int) -> DiagonalObservable:
    """+1 on configurations with level q empty, -1 where it is occupied."""
    if q < 0:
        raise ValueError("mode index must be nonnegative")
    occupied = (basis.parts_array == q).any(axis=1)
    return DiagonalObservable(np.where(occupied, -1.0, 1.0))


def _dim_check(obs: Observable, dim: int, side: str):
    if obs.dim != dim:
        raise DimensionMismatchError(f"{side}-side observable has dimension {obs.dim}, subsystem has {dim}")


def microcanonical_average(obs: Observable, basis: SectorBasis | int | None = None) -> float:
    """Equal-weight average of the diagonal matrix elements over the sector."""
    if basis is not None:
        _dim_check(obs, basis if isinstance(basis, int) else basis.dim, "this")
    return float(obs.diagonal().sum() / obs.dim)


def hilbert_average(obs_a: Observable, obs_b: Observable, space: BipartiteSpace | None = None) -> float:
    """Mean of <O_A O_B> over the uniform measure: the product of microcanonical averages."""
    if space is not None:
        _dim_check(obs_a, space.dim_a, "A")
        _dim_check(obs_b, space.dim_b, "B")
    return microcanonical_average(obs_a) * microcanonical_average(obs_b)


def exact_variance(obs_a: Observable, obs_b: Observable, space: BipartiteSpace | None = None) -> float:
    """Variance of <O_A O_B> over the uniform measure.

    sigma^2 = Tr[(O_A O_B)^2] / (D^2 + D) - <O_A>^2 <O_B>^2 / (D + 1), with the
    trace running over the sector product basis.
    """
    mean_a = microcanonical_average(obs_a)
    mean_b = microcanonical_average(obs_b)
    if space is not None:
        _dim_check(obs_a, space.dim_a, "A")
        _dim_check(obs_b, space.dim_b, "B")
    d = obs_a.dim * obs_b.dim
    # double sum of |<n|O_A O_B|n'>|^2 factorizes into Tr(O_A^2) Tr(O_B^2)
    first = obs_a.trace_sq() * obs_b.trace_sq() / (d * d + d)
    return first - (mean_a * mean_a) * (mean_b * mean_b) / (d + 1)


def variance_bound(obs_a: Observable, obs_b: Observable) -> float:
    """D^-1 <O_A^2>_E <O_B^2>_E, a strict upper bound on :func:`exact_variance`."""
    return (obs_a.trace_sq() / obs_a.dim) * (obs_b.trace_sq() / obs_b.dim) / (obs_a.dim * obs_b.dim)


def apply(obs: Observable, state, side: str, space: BipartiteSpace | None = None) -> np.ndarray:
    """Action of O_A (x) 1 or 1 (x) O_B on a state vector; returns the flat vector."""
    if isinstance(state, PureState):
        space, amps = state.space, state.amplitudes
    else:
        if space is None:
            raise ValueError("a raw vector needs an explicit space")
        amps = np.asarray(state, dtype=np.complex128).reshape(-1)
        if amps.size != space.dim:
            raise DimensionMismatchError(f"vector of length {amps.size} for dimension {space.dim}")
    grid = amps.reshape(space.shape)
    if side == "A":
        _dim_check(obs, space.dim_a, "A")
        return obs.act(grid, 0).reshape(-1)
    if side == "B":
        _dim_check(obs, space.dim_b, "B")
        return obs.act(grid, 1).reshape(-1)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def correlations_batch(amps: np.ndarray, shape: tuple[int, int], obs_a: Observable, obs_b: Observable) -> np.ndarray:
    """<O_A O_B> for each row of a (n, D_A * D_B) amplitude array (rows need not be normalized)."""
    da, db = shape
    _dim_check(obs_a, da, "A")
    _dim_check(obs_b, db, "B")
    amps = np.asarray(amps).reshape(-1, da * db)
    w = amps.real**2 + amps.imag**2
    norm_sq = w.sum(axis=1)
    if isinstance(obs_a, DiagonalObservable) and isinstance(obs_b, DiagonalObservable):
        t = np.multiply.outer(obs_a.values, obs_b.values).reshape(-1)
        return (w * t).sum(axis=1) / norm_sq
    grids = amps.reshape(-1, da, db)
    acted = obs_a.act(obs_b.act(grids, 2), 1)
    quad = np.einsum("nij,nij->n", grids.conj(), acted)
    if np.max(np.abs(quad.imag), initial=0.0) > IMAG_TOL * max(1.0, np.max(norm_sq)):
        raise ArithmeticError("non-real expectation value of a Hermitian operator")
    return quad.real / norm_sq


def correlation(state: PureState, obs_a: Observable, obs_b: Observable) -> float:
    """<psi|O_A O_B|psi>."""
    return float(correlations_batch(state.amplitudes[None, :], state.space.shape, obs_a, obs_b)[0])
