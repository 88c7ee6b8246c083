"""Bipartite product space and Haar-uniform pure states.

Random numbers come from NumPy's counter-based Philox4x64-10 generator. The
master seed is hashed by ``SeedSequence`` into the 128-bit Philox key and the
stream index is written into counter word 1, so every (seed, stream) pair
owns a disjoint block of the counter space. A sampled state uses the stream
equal to its global sample index, which is what keeps Monte Carlo output
independent of how samples are split across workers.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatchError, EmptySectorError
from .fock import SectorBasis

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10); key = SeedSequence(seed).generate_state(2, uint64); counter = [0, stream, 0, 0]"
NORM_TOL = 1e-12


@dataclass(frozen=True)
class BipartiteSpace:
    """H_A (x) H_B with row-major flat index a * D_B + b."""

    dim_a: int
    dim_b: int
    basis_a: SectorBasis | None = field(default=None, compare=False)
    basis_b: SectorBasis | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise EmptySectorError(f"both factors must be nonempty, got {self.dim_a} x {self.dim_b}")

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim_a, self.dim_b)

    def compose(self, a, b):
        return a * self.dim_b + b

    def decompose(self, index):
        return divmod(index, self.dim_b)


def make_space(basis_a: SectorBasis, basis_b: SectorBasis) -> BipartiteSpace:
    if basis_a.dim == 0 or basis_b.dim == 0:
        raise EmptySectorError("cannot build a product space on an empty sector")
    return BipartiteSpace(basis_a.dim, basis_b.dim, basis_a, basis_b)


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not 0 <= self.stream < 2**64:
            raise ValueError("stream index must fit in 64 unsigned bits")

    def generator(self) -> np.random.Generator:
        return substream(self.seed, self.stream)


@lru_cache(maxsize=64)
def _philox_key(seed: int) -> np.ndarray:
    key = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    key.setflags(write=False)
    return key


def substream(seed: int, stream: int) -> np.random.Generator:
    counter = np.array([0, stream, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_philox_key(seed), counter=counter))


class _StreamCursor(threading.local):
    """Per-thread Philox that is re-pointed at a new stream by a state reset.

    Equivalent to ``substream(seed, stream)`` but avoids constructing a new
    bit generator for every sample.
    """

    def __init__(self):
        self.seed = None

    def generator(self, seed: int, stream: int) -> np.random.Generator:
        if self.seed != seed:
            self.bitgen = np.random.Philox(key=_philox_key(seed))
            self.gen = np.random.Generator(self.bitgen)
            self.state = self.bitgen.state
            self.seed = seed
        state = self.state
        state["state"]["counter"][:] = (0, stream, 0, 0)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self.bitgen.state = state
        return self.gen


_cursor = _StreamCursor()


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Fast per-thread equivalent of :func:`substream` for hot loops."""
    return _cursor.generator(seed, stream)


def complex_gaussians(rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` complex numbers with independent standard-normal real and imaginary parts."""
    return rng.standard_normal(2 * size).view(np.complex128)


def gaussian_batch(dim: int, seed: int, streams) -> np.ndarray:
    """Unnormalized Gaussian vectors, one row per stream index."""
    streams = np.asarray(streams, dtype=np.uint64)
    out = np.empty((len(streams), 2 * dim))
    for row, s in enumerate(streams):
        stream_generator(seed, int(s)).standard_normal(out=out[row])
    return out.view(np.complex128)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    space: BipartiteSpace

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != self.space.dim:
            raise DimensionMismatchError(f"{amps.size} amplitudes for a space of dimension {self.space.dim}")
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError("state is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def grid(self) -> np.ndarray:
        """Amplitudes as a (D_A, D_B) array."""
        return self.amplitudes.reshape(self.space.shape)

    @classmethod
    def from_vector(cls, vector, space: BipartiteSpace) -> PureState:
        v = np.asarray(vector, dtype=np.complex128).reshape(-1)
        return cls(v / np.linalg.norm(v), space)


def norm(state) -> float:
    amps = state.amplitudes if isinstance(state, PureState) else np.asarray(state)
    return float(np.sqrt(np.sum(np.abs(amps) ** 2)))


def sample_uniform_state(space: BipartiteSpace, seed: SeedSpec) -> PureState:
    """Draw a state from the unitarily invariant measure on the unit sphere.

    D i.i.d. complex Gaussians divided by their Euclidean norm.
    """
    phi = complex_gaussians(seed.generator(), space.dim)
    return PureState(phi / np.sqrt(np.sum(phi.real**2 + phi.imag**2)), space)


def sample_uniform_batch(space: BipartiteSpace, seed: int, streams) -> np.ndarray:
    """Normalized amplitude rows; row i equals, up to rounding,
    ``sample_uniform_state(space, SeedSpec(seed, streams[i]))``.
    """
    phi = gaussian_batch(space.dim, seed, streams)
    w = phi.real**2 + phi.imag**2
    return phi / np.sqrt(w.sum(axis=1))[:, None]
