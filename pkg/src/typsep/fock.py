"""Fixed-(N, M) occupation-number sectors of a harmonically trapped gas.

A configuration of N particles is stored in parts form: the sorted list of
occupied single-particle levels k_1 <= ... <= k_N (strict for fermions).
The sector holds every configuration whose total excitation quanta
sum(k_i) equals M (``Shell.EXACT``) or lies strictly below M
(``Shell.BELOW``).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import CapacityError, CountOverflowError, EmptySectorError

INT64_MAX = 2**63 - 1
ENUMERATION_LIMIT = 10**7


class Statistics(str, Enum):
    BOSE = "bose"
    FERMI = "fermi"


class Shell(str, Enum):
    EXACT = "exact"
    BELOW = "below"


@dataclass(frozen=True)
class SectorSpec:
    statistics: Statistics
    particles: int
    quanta: int
    shell: Shell = Shell.EXACT

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics(self.statistics))
        object.__setattr__(self, "shell", Shell(self.shell))
        if int(self.particles) != self.particles or self.particles < 1:
            raise ValueError(f"particle number must be a positive integer, got {self.particles}")
        if int(self.quanta) != self.quanta or self.quanta < 0:
            raise ValueError(f"quanta must be a nonnegative integer, got {self.quanta}")

    @property
    def ground_quanta(self) -> int:
        """Smallest total quanta any configuration can carry."""
        n = self.particles
        return n * (n - 1) // 2 if self.statistics is Statistics.FERMI else 0

    def with_quanta(self, quanta: int) -> SectorSpec:
        return SectorSpec(self.statistics, self.particles, quanta, self.shell)


@dataclass(frozen=True, order=True)
class Configuration:
    """Sorted single-particle levels of one many-body occupation state."""

    parts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(int(k) for k in self.parts))
        if any(k < 0 for k in self.parts):
            raise ValueError(f"levels must be nonnegative: {self.parts}")
        if any(a > b for a, b in zip(self.parts, self.parts[1:])):
            raise ValueError(f"parts must be sorted: {self.parts}")

    @property
    def quanta(self) -> int:
        return sum(self.parts)

    @property
    def particles(self) -> int:
        return len(self.parts)

    def occupations(self) -> dict[int, int]:
        """Occupation numbers n_k for every occupied level k."""
        return dict(Counter(self.parts))

    def occupation(self, level: int) -> int:
        return self.parts.count(level)

    def is_fermionic(self) -> bool:
        return all(a < b for a, b in zip(self.parts, self.parts[1:]))


@dataclass(frozen=True)
class SectorBasis:
    spec: SectorSpec
    configs: tuple[Configuration, ...]
    _index: dict = field(init=False, repr=False, compare=False)
    _parts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.configs)})
        if len(self._index) != len(self.configs):
            raise ValueError("duplicate configurations in basis")
        parts = np.array([c.parts for c in self.configs], dtype=np.int64)
        parts = parts.reshape(len(self.configs), self.spec.particles)
        parts.setflags(write=False)
        object.__setattr__(self, "_parts", parts)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configs)

    def __getitem__(self, i: int) -> Configuration:
        return self.configs[i]

    def index(self, config: Configuration | tuple[int, ...]) -> int:
        if not isinstance(config, Configuration):
            config = Configuration(tuple(config))
        try:
            return self._index[config]
        except KeyError:
            raise KeyError(f"{config.parts} is not in the sector {self.spec}") from None

    @property
    def parts_array(self) -> np.ndarray:
        """Read-only (D, N) integer array of the parts, row per configuration."""
        return self._parts


def _checked(value: int) -> int:
    if value > INT64_MAX:
        raise CountOverflowError(f"count {value} exceeds the 64-bit range")
    return value


@lru_cache(maxsize=None)
def _bose_count(quanta: int, max_part: int, parts: int) -> int:
    # non-increasing `parts`-tuples of levels <= max_part summing to `quanta`
    if parts == 0:
        return 1 if quanta == 0 else 0
    max_part = min(max_part, quanta)
    total = 0
    for top in range(max_part + 1):
        total += _bose_count(quanta - top, top, parts - 1)
    return _checked(total)


@lru_cache(maxsize=None)
def _fermi_count(quanta: int, max_part: int, parts: int) -> int:
    # strictly decreasing `parts`-tuples of levels <= max_part summing to `quanta`
    if parts == 0:
        return 1 if quanta == 0 else 0
    max_part = min(max_part, quanta)
    # the remaining parts-1 levels need at least 0+1+...+(parts-2) quanta
    if max_part < parts - 1:
        return 0
    total = 0
    for top in range(max_part + 1):
        total += _fermi_count(quanta - top, top - 1, parts - 1)
    return _checked(total)


def _exact_count(stats: Statistics, particles: int, quanta: int) -> int:
    if quanta < 0:
        return 0
    if stats is Statistics.BOSE:
        return _bose_count(quanta, quanta, particles)
    return _fermi_count(quanta, quanta, particles)


def dimension(spec: SectorSpec) -> int:
    """Number of configurations in the sector, counted without enumerating."""
    if spec.shell is Shell.EXACT:
        return _exact_count(spec.statistics, spec.particles, spec.quanta)
    total = 0
    for m in range(spec.quanta):
        total = _checked(total + _exact_count(spec.statistics, spec.particles, m))
    return total


def _generate(stats: Statistics, particles: int, budget: int, exact: bool):
    step = 1 if stats is Statistics.FERMI else 0

    def min_tail(lowest: int, count: int) -> int:
        # cheapest way to place `count` more levels, all >= lowest
        return count * lowest + step * count * (count - 1) // 2

    def extend(prefix: list[int], lowest: int, left: int, remaining: int):
        if left == 1:
            if exact:
                if remaining >= lowest:
                    yield (*prefix, remaining)
            else:
                for k in range(lowest, remaining + 1):
                    yield (*prefix, k)
            return
        k = lowest
        while min_tail(k, left) <= remaining:
            prefix.append(k)
            yield from extend(prefix, k + step, left - 1, remaining - k)
            prefix.pop()
            k += 1

    yield from extend([], 0, particles, budget)


def enumerate_basis(spec: SectorSpec, limit: int = ENUMERATION_LIMIT) -> SectorBasis:
    """All configurations of the sector in ascending lexicographic order of parts."""
    size = dimension(spec)
    if size > limit:
        raise CapacityError(f"sector {spec} has {size} configurations, limit is {limit}")
    if spec.shell is Shell.EXACT:
        budget, exact = spec.quanta, True
    else:
        budget, exact = spec.quanta - 1, False
    if budget < 0:
        return SectorBasis(spec, ())
    configs = tuple(
        Configuration(p) for p in _generate(spec.statistics, spec.particles, budget, exact)
    )
    return SectorBasis(spec, configs)


def staircase_map(config: Configuration) -> Configuration:
    """Send a fermionic configuration to its bosonic partner k'_i = k_i - i + 1.

    The image carries N(N-1)/2 fewer quanta; over a whole sector this is a
    bijection Fermi(N, M) -> Bose(N, M - N(N-1)/2).
    """
    if not config.is_fermionic():
        raise ValueError(f"levels must be strictly increasing: {config.parts}")
    return Configuration(tuple(k - i for i, k in enumerate(config.parts)))


def entropy(spec: SectorSpec) -> float:
    """ln D in nats (Boltzmann constant set to one)."""
    d = dimension(spec)
    if d == 0:
        raise EmptySectorError(f"sector {spec} is empty")
    return math.log(d)
