"""Typical entangled states of two trapped gases versus separable microcanonical correlations."""

from .chsh import ChshSetting, Convention, Reading
from .fock import Configuration, SectorBasis, SectorSpec, Shell, Statistics, dimension, entropy, enumerate_basis
from .hilbert import BipartiteSpace, PureState, SeedSpec, make_space, sample_uniform_state
from .observables import DiagonalObservable, TwoLevelObservable, correlation, mode_parity_observable

__all__ = [
    "BipartiteSpace",
    "ChshSetting",
    "Configuration",
    "Convention",
    "DiagonalObservable",
    "PureState",
    "Reading",
    "SectorBasis",
    "SectorSpec",
    "SeedSpec",
    "Shell",
    "Statistics",
    "TwoLevelObservable",
    "correlation",
    "dimension",
    "entropy",
    "enumerate_basis",
    "make_space",
    "mode_parity_observable",
    "sample_uniform_state",
]
