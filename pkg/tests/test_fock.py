import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typsep.errors import CapacityError, CountOverflowError, EmptySectorError
from typsep import fock
from typsep.fock import Configuration, SectorSpec, Shell, Statistics, dimension, entropy, enumerate_basis, staircase_map


def brute_force(stats, n, m, shell="exact"):
    """Every sorted N-tuple of levels 0..M obeying the sector constraint, in lexicographic order."""
    combos = itertools.combinations if stats == "fermi" else itertools.combinations_with_replacement
    keep = (lambda s: s == m) if shell == "exact" else (lambda s: s < m)
    return [c for c in combos(range(m + 1), n) if keep(sum(c))]


@pytest.mark.parametrize(
    "spec, expected",
    [
        (SectorSpec("bose", 1, 7), [(7,)]),
        (SectorSpec("bose", 2, 2), [(0, 2), (1, 1)]),
        (SectorSpec("fermi", 2, 3), [(0, 3), (1, 2)]),
        (SectorSpec("fermi", 5, 9), []),
    ],
)
def test_enumerate_examples(spec, expected):
    basis = enumerate_basis(spec)
    assert [c.parts for c in basis] == expected
    assert basis.dim == len(expected)


@pytest.mark.parametrize("m", [0, 3, 11, 40])
def test_single_particle_dimension_is_one(m):
    assert dimension(SectorSpec("bose", 1, m)) == 1


def test_reference_dimensions():
    assert dimension(SectorSpec("bose", 2, 6)) == 4
    assert dimension(SectorSpec("bose", 5, 30)) == 674
    assert dimension(SectorSpec("fermi", 5, 40)) == 674


def test_bose_5_10_against_brute_force():
    assert len(brute_force("bose", 5, 10)) == 30
    assert dimension(SectorSpec("bose", 5, 10)) == 30


@pytest.mark.parametrize("stats", ["bose", "fermi"])
@pytest.mark.parametrize("shell", ["exact", "below"])
@pytest.mark.parametrize("n, m", [(1, 5), (2, 7), (3, 9), (4, 12), (5, 14)])
def test_enumeration_matches_brute_force(stats, shell, n, m):
    basis = enumerate_basis(SectorSpec(stats, n, m, shell))
    assert [c.parts for c in basis] == brute_force(stats, n, m, shell)


def test_two_particle_closed_form():
    for m in range(101):
        expected = m // 2 + 1 if m % 2 == 0 else (m + 1) // 2
        assert dimension(SectorSpec("bose", 2, m)) == expected


def test_fermi_below_ground_is_empty():
    assert dimension(SectorSpec("fermi", 4, 5)) == 0
    assert dimension(SectorSpec("fermi", 4, 6)) == 1


@pytest.mark.parametrize("n", range(1, 7))
def test_staircase_dimension_identity(n):
    shift = n * (n - 1) // 2
    for m in range(41):
        want = dimension(SectorSpec("bose", n, m - shift)) if m >= shift else 0
        assert dimension(SectorSpec("fermi", n, m)) == want


def test_staircase_examples():
    assert staircase_map(Configuration((0, 1, 2, 3, 4))).parts == (0, 0, 0, 0, 0)
    assert staircase_map(Configuration((1, 2, 4))).parts == (1, 1, 2)
    assert Configuration((1, 1, 2)) in set(enumerate_basis(SectorSpec("bose", 3, 4)))


def test_staircase_bijection_n4_m15():
    image = {staircase_map(c) for c in enumerate_basis(SectorSpec("fermi", 4, 15))}
    bose = set(enumerate_basis(SectorSpec("bose", 4, 9)))
    assert image == bose
    assert len(image) == len(enumerate_basis(SectorSpec("fermi", 4, 15)))


def test_staircase_rejects_non_strict():
    with pytest.raises(ValueError):
        staircase_map(Configuration((0, 1, 1)))


@given(n=st.integers(1, 5), m=st.integers(0, 25))
@settings(max_examples=60, deadline=None)
def test_staircase_maps_into_bose_sector(n, m):
    shift = n * (n - 1) // 2
    for c in enumerate_basis(SectorSpec("fermi", n, m)):
        image = staircase_map(c)
        assert image.quanta == m - shift
        assert image.particles == n


@given(stats=st.sampled_from(["bose", "fermi"]), n=st.integers(1, 5), m=st.integers(0, 24))
@settings(max_examples=80, deadline=None)
def test_below_shell_is_cumulative(stats, n, m):
    below = dimension(SectorSpec(stats, n, m, "below"))
    assert below == sum(dimension(SectorSpec(stats, n, k)) for k in range(m))


@given(stats=st.sampled_from(["bose", "fermi"]), n=st.integers(1, 5), m=st.integers(0, 22))
@settings(max_examples=60, deadline=None)
def test_basis_invariants(stats, n, m):
    basis = enumerate_basis(SectorSpec(stats, n, m))
    parts = [c.parts for c in basis]
    assert parts == sorted(set(parts))
    for c in basis:
        occ = c.occupations()
        assert sum(occ.values()) == n
        assert sum(k * v for k, v in occ.items()) == m
        if stats == "fermi":
            assert set(occ.values()) <= {1}
    for i, c in enumerate(basis):
        assert basis.index(c) == i


def test_entropy():
    assert entropy(SectorSpec("bose", 1, 5)) == 0.0
    assert entropy(SectorSpec("bose", 5, 30)) == pytest.approx(math.log(674), abs=1e-12)
    assert round(entropy(SectorSpec("bose", 5, 30)), 4) == 6.5132
    with pytest.raises(EmptySectorError):
        entropy(SectorSpec("fermi", 5, 9))


def test_entropy_monotone_in_quanta():
    values = [entropy(SectorSpec("bose", 5, m)) for m in range(31)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_log_dimension_tracks_sqrt_quanta():
    ratios = [math.log(dimension(SectorSpec("bose", 5, m))) / math.sqrt(m) for m in (10, 15, 20, 25, 30)]
    median = sorted(ratios)[2]
    assert all(abs(r - median) / median < 0.25 for r in ratios)


def test_spec_validation():
    with pytest.raises(ValueError):
        SectorSpec("bose", 0, 3)
    with pytest.raises(ValueError):
        SectorSpec("bose", 2, -1)
    with pytest.raises(ValueError):
        SectorSpec("anyon", 2, 1)
    assert SectorSpec("fermi", 5, 10).ground_quanta == 10
    assert SectorSpec("bose", 5, 10).statistics is Statistics.BOSE
    assert SectorSpec("bose", 5, 10, "below").shell is Shell.BELOW


def test_capacity_limit():
    with pytest.raises(CapacityError):
        enumerate_basis(SectorSpec("bose", 5, 30), limit=100)


def test_count_overflow(monkeypatch):
    monkeypatch.setattr(fock, "INT64_MAX", 500)
    fock._bose_count.cache_clear()
    try:
        with pytest.raises(CountOverflowError):
            dimension(SectorSpec("bose", 5, 30))
    finally:
        fock._bose_count.cache_clear()


def test_configuration_views():
    c = Configuration((0, 0, 2, 5))
    assert c.occupations() == {0: 2, 2: 1, 5: 1}
    assert c.occupation(0) == 2 and c.occupation(3) == 0
    assert not c.is_fermionic()
    with pytest.raises(ValueError):
        Configuration((2, 1))
