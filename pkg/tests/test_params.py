"""Parameter families, exact vectors, intervals, and growth validation."""
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bdmt.params import (
    FinFunctional,
    FinVector,
    IndexInterval,
    ParameterHorizonError,
    Params,
    project_interval,
    rat_from_str,
    rat_to_str,
    validate_params,
)


def test_official_base_family():
    p = Params.official(1)
    assert p.families == ((4, 4),)


def test_official_second_family_is_the_exact_threshold():
    # m_2 = 4^2 = 16 and n_2 = 16^2 * (4*4)^log2(16) = 256 * 65536
    p = Params.official(2)
    assert p.families == ((4, 4), (16, 16777216))


def test_official_growth_validates_at_every_step():
    report = validate_params(Params.official(4))
    assert report.base_ok
    assert report.all_ok
    assert [s.j for s in report.steps] == [1, 2, 3]


def test_single_family_growth_is_vacuous():
    report = validate_params(Params([(4, 4)]))
    assert report.base_ok
    assert report.all_ok
    assert len(report.steps) == 0


def test_small_families_fail_base_and_width():
    report = validate_params(Params([(2, 3), (4, 4)]))
    assert not report.base_ok
    assert not report.steps[0].width_ok
    assert not report.all_ok


def test_m_must_increase_strictly():
    with pytest.raises(ValueError):
        Params([(4, 4), (4, 5)])


def test_family_lookup_beyond_horizon_fails():
    p = Params([(4, 4)])
    assert p.m(1) == 4 and p.n(1) == 4
    with pytest.raises(ParameterHorizonError):
        p.m(2)
    with pytest.raises(ParameterHorizonError):
        p.n(2)


def test_vector_drops_zero_coordinates():
    x = FinVector({1: Fraction(0), 2: Fraction(1, 2)})
    assert x.coords == {2: Fraction(1, 2)}
    assert not x.is_zero
    assert FinVector({}).is_zero


def test_vector_arithmetic_is_exact():
    x = FinVector({1: Fraction(1, 3), 2: Fraction(1)})
    y = FinVector({1: Fraction(-1, 3), 3: Fraction(2)})
    s = x + y
    assert s.coords == {2: Fraction(1), 3: Fraction(2)}
    assert x.scale(Fraction(3)).coords == {1: Fraction(1), 2: Fraction(3)}
    assert FinFunctional({2: Fraction(5)}).dot(x) == Fraction(5)


def test_interval_validation():
    assert IndexInterval(1, 1).lo == 1
    with pytest.raises(ValueError):
        IndexInterval(0, 3)
    with pytest.raises(ValueError):
        IndexInterval(4, 3)


def test_interval_intersection():
    assert IndexInterval(1, 5).intersect(IndexInterval(3, 9)) == IndexInterval(3, 5)
    assert IndexInterval(1, 2).intersect(IndexInterval(4, 5)) is None


def test_projection_examples():
    x = FinVector({1: Fraction(1), 5: Fraction(1, 2)})
    assert project_interval(x, IndexInterval(1, 3)).coords == {1: Fraction(1)}
    y = FinVector({2: Fraction(1)})
    assert project_interval(y, IndexInterval(2, 2)).coords == y.coords
    assert project_interval(FinVector({1: Fraction(1)}),
                            IndexInterval(5, 9)).is_zero


_coords = st.dictionaries(
    st.integers(min_value=1, max_value=12),
    st.fractions(min_value=-4, max_value=4, max_denominator=8),
    max_size=6,
)
_intervals = st.tuples(
    st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=6)
).map(lambda t: IndexInterval(t[0], t[0] + t[1]))


@given(_coords, _intervals)
def test_projection_is_idempotent(coords, e):
    x = FinVector(coords)
    once = project_interval(x, e)
    assert project_interval(once, e).coords == once.coords


@given(_coords, _coords, _intervals,
       st.fractions(min_value=-3, max_value=3, max_denominator=6))
def test_projection_is_linear(c1, c2, e, t):
    x, y = FinVector(c1), FinVector(c2)
    lhs = project_interval(x + y.scale(t), e)
    rhs = project_interval(x, e) + project_interval(y, e).scale(t)
    assert lhs.coords == rhs.coords


@given(_coords, _intervals)
def test_projection_splits_over_adjacent_halves(coords, e):
    if e.lo == e.hi:
        return
    mid = (e.lo + e.hi) // 2
    left, right = IndexInterval(e.lo, mid), IndexInterval(mid + 1, e.hi)
    x = FinVector(coords)
    combined = project_interval(x, left) + project_interval(x, right)
    assert combined.coords == project_interval(x, e).coords


def test_rational_string_round_trip():
    assert rat_to_str(Fraction(3, 7)) == "3/7"
    assert rat_to_str(Fraction(-2)) == "-2/1"
    assert rat_from_str("3/7") == Fraction(3, 7)
    assert rat_from_str("-5") == Fraction(-5)


@given(st.fractions(max_denominator=10 ** 6))
def test_rational_round_trip_holds_everywhere(v):
    assert rat_from_str(rat_to_str(v)) == v
