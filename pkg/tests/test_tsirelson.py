"""Norming-set trees, the interval-DP norm, and the brute-force oracle."""
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bdmt.params import FinVector, Params
from bdmt.tsirelson import (
    SupportCapError,
    WLeaf,
    WNode,
    basis_average,
    brute_force_norm,
    eval_functional,
    t_norm,
    t_norm_witness,
    validate_w_tree,
    wtree_from_json,
    wtree_to_json,
)

P23 = Params([(2, 3)])
P44 = Params([(4, 4)])
P_MIXED = Params([(2, 2), (4, 3)])


def test_single_leaf_is_a_coordinate_functional():
    f = validate_w_tree(WLeaf(1, 3), P44)
    assert f.coords == {3: Fraction(1)}


def test_weighted_node_divides_by_m():
    t = WNode(1, [WLeaf(1, k) for k in (1, 2, 3, 4)])
    f = validate_w_tree(t, P44)
    assert f.coords == {k: Fraction(1, 4) for k in (1, 2, 3, 4)}


def test_width_cap_is_reported():
    t = WNode(1, [WLeaf(1, k) for k in (1, 2, 3, 4, 5)])
    violations = validate_w_tree(t, P44)
    assert isinstance(violations, list)
    assert any("width cap" in v for v in violations)


def test_children_must_form_successive_blocks():
    t = WNode(1, [WLeaf(1, 3), WLeaf(1, 2)])
    violations = validate_w_tree(t, P44)
    assert isinstance(violations, list) and violations


def test_eval_functional_examples():
    f = validate_w_tree(WLeaf(1, 2), P44)
    assert eval_functional(f, FinVector({2: Fraction(3, 4)})) == Fraction(3, 4)
    avg = validate_w_tree(WNode(1, [WLeaf(1, k) for k in (1, 2, 3, 4)]), P44)
    ones = FinVector({k: Fraction(1) for k in (1, 2, 3, 4)})
    assert eval_functional(avg, ones) == Fraction(1)
    assert eval_functional(f, FinVector({9: Fraction(1)})) == 0


def test_norm_of_a_unit_vector_is_one():
    for p in (P23, P44, P_MIXED):
        assert t_norm(FinVector({7: Fraction(1)}), p) == 1


def test_norm_of_five_ones_on_the_narrow_family():
    # best: weight 1/2 over parts (1..3), (4), (5); the inner part is
    # itself worth 3/2, so the total is (3/2 + 1 + 1) / 2 = 7/4
    x = FinVector({k: Fraction(1) for k in range(1, 6)})
    assert t_norm(x, P23) == Fraction(7, 4)
    assert brute_force_norm(x, P23) == Fraction(7, 4)


def test_norm_of_the_zero_vector_is_zero():
    assert t_norm(FinVector({}), P44) == 0
    assert brute_force_norm(FinVector({}), P44) == 0


def test_flat_half_pair_is_normed_by_a_single_leaf():
    x = FinVector({1: Fraction(1, 2), 2: Fraction(1, 2)})
    assert t_norm(x, P44) == Fraction(1, 2)
    assert brute_force_norm(x, P44) == Fraction(1, 2)


def test_four_ones_have_norm_one_at_the_official_base():
    p = Params.official(2)
    x = FinVector({k: Fraction(1) for k in (1, 2, 3, 4)})
    assert t_norm(x, p) == 1


def test_witness_of_a_unit_vector_is_its_leaf():
    w = t_norm_witness(FinVector({3: Fraction(1)}), P44)
    assert isinstance(w, WLeaf) and w.index == 3 and w.sign == 1


def test_witness_signs_follow_the_coordinates():
    w = t_norm_witness(FinVector({3: Fraction(-2)}), P44)
    assert isinstance(w, WLeaf) and w.sign == -1


def test_witness_of_five_ones_backtracks_the_partition():
    x = FinVector({k: Fraction(1) for k in range(1, 6)})
    w = t_norm_witness(x, P23)
    assert isinstance(w, WNode) and w.j == 1 and len(w.children) == 3
    inner = w.children[0]
    assert isinstance(inner, WNode) and [c.index for c in inner.children] == [1, 2, 3]
    assert [c.index for c in w.children[1:]] == [4, 5]


def test_basis_average_examples():
    avg = basis_average(1, (1, 2, 3, 4), P44)
    assert avg.coords == {k: Fraction(1) for k in (1, 2, 3, 4)}
    spread = basis_average(1, (2, 5, 9, 11), P44)
    assert spread.coords == {k: Fraction(1) for k in (2, 5, 9, 11)}
    with pytest.raises(ValueError):
        basis_average(1, (1, 2, 3), P44)


def test_basis_average_norm_is_at_least_one():
    for p in (P23, P44, P_MIXED, Params.official(2)):
        ks = tuple(range(2, 2 + p.n(1)))
        if len(ks) > 7:
            continue
        assert t_norm(basis_average(1, ks, p), p) >= 1


def test_brute_force_support_cap():
    x = FinVector({k: Fraction(1) for k in range(1, 9)})
    with pytest.raises(SupportCapError):
        brute_force_norm(x, P44)


def test_wtree_json_round_trip():
    t = WNode(1, [WNode(1, [WLeaf(1, 1), WLeaf(-1, 2)]), WLeaf(1, 5)])
    data = wtree_to_json(t)
    assert data == {"j": 1, "children": [
        {"j": 1, "children": [{"sign": 1, "index": 1}, {"sign": -1, "index": 2}]},
        {"sign": 1, "index": 5},
    ]}
    back = wtree_from_json(data)
    assert wtree_to_json(back) == data


_PALETTE = [Fraction(2), Fraction(-2), Fraction(1), Fraction(-1),
            Fraction(1, 2), Fraction(-1, 2)]


def _random_vector(rng, max_support=5, index_range=12):
    support = rng.sample(range(1, index_range + 1), rng.randint(1, max_support))
    return FinVector({k: rng.choice(_PALETTE) for k in support})


@pytest.mark.parametrize("p", [P23, P44, P_MIXED], ids=["2-3", "4-4", "mixed"])
def test_dp_matches_the_oracle_on_seeded_vectors(p):
    rng = random.Random(1803)
    for _ in range(40):
        x = _random_vector(rng)
        assert t_norm(x, p) == brute_force_norm(x, p)


def test_witness_value_matches_and_validates():
    rng = random.Random(91)
    for _ in range(25):
        x = _random_vector(rng, max_support=4)
        w = t_norm_witness(x, P_MIXED)
        f = validate_w_tree(w, P_MIXED)
        assert not isinstance(f, list)
        assert eval_functional(f, x) == t_norm(x, P_MIXED)


@given(st.dictionaries(st.integers(min_value=1, max_value=9),
                       st.sampled_from(_PALETTE), min_size=1, max_size=4),
       st.sets(st.integers(min_value=1, max_value=9), max_size=4))
def test_sign_flips_never_change_the_norm(coords, flips):
    x = FinVector(coords)
    flipped = FinVector({k: -v if k in flips else v for k, v in coords.items()})
    assert t_norm(x, P_MIXED) == t_norm(flipped, P_MIXED)


@given(st.dictionaries(st.integers(min_value=1, max_value=9),
                       st.sampled_from(_PALETTE), min_size=2, max_size=4))
def test_zeroing_a_coordinate_never_increases_the_norm(coords):
    x = FinVector(coords)
    full = t_norm(x, P_MIXED)
    drop = min(coords)
    smaller = FinVector({k: v for k, v in coords.items() if k != drop})
    assert t_norm(smaller, P_MIXED) <= full
