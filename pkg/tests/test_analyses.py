"""Evaluation analyses, windowed analysis trees, comparability, and the
rank-budget node approximation."""
import random
from fractions import Fraction

import pytest

from bdmt.params import FinFunctional, FinVector, IndexInterval
from bdmt.arena import dstar_ecoords, estar_dcoords, project_rank
from bdmt.analyses import (
    AnalysisError,
    ApproximationError,
    abs_bd_part,
    action_range,
    action_support,
    approximate_node,
    box_distance_upto,
    chain_nodes,
    covering_index,
    evaluation_analysis,
    i_analysis,
    is_comparable,
    is_indecomposable,
    node_from_analysis,
    restrict_tree,
    split_parts,
    tree_analysis,
    trees_equal,
)


def d(gid):
    return FinVector({gid: Fraction(1)})


# node 42 is the first age-2 node of rank 4: base is node 2 (rank 2,
# weight 1, sign -1, target 1) and the top step targets node 6 (rank 3)
AGE2 = 42


def test_chain_of_an_age_two_node(arena5):
    chain = chain_nodes(AGE2, arena5)
    assert [n.id for n in chain] == [2, AGE2]
    assert [n.rank for n in chain] == [2, 4]


def test_chain_of_the_primitive_node_fails(arena5):
    with pytest.raises(AnalysisError):
        chain_nodes(1, arena5)


def test_analysis_of_an_age_two_node(arena5):
    an = evaluation_analysis(AGE2, arena5)
    assert an.j == 1 and an.age == 2
    assert [(e.interval.lo, e.interval.hi, e.sign, e.eta, e.xi)
            for e in an.entries] == [(1, 1, -1, 1, 2), (3, 3, -1, 6, AGE2)]


def test_analysis_invariants_hold_on_four_levels(arena4):
    for node in arena4.gamma_upto(4):
        if node.is_primitive:
            continue
        an = evaluation_analysis(node, arena4)
        assert an.age == node.age
        assert an.j == node.weight_j
        assert an.entries[0].interval.lo == 1
        assert an.entries[-1].xi == node.id
        assert an.entries[-1].interval.hi == node.rank - 1
        for prev, cur in zip(an.entries, an.entries[1:]):
            # chain ranks sit in the one-rank gaps between windows
            assert cur.interval.lo == prev.interval.hi + 2
        for e in an.entries:
            assert e.interval.lo <= arena4.rank_of(e.eta) <= e.interval.hi


def test_analysis_reconstructs_the_functional(arena4):
    for node in arena4.gamma_upto(4):
        if node.is_primitive:
            continue
        an = evaluation_analysis(node, arena4)
        m = arena4.params.m(an.j)
        recon = FinVector()
        for e in an.entries:
            recon = recon + FinVector({e.xi: Fraction(1)})
            window = project_rank(
                estar_dcoords(e.eta, arena4), e.interval.lo - 1,
                e.interval.hi, arena4)
            recon = recon + window.scale(Fraction(e.sign, m))
        assert recon == estar_dcoords(node, arena4)


def test_split_parts_recover_the_unit(arena4):
    rng = random.Random(31)
    ids = [n.id for n in arena4.gamma_upto(4) if not n.is_primitive]
    for gid in rng.sample(ids, 40):
        bd, mt = split_parts(gid, arena4)
        assert (bd + mt).coords == {gid: Fraction(1)}


def test_split_parts_of_a_rank_two_node(arena5):
    plus = next(n for n in arena5.level(2)
                if n.weight_j == 1 and n.sign == 1)
    bd, mt = split_parts(plus, arena5)
    assert bd.coords == dstar_ecoords(plus, arena5).coords
    assert mt.coords == {1: Fraction(1, 4)}


def test_node_from_analysis_round_trips(arena4):
    rng = random.Random(47)
    ids = [n.id for n in arena4.gamma_upto(4) if not n.is_primitive]
    for gid in rng.sample(ids, 40):
        an = evaluation_analysis(gid, arena4)
        rebuilt = node_from_analysis(
            [(e.interval, e.sign, e.eta) for e in an.entries], an.j, arena4)
        assert rebuilt.id == gid


def test_node_from_analysis_rejects_bad_shapes(arena4):
    with pytest.raises(AnalysisError):
        node_from_analysis([], 1, arena4)
    too_many = [(IndexInterval(2 * k + 1, 2 * k + 1), 1, 1)
                for k in range(5)]  # width n_1 = 4
    with pytest.raises(AnalysisError):
        node_from_analysis(too_many, 1, arena4)
    gap = [(IndexInterval(1, 1), -1, 1), (IndexInterval(4, 4), -1, 6)]
    with pytest.raises(AnalysisError):
        node_from_analysis(gap, 1, arena4)
    outside = [(IndexInterval(1, 2), -1, 6)]  # node 6 has rank 3
    with pytest.raises(AnalysisError):
        node_from_analysis(outside, 1, arena4)


def test_action_support_examples(arena5):
    assert action_support(1, IndexInterval(1, 1), arena5) == [1]
    # e*_6 = d*_6 - (1/4) d*_1, so it acts at ranks 1 and 3 only
    assert action_support(6, IndexInterval(1, 2), arena5) == [1]
    assert action_range(6, IndexInterval(2, 2), arena5) is None
    r = action_range(6, IndexInterval(1, 3), arena5)
    assert (r.lo, r.hi) == (1, 3)


def test_i_analysis_clips_windows(arena5):
    full = i_analysis(AGE2, IndexInterval(1, 4), arena5)
    assert len(full) == 2
    tail = i_analysis(AGE2, IndexInterval(3, 4), arena5)
    assert len(tail) == 1
    assert (tail[0].interval.lo, tail[0].interval.hi) == (3, 3)
    assert tail[0].eta == 6
    assert i_analysis(AGE2, IndexInterval(2, 2), arena5) == []


def test_indecomposable_on_the_chain_gap(arena5):
    assert is_indecomposable(AGE2, IndexInterval(2, 2), arena5)
    assert not is_indecomposable(AGE2, IndexInterval(3, 4), arena5)


def test_tree_of_the_age_two_node(arena5):
    tree = tree_analysis(AGE2, arena5)
    assert tree.positions() == [(), (1,), (2,)]
    root = tree.root
    assert root.eta == AGE2
    assert (root.interval.lo, root.interval.hi) == (1, 4)
    first, second = root.children
    assert (first.eta, first.interval.lo, first.interval.hi) == (1, 1, 1)
    assert first.is_terminal
    # the rank-3 target keeps no window below its own chain, so it ends
    assert (second.eta, second.interval.lo, second.interval.hi) == (6, 3, 3)
    assert second.is_terminal
    js = tree.to_json()
    assert js["gamma"] == AGE2
    assert len(js["root"]["children"]) == 2


def test_tree_windows_are_laminar(arena4):
    rng = random.Random(13)
    ids = [n.id for n in arena4.gamma_upto(4) if not n.is_primitive]
    for gid in rng.sample(ids, 30):
        tree = tree_analysis(gid, arena4)
        for t in tree.iter_nodes():
            for c in t.children:
                assert t.interval.contains_interval(c.interval)
            for left, right in zip(t.children, t.children[1:]):
                assert left.interval.hi < right.interval.lo


def test_subtree_matches_restricted_analysis(arena4):
    tree = tree_analysis(AGE2, arena4)
    sub = tree.find((2,))
    again = restrict_tree(tree_analysis(sub.eta, arena4),
                          sub.interval, arena4)
    assert [(c.eta, c.interval, c.sign) for c in sub.children] == \
        [(c.eta, c.interval, c.sign) for c in again.root.children]


def test_restrict_tree_agrees_with_direct_analysis(arena4):
    rng = random.Random(17)
    ids = [n.id for n in arena4.gamma_upto(4) if not n.is_primitive]
    for gid in rng.sample(ids, 20):
        tree = tree_analysis(gid, arena4)
        window = IndexInterval(2, 3)
        cut = restrict_tree(tree, window, arena4)
        direct = tree_analysis(gid, arena4, interval=window)
        assert trees_equal(cut, direct)


def test_restrict_tree_misses_return_none(arena4):
    tree = tree_analysis(AGE2, arena4)
    assert restrict_tree(tree, IndexInterval(9, 12), arena4) is None


def test_covering_index_descends_to_the_acting_leaf(arena5):
    tree = tree_analysis(AGE2, arena5)
    assert covering_index(tree, d(1)).pos == (1,)
    assert covering_index(tree, d(AGE2)).pos == ()
    with pytest.raises(AnalysisError):
        covering_index(tree, FinVector({}))


def test_is_comparable_examples(arena5):
    assert is_comparable(AGE2, [d(1)], arena5) == (True, None)
    with pytest.raises(ValueError):
        is_comparable(AGE2, [], arena5)
    with pytest.raises(ValueError):
        is_comparable(AGE2, [d(6), d(2)], arena5)  # ranks out of order
    with pytest.raises(ValueError):
        is_comparable(AGE2, [FinVector({})], arena5)


def test_box_distance_examples(arena5):
    minus = next(n for n in arena5.level(2)
                 if n.weight_j == 1 and n.sign == -1)
    plus = next(n for n in arena5.level(2)
                if n.weight_j == 1 and n.sign == 1)
    assert box_distance_upto(plus, plus, 5, arena5) == 0
    # expansions differ by 2 units at rank 2 and 1/2 at rank 1
    assert box_distance_upto(minus, plus, 1, arena5) == Fraction(1, 2)
    assert box_distance_upto(minus, plus, 2, arena5) == Fraction(5, 2)


def test_approximate_node_returns_small_nodes_unchanged(arena5):
    out = approximate_node(AGE2, 1, 4, 1, arena5)
    assert out.id == AGE2


def test_approximate_node_checks_preconditions(arena5):
    with pytest.raises(ValueError):
        approximate_node(AGE2, 1, 4, 0, arena5)
    with pytest.raises(ValueError):
        approximate_node(AGE2, 2, 4, 1, arena5)  # min rng e* is 1


def test_approximate_node_meets_the_box_bound(arena5):
    rng = random.Random(91)
    pairs = [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (4, 1)]
    pool = [n.id for n in arena5.level(4)] + \
        [n.id for n in arena5.level(5)[:4000]]
    hits = 0
    for k in range(30):
        gid = rng.choice(pool)
        n_cut, i = pairs[k % len(pairs)]
        if arena5.rank_of(gid) <= n_cut + i:
            continue
        try:
            out = approximate_node(gid, 1, n_cut, i, arena5)
        except ApproximationError:
            continue
        hits += 1
        assert out.rank <= n_cut + i
        assert box_distance_upto(gid, out, n_cut, arena5) <= \
            Fraction(1, 4 ** i)
    assert hits >= 10


def test_abs_bd_part_counts_chain_mass(arena5):
    tree = tree_analysis(AGE2, arena5)
    nodes = list(tree.iter_nodes())
    # node 2 is the only chain id of the tree met by d_2
    assert abs_bd_part(nodes, d(2), arena5) == 1
    assert abs_bd_part(nodes, d(1), arena5) == 0
