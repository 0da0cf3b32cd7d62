"""Node levels, the dual system, rank projections, and norm enclosures."""
import random
from fractions import Fraction

import pytest

from bdmt.params import FinFunctional, FinVector, Params, ParameterHorizonError
from bdmt.arena import (
    ArenaHorizonError,
    TruncatedArenaError,
    bd_norm_enclosure,
    bd_norm_truncated,
    build_arena,
    c_star,
    check_biorthogonality,
    dstar_ecoords,
    dual_system,
    estar_dcoords,
    eval_node,
    export_arena,
    import_arena,
    project_rank,
    project_rank_dual,
    rng_estar,
    rng_vector,
)


def d(gid):
    return FinVector({gid: Fraction(1)})


def test_level_sizes_match_the_recursion(arena5):
    assert [len(arena5.level(q)) for q in range(1, 6)] == [1, 4, 30, 520, 41150]
    assert arena5.size == 41705


def test_level_two_enumerates_signed_weighted_targets(arena5):
    lvl = arena5.level(2)
    tuples = {(n.weight_j, n.sign, n.target) for n in lvl}
    assert tuples == {(1, 1, 1), (1, -1, 1), (2, 1, 1), (2, -1, 1)}
    assert all(n.age == 1 and n.base is None for n in lvl)


def test_extension_nodes_remember_their_base(arena5):
    ext = [n for n in arena5.level(4) if n.age == 2]
    # 4 rank-2 bases x 2 signs x 30 rank-3 targets beyond the base
    assert len(ext) == 240
    for n in ext[::24]:
        b = arena5.node(n.base)
        assert b.weight_j == n.weight_j
        assert b.rank == 2
        assert arena5.node(n.target).rank == 3


def test_ids_ascend_with_rank(arena5):
    ranks = [n.rank for n in arena5.gamma_upto(5)]
    assert ranks == sorted(ranks)
    assert arena5.rank_of(1) == 1
    assert arena5.rank_of(2) == 2


def test_require_rank_and_horizon(arena4):
    arena4.require_rank(4)
    with pytest.raises(ArenaHorizonError):
        arena4.require_rank(5)
    with pytest.raises(KeyError):
        arena4.node(10 ** 9)


def test_level_cap_marks_truncation():
    p = Params.official(5)
    a = build_arena(p, 4, level_cap=10, strict_cap=False)
    assert a.truncated_levels
    assert not a.model_complete
    with pytest.raises(TruncatedArenaError):
        a.require_complete(4)


def test_insert_node_finds_the_canonical_copy(arena4):
    n = arena4.level(2)[0]
    again = arena4.insert_node(n.rank, n.base, n.weight_j, n.sign, n.target)
    assert again.id == n.id


def test_insert_node_validates_the_recursion(relaxed_arena):
    a = relaxed_arena
    with pytest.raises(ValueError):
        a.insert_node(2, None, 2, 3, 1)  # sign must be +-1
    with pytest.raises(ParameterHorizonError):
        a.insert_node(2, None, 99, 1, 1)
    with pytest.raises(ValueError):
        a.insert_node(2, None, 3, 1, 1)  # age-1 weight beyond its rank
    b = a.insert_node(2, None, 2, 1, 1)  # finds the canonical copy
    with pytest.raises(ValueError):
        a.insert_node(3, b.id, 2, 1, 1)  # base must sit two ranks below
    with pytest.raises(ValueError):
        a.insert_node(4, b.id, 1, 1, 3)  # extension must keep the weight
    with pytest.raises(ValueError):
        a.insert_node(4, b.id, 2, 1, 1)  # target must outrank the base


def test_c_star_of_a_rank_two_node(arena5):
    plus = next(n for n in arena5.level(2) if n.weight_j == 1 and n.sign == 1)
    minus = next(n for n in arena5.level(2) if n.weight_j == 1 and n.sign == -1)
    assert c_star(plus, arena5).coords == {1: Fraction(1, 4)}
    assert c_star(minus, arena5).coords == {1: Fraction(-1, 4)}


def test_dual_vectors_of_low_ranks(arena5):
    plus = next(n for n in arena5.level(2) if n.weight_j == 1 and n.sign == 1)
    assert dstar_ecoords(1, arena5).coords == {1: Fraction(1)}
    assert dstar_ecoords(plus, arena5).coords == {
        plus.id: Fraction(1), 1: Fraction(-1, 4)}


def test_estar_splits_into_dstar_plus_cstar(arena4):
    for node in arena4.gamma_upto(3):
        unit = FinFunctional({node.id: Fraction(1)})
        total = dstar_ecoords(node, arena4) + c_star(node, arena4)
        assert total.coords == unit.coords


def test_biorthogonality_check_passes(arena4):
    ok, first_bad = check_biorthogonality(arena4, 4)
    assert ok and first_bad is None


def test_dual_system_is_biorthogonal_on_sampled_pairs(arena4):
    rows, d_vectors = dual_system(arena4, 3)
    ids = sorted(rows)
    rng = random.Random(7)
    for _ in range(60):
        g, h = rng.choice(ids), rng.choice(ids)
        value = rows[g].dot(d_vectors[h])
        assert value == (1 if g == h else 0)


def test_eval_node_examples(arena5):
    plus = next(n for n in arena5.level(2) if n.weight_j == 1 and n.sign == 1)
    assert eval_node(plus, d(1), arena5) == Fraction(1, 4)
    assert eval_node(plus, d(plus.id), arena5) == 1
    assert eval_node(1, d(1), arena5) == 1


def test_eval_node_is_linear(arena4):
    rng = random.Random(55)
    ids = [n.id for n in arena4.gamma_upto(4)]
    for _ in range(25):
        g = rng.choice(ids)
        x = FinVector({rng.choice(ids): Fraction(rng.randint(-4, 4), 2)
                       for _ in range(3)})
        y = FinVector({rng.choice(ids): Fraction(rng.randint(-4, 4), 3)
                       for _ in range(3)})
        assert eval_node(g, x + y, arena4) == \
            eval_node(g, x, arena4) + eval_node(g, y, arena4)


def test_project_rank_keeps_exact_rank_windows(arena4):
    g3 = arena4.level(3)[0].id
    assert project_rank(d(g3), 2, 5, arena4).coords == d(g3).coords
    assert project_rank(d(g3), 3, 5, arena4).is_zero
    f = FinFunctional({1: Fraction(1)})
    assert project_rank_dual(f, 0, 1, arena4).coords == f.coords


def test_rank_windows_of_functionals_start_at_one(arena4):
    # the first chain window of every node is pinned at rank 1
    for node in arena4.gamma_upto(4):
        assert rng_estar(node, arena4).lo == 1
        assert rng_estar(node, arena4).hi == node.rank


def test_rng_vector(arena4):
    g2 = arena4.level(2)[0].id
    g4 = arena4.level(4)[0].id
    r = rng_vector(FinVector({g2: Fraction(1), g4: Fraction(2)}), arena4)
    assert (r.lo, r.hi) == (2, 4)
    assert rng_vector(FinVector({}), arena4) is None


def test_truncated_norm_examples(arena5):
    assert bd_norm_truncated(d(1), arena5, 0) == 1
    assert bd_norm_truncated(d(1), arena5, 1) == 1
    assert bd_norm_truncated(FinVector({}), arena5, 0) == 0


def test_enclosure_examples(arena5):
    lo, hi = bd_norm_enclosure(d(1), arena5, 1)
    assert lo == 1 and hi == Fraction(4, 3)
    assert bd_norm_enclosure(FinVector({}), arena5, 1) == (0, 0)


def test_enclosure_brackets_the_truncated_scan(arena4):
    rng = random.Random(23)
    ids = [n.id for n in arena4.gamma_upto(2)]
    for _ in range(12):
        x = FinVector({rng.choice(ids): Fraction(rng.randint(-3, 3))
                       for _ in range(2)})
        lo, hi = bd_norm_enclosure(x, arena4)
        assert lo <= hi
        if not x.is_zero:
            assert lo == bd_norm_truncated(x, arena4, 0)


def test_export_import_round_trip(arena4):
    text = export_arena(arena4)
    back = import_arena(text, arena4.params)
    assert back.size == arena4.size
    for node in arena4.gamma_upto(4):
        m = back.node(node.id)
        assert (m.rank, m.base, m.weight_j, m.sign, m.target) == \
            (node.rank, node.base, node.weight_j, node.sign, node.target)


def test_import_rejects_broken_references(arena4):
    lines = export_arena(arena4).splitlines()
    mangled = "\n".join(lines[:1] + lines[2:])  # drop a referenced node
    with pytest.raises(ValueError):
        import_arena(mangled, arena4.params)
