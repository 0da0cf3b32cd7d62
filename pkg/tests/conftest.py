"""Shared fixtures: parameter sets and prebuilt arenas.

Arenas are session-scoped; they are append-only and every derived
quantity is cached per arena, so sharing them across tests only warms
caches and never changes results.
"""
from fractions import Fraction

import pytest

from bdmt.params import Params
from bdmt.arena import build_arena
from bdmt.cli import RELAXED_FAMILIES


def pytest_configure(config):
    try:
        from hypothesis import settings

        settings.register_profile("bdmt", derandomize=True, max_examples=60,
                                  deadline=None)
        settings.load_profile("bdmt")
    except ImportError:
        pass


@pytest.fixture(scope="session")
def p_official5():
    return Params.official(5)


@pytest.fixture(scope="session")
def arena4(p_official5):
    # complete four levels: 1 + 4 + 30 + 520 nodes
    return build_arena(p_official5, 4)


@pytest.fixture(scope="session")
def arena5(p_official5):
    return build_arena(p_official5, 5, level_cap=100000)


@pytest.fixture(scope="session")
def p_relaxed():
    return Params(RELAXED_FAMILIES)


@pytest.fixture(scope="session")
def relaxed_arena(p_relaxed):
    return build_arena(p_relaxed, 8, level_cap=2500, strict_cap=False)


# One weight family per rank so nodes of any weight <= 17 exist at any
# height; flat widths n_j = 2 keep extension ages at most 2.
TALL_FAMILIES = [(2 ** (k + 1), 2) for k in range(1, 18)]


def build_comparability_instance(shift: int = 0):
    """A node whose chain straddles the middle block of a three-block
    sequence: window [1, 6] carries ranks 2 and 5, window [8+shift, 14+shift]
    carries ranks 8+shift and 13+shift, so a block supported on ranks
    {5, 8+shift} straddles both windows.

    Returns (arena, gamma, ids, js)."""
    p = Params(TALL_FAMILIES)
    s = shift
    a = build_arena(p, 15 + s, level_cap=40, strict_cap=False)
    A = a.insert_node(2, None, 2, 1, 1)
    B = a.insert_node(5, None, 4, 1, 1)
    Cn = a.insert_node(8 + s, None, 4, 1, 1)
    T = a.insert_node(10 + s, None, 1, 1, 1)
    D = a.insert_node(13 + s, None, 9 + s, 1, T.id)
    eta1 = a.insert_node(6, A.id, 2, 1, B.id)
    xi1 = a.insert_node(7, None, 2, 1, eta1.id)
    betac = a.insert_node(9 + s, None, 1, 1, Cn.id)
    eta2 = a.insert_node(14 + s, betac.id, 1, 1, D.id)
    gamma = a.insert_node(15 + s, xi1.id, 2, 1, eta2.id)
    ids = dict(A=A.id, B=B.id, C=Cn.id, T=T.id, D=D.id, eta1=eta1.id,
               xi1=xi1.id, betac=betac.id, eta2=eta2.id, gamma=gamma.id)
    return a, gamma, ids, (2, 4, 9 + s)


def comparability_blocks(ids, cB=Fraction(1), cC=Fraction(1),
                         scale=Fraction(1), eps=1):
    from bdmt.params import FinVector

    t = scale * eps
    return [
        FinVector({ids["A"]: t}),
        FinVector({ids["B"]: t * cB, ids["C"]: t * cC}),
        FinVector({ids["D"]: t}),
    ]


@pytest.fixture(scope="session")
def comp_instance():
    return build_comparability_instance(0)
