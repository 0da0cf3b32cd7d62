"""Node arena, dual system, evaluations, and certified norm enclosures.

Levels are built by the recursion: level 1 holds the single primitive node;
level q+1 holds, for every family j <= q+1, every sign, and every target node
of rank <= q, an age-1 node; and for every base node of rank p in [1, q-1]
carrying weight 1/m_j with j <= p and age < n_j, every sign, and every target
of rank in (p, q], an extension node.  Ids are assigned in the canonical
order (j, sign, target id, base id) with age-1 nodes keyed base id 0, so a
rebuild with the same parameters and caps reproduces ids exactly.

The dual system attaches to each node two expansions kept by two independent
forward recursions: the evaluation functional in d*-coordinates

    e*_g = unit_g + (1/m) * sign * e*_target              (age 1)
    e*_g = unit_g + e*_base
                  + (1/m) * sign * window(e*_target)      (extension),

where window keeps d*-coordinates at ranks in (rank base, rank g - 1], and
the biorthogonal functional in e*-coordinates

    d*_g = unit_g - (1/m) * sign * unit_target            (age 1)
    d*_g = unit_g - unit_base
                  - (1/m) * sign * (unit_target - low-rank part)  (extension),

with the low-rank part re-expanded through stored d*-rows.  Multiplying the
two triangular systems and comparing against the identity is therefore a real
consistency check, not a restatement of either recursion.

Coordinates of a vector x = sum a_g d_g live in the d-basis (BDVector); the
evaluation e*_g(x) is computed by direct recursion without materializing
functionals, so full-level scans stay cheap in memory.

Norm enclosure: with N the top rank of supp x, the scan over ranks <= N+k is
a certified lower bound L.  Any node of higher rank evaluates through chain
windows that are successive intervals, so at most one window straddles N;
recursing on the (strictly lower-rank) straddling target gives

    sup |e*_g(x)| <= L + (1/m_1) * (M + sup ...) ,

hence sup <= L + M/(m_1 - 1), where M is the max of |e*_g(P_I x)| over built
nodes g and rank intervals I inside [1, N].  Both bounds are exact rationals;
the gap is reported, never assumed attained.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union

from .params import (
    FinFunctional,
    FinVector,
    IndexInterval,
    ParameterHorizonError,
    Params,
)

# d-basis coordinates of a space element / e*-basis coordinates of a functional
BDVector = FinVector
DualCoords = FinFunctional


class ArenaHorizonError(Exception):
    """An operation needed levels beyond what the arena has built."""


class LevelBudgetError(Exception):
    """A strict level budget was exceeded during extension."""


class TruncatedArenaError(Exception):
    """A certified scan was requested on an arena with truncated levels."""


class Node:
    """One arena node: rank, optional base (extension), weight family, sign,
    optional target; age is 1 plus the base chain length."""

    __slots__ = ("id", "rank", "base", "weight_j", "sign", "target", "age")

    def __init__(
        self,
        id: int,
        rank: int,
        base: Optional[int],
        weight_j: Optional[int],
        sign: int,
        target: Optional[int],
        age: Optional[int],
    ):
        self.id = id
        self.rank = rank
        self.base = base
        self.weight_j = weight_j
        self.sign = sign
        self.target = target
        self.age = age

    @property
    def is_primitive(self) -> bool:
        return self.target is None

    def key(self) -> tuple:
        return (self.rank, self.base or 0, self.weight_j or 0, self.sign, self.target or 0)

    def __repr__(self) -> str:
        if self.is_primitive:
            return f"Node(id=1, rank=1, primitive)"
        return (
            f"Node(id={self.id}, rank={self.rank}, base={self.base}, "
            f"j={self.weight_j}, sign={self.sign:+d}, target={self.target}, age={self.age})"
        )


class GammaArena:
    """Append-only per-rank levels of nodes with cached dual expansions."""

    def __init__(self, params: Params):
        self.params = params
        primitive = Node(id=1, rank=1, base=None, weight_j=None, sign=1, target=None, age=None)
        self.nodes: list[Optional[Node]] = [None, primitive]  # ids are 1-based
        self.levels: list[list[Node]] = [[primitive]]
        self.lookup: dict[tuple, int] = {primitive.key(): 1}
        self.truncated_levels: set[int] = set()
        self._estar_cache: dict[int, FinVector] = {}
        self._dstar_cache: dict[int, FinFunctional] = {}

    # -- structure ----------------------------------------------------------

    @property
    def horizon(self) -> int:
        return len(self.levels)

    @property
    def model_complete(self) -> bool:
        return not self.truncated_levels

    @property
    def size(self) -> int:
        return len(self.nodes) - 1

    def node(self, gid: int) -> Node:
        if not 1 <= gid < len(self.nodes):
            raise KeyError(f"no node with id {gid}")
        return self.nodes[gid]

    def resolve(self, gamma: Union[int, Node]) -> Node:
        return gamma if isinstance(gamma, Node) else self.node(gamma)

    def level(self, rank: int) -> list[Node]:
        if not 1 <= rank <= self.horizon:
            raise ArenaHorizonError(f"rank {rank} beyond built horizon {self.horizon}")
        return self.levels[rank - 1]

    def gamma_upto(self, rank: int) -> Iterator[Node]:
        for r in range(1, rank + 1):
            yield from self.level(r)

    def rank_of(self, gid: int) -> int:
        return self.node(gid).rank

    def require_rank(self, rank: int) -> None:
        if rank > self.horizon:
            raise ArenaHorizonError(
                f"operation needs rank {rank}, arena built to {self.horizon}"
            )

    def require_complete(self, rank: int) -> None:
        bad = [r for r in self.truncated_levels if r <= rank]
        if bad:
            raise TruncatedArenaError(
                f"levels {sorted(bad)} are truncated; certified scans up to rank "
                f"{rank} need a complete model (pass allow_truncated=True to override)"
            )

    def insert_node(
        self,
        rank: int,
        base: Optional[int],
        j: int,
        sign: int,
        target: int,
    ) -> Node:
        """Find or append a node with the given data on an existing level.

        Validates the recursion's constraints exactly; appended nodes get the
        next global id, so earlier ids and cached expansions are untouched.
        Appending happens when node synthesis targets nodes inserted after
        the level was enumerated (or on truncated levels).
        """
        self.require_rank(rank)
        key = (rank, base or 0, j, sign, target)
        found = self.lookup.get(key)
        if found is not None:
            return self.node(found)
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        if not 1 <= j <= self.params.horizon:
            raise ParameterHorizonError(f"family j={j} beyond horizon")
        t = self.node(target)
        if not t.rank <= rank - 1:
            raise ValueError(
                f"target rank {t.rank} must be below node rank {rank}"
            )
        if base is None:
            if j > rank:
                raise ValueError(f"an age-1 node of rank {rank} allows j <= {rank}, got {j}")
            age = 1
        else:
            b = self.node(base)
            if b.weight_j != j:
                raise ValueError(
                    f"base weight family {b.weight_j} does not match j={j}"
                )
            if not b.rank <= rank - 2:
                raise ValueError(
                    f"base rank {b.rank} must be at most node rank minus 2 ({rank - 2})"
                )
            if not b.age < self.params.n(j):
                raise ValueError(f"base age {b.age} exhausts width n_{j}")
            if not b.rank < t.rank:
                raise ValueError(
                    f"target rank {t.rank} must exceed base rank {b.rank}"
                )
            age = b.age + 1
        node = Node(len(self.nodes), rank, base, j, sign, target, age)
        self.lookup[key] = node.id
        self.nodes.append(node)
        self.levels[rank - 1].append(node)
        return node


def extend_gamma(
    a: GammaArena,
    p: Params,
    level_cap: Optional[int] = None,
    strict_cap: bool = False,
) -> GammaArena:
    """Append the next level in canonical order; returns the same arena.

    With a level_cap, keeps the deterministic prefix and records the level as
    truncated (strict_cap raises instead).  Needs the family at index
    horizon+1, so relaxed parameter lists must be long enough.
    """
    if p is not a.params and p.families != a.params.families:
        raise ValueError("parameter families differ from the arena's")
    q = a.horizon
    rank = q + 1
    if rank > p.horizon:
        raise ParameterHorizonError(
            f"building level {rank} needs family j={rank}, horizon is {p.horizon}"
        )
    candidates: list[tuple[int, int, int, int]] = []  # (j, sign, target, base)
    targets_all = [n.id for n in a.gamma_upto(q)]
    for j in range(1, rank + 1):
        for sign in (-1, 1):
            for t in targets_all:
                candidates.append((j, sign, t, 0))
    for p_ in range(1, q):
        for xi in a.level(p_):
            j = xi.weight_j
            if j is None or j > p_:
                continue
            if not xi.age < p.n(j):
                continue
            for sign in (-1, 1):
                for eta in a.gamma_upto(q):
                    if eta.rank > p_:
                        candidates.append((j, sign, eta.id, xi.id))
    candidates.sort()
    if level_cap is not None and len(candidates) > level_cap:
        if strict_cap:
            raise LevelBudgetError(
                f"level {rank} needs {len(candidates)} nodes, budget {level_cap}"
            )
        candidates = candidates[:level_cap]
        a.truncated_levels.add(rank)
    new_level: list[Node] = []
    next_id = len(a.nodes)
    for j, sign, t, b in candidates:
        age = 1 if b == 0 else a.node(b).age + 1
        node = Node(
            id=next_id,
            rank=rank,
            base=b or None,
            weight_j=j,
            sign=sign,
            target=t,
            age=age,
        )
        if node.key() in a.lookup:
            raise AssertionError("duplicate node tuple")  # pragma: no cover
        a.lookup[node.key()] = next_id
        a.nodes.append(node)
        new_level.append(node)
        next_id += 1
    a.levels.append(new_level)
    return a


def build_arena(
    p: Params,
    ranks: int,
    level_cap: Optional[int] = None,
    strict_cap: bool = False,
) -> GammaArena:
    """Build levels 1..ranks from scratch."""
    a = GammaArena(p)
    while a.horizon < ranks:
        extend_gamma(a, p, level_cap=level_cap, strict_cap=strict_cap)
    return a


# -- rank projections ---------------------------------------------------------


def project_rank(x: BDVector, p: int, q: int, a: GammaArena) -> BDVector:
    """Restrict d-coordinates to nodes of rank in (p, q]."""
    if p >= q:
        raise ValueError(f"rank window ({p}, {q}] is empty")
    return BDVector(
        {g: v for g, v in x.coords.items() if p < a.rank_of(g) <= q}
    )


def project_rank_dual(f: DualCoords, p: int, q: int, a: GammaArena) -> DualCoords:
    """The dual projection: convert to d*-coordinates, restrict ranks to
    (p, q], convert back to e*-coordinates."""
    if p >= q:
        raise ValueError(f"rank window ({p}, {q}] is empty")
    in_dstar = FinVector()
    for theta, v in f.coords.items():
        in_dstar = in_dstar + estar_dcoords(theta, a).scale(v)
    out = FinFunctional()
    for delta, v in in_dstar.coords.items():
        if p < a.rank_of(delta) <= q:
            out = out + dstar_ecoords(delta, a).scale(v)
    return out


# -- dual system --------------------------------------------------------------


def estar_dcoords(gamma: Union[int, Node], a: GammaArena) -> FinVector:
    """e*_gamma expanded in d*-coordinates (coefficients over node ids)."""
    node = a.resolve(gamma)
    cached = a._estar_cache.get(node.id)
    if cached is not None:
        return cached
    if node.is_primitive:
        out = FinVector({1: Fraction(1)})
    else:
        w = Fraction(node.sign, a.params.m(node.weight_j))
        tail = estar_dcoords(node.target, a)
        if node.base is None:
            out = FinVector({node.id: Fraction(1)}) + tail.scale(w)
        else:
            p_ = a.rank_of(node.base)
            q = node.rank - 1
            windowed = FinVector(
                {g: v for g, v in tail.coords.items() if p_ < a.rank_of(g) <= q}
            )
            out = (
                FinVector({node.id: Fraction(1)})
                + estar_dcoords(node.base, a)
                + windowed.scale(w)
            )
    a._estar_cache[node.id] = out
    return out


def c_star(gamma: Union[int, Node], a: GammaArena) -> DualCoords:
    """e*-coordinates of c*_gamma (zero for the primitive node)."""
    node = a.resolve(gamma)
    if node.is_primitive:
        return DualCoords()
    return DualCoords({node.id: Fraction(-1)}) + _estar_ecoords_minus_dstar(node, a)


def _estar_ecoords_minus_dstar(node: Node, a: GammaArena) -> DualCoords:
    # c* = e* - d*; e*_gamma in e*-coords is the unit, so build via d*.
    return DualCoords({node.id: Fraction(2)}) + dstar_ecoords(node, a).scale(Fraction(-1))


def dstar_ecoords(gamma: Union[int, Node], a: GammaArena) -> FinFunctional:
    """d*_gamma expanded in e*-coordinates (independent of estar_dcoords
    except for the low-rank window re-expansion of extensions)."""
    node = a.resolve(gamma)
    cached = a._dstar_cache.get(node.id)
    if cached is not None:
        return cached
    if node.is_primitive:
        out = FinFunctional({1: Fraction(1)})
    else:
        w = Fraction(node.sign, a.params.m(node.weight_j))
        if node.base is None:
            # c* = (1/m) sign e*_target, already an e*-basis element
            out = FinFunctional({node.id: Fraction(1), node.target: -w})
        else:
            p_ = a.rank_of(node.base)
            # c* = e*_base + (1/m) sign (e*_target - P*_(0,p] e*_target)
            low = FinFunctional()
            tail_d = estar_dcoords(node.target, a)
            for delta, v in tail_d.coords.items():
                if a.rank_of(delta) <= p_:
                    low = low + dstar_ecoords(delta, a).scale(v)
            cstar = (
                FinFunctional({node.base: Fraction(1), node.target: w})
                + low.scale(-w)
            )
            out = FinFunctional({node.id: Fraction(1)}) + cstar.scale(Fraction(-1))
    a._dstar_cache[node.id] = out
    return out


def dual_system(a: GammaArena, q: int):
    """All d*_gamma rows (e*-coordinates) and all d_gamma coordinate vectors
    (values on nodes of rank <= q), for gamma of rank <= q."""
    a.require_rank(q)
    dstar_rows = {n.id: dstar_ecoords(n, a) for n in a.gamma_upto(q)}
    d_vectors: dict[int, FinVector] = {n.id: FinVector() for n in a.gamma_upto(q)}
    for theta in a.gamma_upto(q):
        row = estar_dcoords(theta, a)
        for gid, v in row.coords.items():
            d_vectors[gid] = d_vectors[gid] + FinVector({theta.id: v})
    return dstar_rows, d_vectors


def check_biorthogonality(a: GammaArena, q: int):
    """Multiply the two independently built triangular systems and compare
    with the identity; returns (ok, first offending pair or None)."""
    a.require_rank(q)
    for gamma in a.gamma_upto(q):
        row = FinVector()
        for theta, v in dstar_ecoords(gamma, a).coords.items():
            row = row + estar_dcoords(theta, a).scale(v)
        expected = FinVector({gamma.id: Fraction(1)})
        if row != expected:
            bad = next(
                (g for g in sorted(set(row.coords) | {gamma.id})
                 if row[g] != expected[g]),
                gamma.id,
            )
            return False, (gamma.id, bad)
    return True, None


# -- evaluations --------------------------------------------------------------


def eval_node(gamma: Union[int, Node], x: BDVector, a: GammaArena) -> Fraction:
    """Exact e*_gamma(x) for x in d-coordinates, by direct recursion."""
    node = a.resolve(gamma)
    top = node.rank
    if not x.is_zero:
        top = max(top, max(a.rank_of(g) for g in x.coords))
    a.require_rank(top)
    return _eval_rec(node, x, a)


def _eval_rec(node: Node, x: BDVector, a: GammaArena) -> Fraction:
    v = x[node.id]
    if node.is_primitive:
        return v
    w = Fraction(node.sign, a.params.m(node.weight_j))
    target = a.node(node.target)
    if node.base is None:
        return v + w * _eval_rec(target, x, a)
    p_ = a.rank_of(node.base)
    q = node.rank - 1
    windowed = BDVector(
        {g: c for g, c in x.coords.items() if p_ < a.rank_of(g) <= q}
    )
    return v + _eval_rec(a.node(node.base), x, a) + w * _eval_rec(target, windowed, a)


def rng_vector(x: BDVector, a: GammaArena) -> Optional[IndexInterval]:
    """[min, max] rank of the d-support; None for the zero vector."""
    if x.is_zero:
        return None
    ranks = [a.rank_of(g) for g in x.coords]
    return IndexInterval(min(ranks), max(ranks))


def rng_estar(gamma: Union[int, Node], a: GammaArena) -> IndexInterval:
    """[min, max] rank of the d*-support of e*_gamma."""
    coords = estar_dcoords(gamma, a)
    ranks = [a.rank_of(g) for g in coords.coords]
    return IndexInterval(min(ranks), max(ranks))


# -- norm bounds --------------------------------------------------------------


def bd_norm_truncated(
    x: BDVector,
    a: GammaArena,
    extra: int = 0,
    allow_truncated: bool = False,
) -> Fraction:
    """Certified lower bound: max |e*_gamma(x)| over all built nodes of rank
    at most (top rank of supp x) + extra."""
    if x.is_zero:
        return Fraction(0)
    top = max(a.rank_of(g) for g in x.coords) + extra
    a.require_rank(top)
    if not allow_truncated:
        a.require_complete(top)
    return max(abs(_eval_rec(n, x, a)) for n in a.gamma_upto(top))


def bd_norm_enclosure(
    x: BDVector,
    a: GammaArena,
    extra: int = 0,
    allow_truncated: bool = False,
) -> tuple[Fraction, Fraction]:
    """(lower, upper) with lower the truncated scan and upper certified for
    the full (untruncated) model: lower + M/(m_1 - 1), M the best windowed
    action over rank intervals inside [1, top rank of supp x]."""
    if x.is_zero:
        return Fraction(0), Fraction(0)
    n_top = max(a.rank_of(g) for g in x.coords)
    top = n_top + extra
    a.require_rank(top)
    if not allow_truncated:
        a.require_complete(top)
    slices = [project_rank(x, r - 1, r, a) for r in range(1, n_top + 1)]
    lower = Fraction(0)
    m_big = Fraction(0)
    for node in a.gamma_upto(top):
        s = [_eval_rec(node, sl, a) for sl in slices]
        total = sum(s, Fraction(0))
        if abs(total) > lower:
            lower = abs(total)
        # max |sum over a rank interval| via running prefix extremes
        prefix = Fraction(0)
        lo_seen = Fraction(0)
        hi_seen = Fraction(0)
        for v in s:
            prefix += v
            gap = max(prefix - lo_seen, hi_seen - prefix)
            if gap > m_big:
                m_big = gap
            lo_seen = min(lo_seen, prefix)
            hi_seen = max(hi_seen, prefix)
    upper = lower + m_big / (a.params.m(1) - 1)
    return lower, upper


# -- serialization ------------------------------------------------------------


def export_arena(a: GammaArena) -> str:
    """JSON-lines, one node per line, in id order."""
    lines = []
    for gid in range(1, len(a.nodes)):
        n = a.nodes[gid]
        lines.append(
            json.dumps(
                {
                    "id": n.id,
                    "rank": n.rank,
                    "base": n.base,
                    "j": n.weight_j,
                    "sign": n.sign,
                    "target": n.target,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def import_arena(text: str, params: Params) -> GammaArena:
    """Rebuild an arena from export_arena output, checking referential
    integrity and rank layering."""
    a = GammaArena(params)
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not rows or rows[0]["id"] != 1 or rows[0]["rank"] != 1:
        raise ValueError("arena export must start with the primitive node")
    for row in rows[1:]:
        gid = row["id"]
        if gid != len(a.nodes):
            raise ValueError(f"node ids must be consecutive, got {gid}")
        rank, base, j, sign, target = (
            row["rank"],
            row["base"],
            row["j"],
            row["sign"],
            row["target"],
        )
        if rank == a.horizon + 1:
            a.levels.append([])
        elif rank != a.horizon:
            raise ValueError(f"node {gid} has rank {rank}, expected layering")
        if not (target and 1 <= target < gid and a.node(target).rank <= rank - 1):
            raise ValueError(f"node {gid} target out of range")
        if base is not None:
            b = a.node(base)
            if not (b.rank < rank - 1 and b.weight_j == j):
                raise ValueError(f"node {gid} base violates rank/weight rules")
            if not a.node(target).rank > b.rank:
                raise ValueError(f"node {gid} target not beyond base rank")
            age = b.age + 1
        else:
            age = 1
        node = Node(gid, rank, base, j, sign, target, age)
        a.nodes.append(node)
        a.levels[-1].append(node)
        a.lookup[node.key()] = gid
    return a
