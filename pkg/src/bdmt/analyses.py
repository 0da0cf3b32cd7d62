"""Structural analyses of node evaluation functionals.

Every weighted node gamma is the top of a construction chain
xi_1 < xi_2 < ... < xi_a = gamma following base links, all sharing the
weight family j of gamma.  Writing I_i for the rank window
(rank xi_{i-1}, rank xi_i - 1] (with rank xi_0 := 0), the functional
splits exactly as

    e*_gamma = sum_i d*_{xi_i} + (1/m_j) sum_i eps_i P*_{I_i} e*_{eta_i}

where eta_i and eps_i are the target and sign of the chain step i.  The
windows are successive and leave exactly the chain ranks uncovered, so
the identity is a disjoint decomposition of e*_gamma by rank.  This
module computes that decomposition (`evaluation_analysis`,
`split_parts`), inverts it (`node_from_analysis`), and derives from it:

* the windowed analysis over an arbitrary rank interval I
  (`i_analysis`): the chain entries whose windows, intersected with I,
  still act nontrivially; an empty result means e*_gamma restricted to
  I is a pure d*-sum (indecomposable over I);
* the analysis tree (`tree_analysis`): the recursive windowed analysis
  of each entry's target inside its own window.  Restricting every
  window of the tree to I and pruning dead branches yields exactly the
  tree of the I-windowed analysis (`restrict_tree` checks one side of
  that equivalence; tests check both);
* the covering index (`covering_index`): the deepest tree position
  whose windowed action still covers the joint range of a given vector
  and e*_gamma.  Qualifying positions form a root path because sibling
  windows are disjoint, so a greedy descent is exact;
* comparability (`is_comparable`): whether every windowed action range
  in the tree relates to every member of a block sequence by inclusion,
  reverse inclusion on the covered ranks, or disjointness;
* node approximation (`approximate_node`): given gamma of rank beyond
  N + i, a node gamma' of rank at most N + i whose functional agrees
  with e*_gamma on all d-coordinates of rank at most N, up to an error
  of box mass at most 4^(-i).  The walk descends, at each level, into
  the last chain entry whose window (or visible chain rank) reaches at
  or below N; entries after it act only above N, so truncating the
  chain at the selected entry loses nothing visible.  Rebuilt enclosing
  nodes are synthesized at rank max(inner rank + 1, N + 1): inflating
  to N + 1 keeps the new unit coordinates invisible below N while the
  widened windows add nothing, because the inner functional has no
  d-support beyond its own rank.  If the walk exhausts its depth budget
  i + 1, one chain entry is dropped and the remaining error is the
  entry's visible window action, scaled by the weights along the walk.
  The agreement bound is always re-checked exactly on the result and a
  violation raises instead of returning a bad node.

All arithmetic is exact; everything is deterministic given the arena.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence, Union

from .arena import (
    BDVector,
    DualCoords,
    GammaArena,
    Node,
    dstar_ecoords,
    estar_dcoords,
    project_rank_dual,
    rng_estar,
    rng_vector,
)
from .params import FinVector, IndexInterval


class AnalysisError(Exception):
    """A structural analysis was requested for data that has none."""


class ApproximationError(Exception):
    """Node approximation cannot produce a verified substitute."""


class EvalEntry:
    """One chain step of an evaluation analysis: the rank window, the
    step sign, the target id and the chain node id."""

    __slots__ = ("interval", "sign", "eta", "xi")

    def __init__(self, interval: IndexInterval, sign: int, eta: int, xi: int):
        self.interval = interval
        self.sign = sign
        self.eta = eta
        self.xi = xi

    def __repr__(self) -> str:
        return (
            f"EvalEntry(interval={self.interval}, sign={self.sign:+d}, "
            f"eta={self.eta}, xi={self.xi})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvalEntry):
            return NotImplemented
        return (
            self.interval == other.interval
            and self.sign == other.sign
            and self.eta == other.eta
            and self.xi == other.xi
        )


class EvalAnalysis:
    """The full decomposition of e*_gamma along its construction chain."""

    __slots__ = ("gamma", "j", "entries")

    def __init__(self, gamma: int, j: int, entries: list[EvalEntry]):
        self.gamma = gamma
        self.j = j
        self.entries = entries

    @property
    def age(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"EvalAnalysis(gamma={self.gamma}, j={self.j}, age={self.age})"


def chain_nodes(gamma: Union[int, Node], a: GammaArena) -> list[Node]:
    """The construction chain xi_1, .., xi_age = gamma along base links."""
    node = a.resolve(gamma)
    if node.is_primitive:
        raise AnalysisError("the primitive node has no construction chain")
    chain = [node]
    while chain[-1].base is not None:
        chain.append(a.node(chain[-1].base))
    chain.reverse()
    return chain


def evaluation_analysis(gamma: Union[int, Node], a: GammaArena) -> EvalAnalysis:
    """Chain windows, signs and targets of e*_gamma; purely structural."""
    chain = chain_nodes(gamma, a)
    entries = []
    prev_rank = 0
    for xi in chain:
        # base rank <= rank - 2 keeps every window nonempty
        interval = IndexInterval(prev_rank + 1, xi.rank - 1)
        entries.append(EvalEntry(interval, xi.sign, xi.target, xi.id))
        prev_rank = xi.rank
    return EvalAnalysis(chain[-1].id, chain[-1].weight_j, entries)


def split_parts(
    gamma: Union[int, Node], a: GammaArena
) -> tuple[DualCoords, DualCoords]:
    """e*_gamma as the sum of its chain d*-part and its windowed part.

    Both summands are returned in e*-coordinates; adding them recovers
    the unit functional at gamma exactly.
    """
    analysis = evaluation_analysis(gamma, a)
    m = a.params.m(analysis.j)
    bd_part = DualCoords()
    mt_part = DualCoords()
    for e in analysis.entries:
        bd_part = bd_part + dstar_ecoords(e.xi, a)
        windowed = project_rank_dual(
            DualCoords({e.eta: Fraction(1)}), e.interval.lo - 1, e.interval.hi, a
        )
        mt_part = mt_part + windowed.scale(Fraction(e.sign, m))
    return bd_part, mt_part


def node_from_analysis(
    entries: Sequence[tuple[IndexInterval, int, int]],
    j: int,
    a: GammaArena,
) -> Node:
    """Rebuild (or find) the node whose evaluation analysis has the given
    windows, signs and targets, in order.

    Windows must be successive with gaps of exactly one rank (the chain
    ranks), each target must have its rank inside its window, and the
    number of entries may not exceed the width n_j.  The result is added
    to the arena when missing.  Round-tripping through
    `evaluation_analysis` is exact whenever the first window starts at
    rank 1; otherwise the first window is widened to start there.
    """
    if not entries:
        raise AnalysisError("an evaluation analysis needs at least one entry")
    if len(entries) > a.params.n(j):
        raise AnalysisError(
            f"{len(entries)} entries exceed the width n_{j} = {a.params.n(j)}"
        )
    prev: Optional[Node] = None
    for interval, sign, eta in entries:
        if prev is not None and interval.lo != prev.rank + 1:
            raise AnalysisError(
                f"window {interval} must start right after chain rank {prev.rank}"
            )
        eta_rank = a.rank_of(eta)
        if not (interval.lo <= eta_rank <= interval.hi):
            raise AnalysisError(
                f"target rank {eta_rank} lies outside its window {interval}"
            )
        try:
            prev = a.insert_node(
                rank=interval.hi + 1,
                base=None if prev is None else prev.id,
                j=j,
                sign=sign,
                target=eta,
            )
        except ValueError as exc:
            raise AnalysisError(str(exc)) from exc
    return prev


# -- windowed analysis and the analysis tree ----------------------------------


def action_support(
    eta: Union[int, Node], interval: IndexInterval, a: GammaArena
) -> list[int]:
    """Ranks at which P*_interval e*_eta acts, ascending."""
    support = estar_dcoords(eta, a).support()
    ranks = sorted({a.rank_of(g) for g in support})
    return [r for r in ranks if interval.lo <= r <= interval.hi]


def action_range(
    eta: Union[int, Node], interval: IndexInterval, a: GammaArena
) -> Optional[IndexInterval]:
    """The rank range of P*_interval e*_eta, or None when it vanishes."""
    ranks = action_support(eta, interval, a)
    if not ranks:
        return None
    return IndexInterval(ranks[0], ranks[-1])


def i_analysis(
    gamma: Union[int, Node], interval: IndexInterval, a: GammaArena
) -> list[EvalEntry]:
    """Chain entries of gamma whose windows, clipped to the given
    interval, still act nontrivially.  Empty means e*_gamma restricted
    to the interval is a pure d*-sum."""
    out = []
    for e in evaluation_analysis(gamma, a).entries:
        clipped = e.interval.intersect(interval)
        if clipped is None:
            continue
        if action_support(e.eta, clipped, a):
            out.append(EvalEntry(clipped, e.sign, e.eta, e.xi))
    return out


def is_indecomposable(
    gamma: Union[int, Node], interval: IndexInterval, a: GammaArena
) -> bool:
    return not i_analysis(gamma, interval, a)


class AnalysisNode:
    """One position of an analysis tree: a target, the window it acts
    through, the sign of its step, and the chain node of that step
    (None at the root)."""

    __slots__ = ("eta", "interval", "sign", "xi", "children", "pos")

    def __init__(
        self,
        eta: int,
        interval: IndexInterval,
        sign: int,
        xi: Optional[int],
        pos: tuple[int, ...],
    ):
        self.eta = eta
        self.interval = interval
        self.sign = sign
        self.xi = xi
        self.pos = pos
        self.children: list[AnalysisNode] = []

    @property
    def is_terminal(self) -> bool:
        return not self.children

    def __repr__(self) -> str:
        return (
            f"AnalysisNode(pos={self.pos}, eta={self.eta}, "
            f"interval={self.interval}, sign={self.sign:+d}, xi={self.xi})"
        )


class AnalysisTree:
    """The recursive windowed analysis of a node over a root window."""

    __slots__ = ("gamma", "root", "arena")

    def __init__(self, gamma: int, root: AnalysisNode, arena: GammaArena):
        self.gamma = gamma
        self.root = root
        self.arena = arena

    def iter_nodes(self) -> Iterator[AnalysisNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def positions(self) -> list[tuple[int, ...]]:
        return [t.pos for t in self.iter_nodes()]

    def find(self, pos: tuple[int, ...]) -> AnalysisNode:
        node = self.root
        for step in pos:
            node = node.children[step - 1]
        return node

    def to_json(self) -> dict:
        def encode(t: AnalysisNode) -> dict:
            return {
                "eta": t.eta,
                "interval": [t.interval.lo, t.interval.hi],
                "sign": t.sign,
                "xi": t.xi,
                "terminal": t.is_terminal,
                "children": [encode(c) for c in t.children],
            }

        return {"gamma": self.gamma, "root": encode(self.root)}


def _grow(t: AnalysisNode, a: GammaArena) -> None:
    if a.node(t.eta).is_primitive:
        return
    for idx, e in enumerate(i_analysis(t.eta, t.interval, a), start=1):
        child = AnalysisNode(e.eta, e.interval, e.sign, e.xi, t.pos + (idx,))
        t.children.append(child)
        _grow(child, a)


def tree_analysis(
    gamma: Union[int, Node],
    a: GammaArena,
    interval: Optional[IndexInterval] = None,
) -> AnalysisTree:
    """The analysis tree of gamma over the window [1, rank gamma],
    or over its intersection with the given interval."""
    node = a.resolve(gamma)
    window = IndexInterval(1, node.rank)
    if interval is not None:
        clipped = window.intersect(interval)
        if clipped is None:
            raise AnalysisError(
                f"window {interval} misses every rank of node {node.id}"
            )
        window = clipped
    root = AnalysisNode(node.id, window, 1, None, ())
    _grow(root, a)
    return AnalysisTree(node.id, root, a)


def restrict_tree(
    tree: AnalysisTree, interval: IndexInterval, a: GammaArena
) -> Optional[AnalysisTree]:
    """Clip every window of the tree to the interval and prune branches
    whose clipped windows are empty or act trivially.  The result equals
    the tree analysis over the clipped root window."""
    root_window = tree.root.interval.intersect(interval)
    if root_window is None:
        return None

    def rebuild(t: AnalysisNode, window: IndexInterval, pos: tuple[int, ...]) -> AnalysisNode:
        out = AnalysisNode(t.eta, window, t.sign, t.xi, pos)
        idx = 0
        for c in t.children:
            clipped = c.interval.intersect(interval)
            if clipped is None or not action_support(c.eta, clipped, a):
                continue
            idx += 1
            out.children.append(rebuild(c, clipped, pos + (idx,)))
        return out

    return AnalysisTree(tree.gamma, rebuild(tree.root, root_window, ()), a)


def trees_equal(s: AnalysisTree, t: AnalysisTree) -> bool:
    """Structural equality of two analysis trees."""

    def eq(u: AnalysisNode, v: AnalysisNode) -> bool:
        if (u.eta, u.interval, u.sign, u.xi) != (v.eta, v.interval, v.sign, v.xi):
            return False
        if len(u.children) != len(v.children):
            return False
        return all(eq(cu, cv) for cu, cv in zip(u.children, v.children))

    return s.gamma == t.gamma and eq(s.root, t.root)


# -- covering index and comparability ------------------------------------------


def covering_index(tree: AnalysisTree, x: BDVector) -> AnalysisNode:
    """The deepest tree position whose windowed action range contains
    rng(x) intersected with rng(e*_gamma)."""
    a = tree.arena
    xr = rng_vector(x, a)
    if xr is None:
        raise AnalysisError("the zero vector has no covering index")
    target = rng_estar(tree.gamma, a).intersect(xr)
    if target is None:
        raise AnalysisError(
            "rng(x) and rng(e*_gamma) are disjoint; no position covers them"
        )
    current = tree.root
    while True:
        descended = False
        for c in current.children:
            cr = action_range(c.eta, c.interval, a)
            if cr is not None and cr.contains_interval(target):
                current = c
                descended = True
                break
        if not descended:
            return current


def is_comparable(
    gamma: Union[int, Node],
    xs: Sequence[BDVector],
    a: GammaArena,
) -> tuple[bool, Optional[tuple[tuple[int, ...], int]]]:
    """Whether every windowed action range A_t in the analysis tree of
    gamma relates to every member of the block sequence xs by inclusion
    (A_t inside rng x_k), reverse inclusion on the covered ranks (the
    ranks of supp x_k meeting any A_t all lie in A_t), or disjointness.

    Returns (True, None) or (False, (position, k)) for the first
    violating pair.  xs must be a block sequence: nonzero, with rank
    ranges in strictly increasing order.
    """
    if not xs:
        raise ValueError("xs must be a nonempty block sequence")
    ranges = []
    for k, x in enumerate(xs):
        r = rng_vector(x, a)
        if r is None:
            raise ValueError(f"xs[{k}] is zero; a block sequence has no gaps")
        if ranges and ranges[-1].hi >= r.lo:
            raise ValueError(
                f"xs[{k - 1}] and xs[{k}] overlap or are out of order by rank"
            )
        ranges.append(r)

    tree = tree_analysis(gamma, a)
    nodes = list(tree.iter_nodes())
    windows = {
        t.pos: action_range(t.eta, t.interval, a) for t in nodes
    }
    covered: set[int] = set()
    for w in windows.values():
        covered.update(range(w.lo, w.hi + 1))
    supp_ranks = [
        {a.rank_of(g) for g in x.support()} for x in xs
    ]
    for t in nodes:
        w = windows[t.pos]
        w_ranks = set(range(w.lo, w.hi + 1))
        for k, r in enumerate(ranges):
            if r.contains_interval(w):
                continue
            if (supp_ranks[k] & covered) <= w_ranks:
                continue
            if w.intersect(r) is None:
                continue
            return False, (t.pos, k)
    return True, None


# -- node approximation ---------------------------------------------------------


def box_distance_upto(
    g1: Union[int, Node], g2: Union[int, Node], n: int, a: GammaArena
) -> Fraction:
    """Total absolute difference of the d*-expansions of two node
    functionals over coordinates of rank at most n.  This is the largest
    discrepancy over sign vectors supported on those coordinates."""
    diff = estar_dcoords(g1, a) - estar_dcoords(g2, a)
    return sum(
        (abs(v) for g, v in diff.coords.items() if a.rank_of(g) <= n),
        Fraction(0),
    )


def approximate_node(
    gamma: Union[int, Node],
    k_low: int,
    n_cut: int,
    i: int,
    a: GammaArena,
) -> Node:
    """A node of rank at most n_cut + i agreeing with gamma below n_cut.

    The result gamma' satisfies, exactly:

    * rank(gamma') <= n_cut + i,
    * k_low <= min rng e*_{gamma'},
    * the d*-expansions of e*_gamma and e*_{gamma'} differ, over
      coordinates of rank at most n_cut, by total absolute mass at most
      4^(-i).

    Preconditions: i >= 1, k_low <= min rng e*_gamma <= n_cut, and the
    arena reaches rank n_cut + i.  A gamma already inside the rank
    budget is returned unchanged.  When no verified substitute exists
    along the walk (a dropped entry with no predecessor at the root, an
    unsatisfiable synthesized node, or a residue above the bound), the
    instance is flagged by raising ApproximationError.
    """
    node = a.resolve(gamma)
    if i < 1:
        raise ValueError(f"the depth budget i must be at least 1, got {i}")
    a.require_rank(n_cut + i)
    low = min(a.rank_of(g) for g in estar_dcoords(node, a).support())
    if not k_low <= low <= n_cut:
        raise ValueError(
            f"need k_low <= min rng e*_gamma <= n_cut, got {k_low} / {low} / {n_cut}"
        )
    if node.rank <= n_cut + i:
        return node

    # Walk: levels[l] = (analysis of eta_l, selected entry index).
    levels: list[tuple[EvalAnalysis, int]] = []
    cur = node
    window = IndexInterval(1, node.rank)
    mode = None  # "stop" | "drop" | "primitive"
    while True:
        analysis = evaluation_analysis(cur, a)
        selected = None
        for idx, e in enumerate(analysis.entries, start=1):
            clipped = e.interval.intersect(window)
            if clipped is not None:
                if clipped.lo <= n_cut:
                    selected = (idx, e, clipped)
            else:
                xi_rank = a.rank_of(e.xi)
                if window.lo <= xi_rank <= window.hi and xi_rank <= n_cut:
                    selected = (idx, e, None)
        if selected is None:
            raise ApproximationError(
                f"no chain entry of node {cur.id} is visible at or below "
                f"rank {n_cut} inside {window}"
            )
        idx, entry, clipped = selected
        levels.append((analysis, idx))
        depth = len(levels)  # this selection is step `depth` of the walk
        beta = a.node(entry.xi)
        if beta.rank + (depth - 1) <= n_cut + i:
            mode = "stop"
            break
        if depth == i + 1:
            mode = "drop"
            break
        target = a.node(entry.eta)
        if target.is_primitive:
            # Nothing to descend into.  A first entry keeps its unit
            # content through an age-1 rebuild; a later entry's window
            # starts past rank 1, so its action is invisible and the
            # entry drops exactly.
            mode = "primitive" if idx == 1 else "drop"
            break
        # the rank test can only fail with a nonempty clipped window
        assert clipped is not None
        cur = target
        window = clipped

    # Initial piece: the selected chain node, its predecessor when an
    # entry drops (a dropped first entry cascades upward), or the
    # primitive node when the rebuild keeps a unit entry.
    if mode == "primitive":
        piece = a.node(1)
    else:
        analysis, idx = levels.pop()
        if mode == "drop":
            while idx == 1:
                if not levels:
                    raise ApproximationError(
                        "dropping the first chain entry at the root leaves nothing"
                    )
                analysis, idx = levels.pop()
            idx -= 1
        piece = a.node(analysis.entries[idx - 1].xi)

    # Rebuild upward; inflating ranks to n_cut + 1 keeps new unit
    # coordinates invisible below n_cut.
    while levels:
        analysis, idx = levels.pop()
        entry = analysis.entries[idx - 1]
        pred = None if idx == 1 else analysis.entries[idx - 2].xi
        new_rank = max(piece.rank + 1, n_cut + 1)
        try:
            piece = a.insert_node(
                rank=new_rank,
                base=pred,
                j=analysis.j,
                sign=entry.sign,
                target=piece.id,
            )
        except ValueError as exc:
            raise ApproximationError(
                f"synthesized node at rank {new_rank} is invalid: {exc}"
            ) from exc

    if piece.rank > n_cut + i:
        raise ApproximationError(
            f"rebuilt rank {piece.rank} exceeds the budget {n_cut + i}"
        )
    low_out = min(a.rank_of(g) for g in estar_dcoords(piece, a).support())
    if low_out < k_low:
        raise ApproximationError(
            f"approximation reaches rank {low_out} below the floor {k_low}"
        )
    residue = box_distance_upto(node, piece, n_cut, a)
    if residue > Fraction(1, 4**i):
        raise ApproximationError(
            f"approximation residue {residue} exceeds 4^(-{i})"
        )
    return piece


# -- chain d*-mass against a vector ---------------------------------------------


def abs_bd_part(
    positions: Iterable[AnalysisNode],
    x: BDVector,
    a: GammaArena,
) -> Fraction:
    """Sum over the given tree positions of the absolute chain
    d*-coordinates of x inside each position's window: the total mass
    |d*_xi(P_I x)| over chain steps xi of each windowed target."""
    total = Fraction(0)
    for t in positions:
        eta = a.node(t.eta)
        if eta.is_primitive:
            continue
        for xi in chain_nodes(eta, a):
            if t.interval.lo <= xi.rank <= t.interval.hi:
                total += abs(x[xi.id])
    return total
