"""Mixed Tsirelson norming set, exact norm DP, witnesses, and a brute oracle.

The norming set W over families (m_j, n_j) is the smallest set of finitely
supported functionals containing the signed unit functionals and closed under
f = (1/m_j) * (f_1 + ... + f_d) whenever d <= n_j and the f_i have successive
supports (max supp f_i < min supp f_{i+1}).  The norm of x is sup f(x) over W.

Norm algorithm: a restriction of a W-functional to an index interval is again
in W, so the norm restricted to an interval satisfies the recursion

    norm[a, b] = max( max coordinate magnitude on [a, b],
                      max over j of (1/m_j) * best split of [a, b] into
                      between 2 and n_j successive sub-intervals, summing
                      their norms ).

Two exact facts shrink the search: a weighted functional may skip elements of
the interval, but assigning every element to some part never lowers the best
split (each part's functional restricts); and by the triangle inequality a
finer partition never sums lower, so exactly min(n_j, interval length) parts
is optimal for family j.  The split maxima are computed by a peel-first-part
dynamic program, memoized per interval.

The witness pass extracts, among value-optimal trees, one of minimal depth,
tie-broken toward partitions that peel the longest possible first block at
every step (a deterministic canonical representative; for (1,1,1,1,1) over
the single family (2,3) it yields parts {1..3}, {4}, {5} of value 7/4).

brute_force_norm is an independent oracle: it enumerates every leaf subset of
the support and every recursive contiguous-chunk tree shape over it, sharing
no code or memo tables with the DP.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence, Union

from .params import FinFunctional, FinVector, ParameterHorizonError, Params


class SupportCapError(Exception):
    """The brute-force oracle was given a support beyond its cap."""


class WLeaf:
    """A signed unit functional leaf: sign * e*_index."""

    __slots__ = ("sign", "index")

    def __init__(self, sign: int, index: int):
        if sign not in (1, -1):
            raise ValueError(f"leaf sign must be +1 or -1, got {sign}")
        if index < 1:
            raise ValueError(f"leaf index must be >= 1, got {index}")
        self.sign = sign
        self.index = index

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, WLeaf)
            and (self.sign, self.index) == (other.sign, other.index)
        )

    def __repr__(self) -> str:
        return f"WLeaf({self.sign:+d}, {self.index})"


class WNode:
    """An averaging node: (1/m_j) times the sum of its children."""

    __slots__ = ("j", "children")

    def __init__(self, j: int, children: Iterable[Union["WNode", WLeaf]]):
        if j < 1:
            raise ValueError(f"family index must be >= 1, got {j}")
        kids = tuple(children)
        if not kids:
            raise ValueError("averaging node requires at least one child")
        self.j = j
        self.children = kids

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, WNode)
            and (self.j, self.children) == (other.j, other.children)
        )

    def __repr__(self) -> str:
        return f"WNode(j={self.j}, children={list(self.children)!r})"


WTree = Union[WLeaf, WNode]


def _tree_support(t: WTree) -> tuple[int, int]:
    """(min, max) leaf index of the subtree."""
    if isinstance(t, WLeaf):
        return t.index, t.index
    lo = min(_tree_support(c)[0] for c in t.children)
    hi = max(_tree_support(c)[1] for c in t.children)
    return lo, hi


def validate_w_tree(t: WTree, p: Params):
    """Check admissibility and blocking; weight the tree into a functional.

    Returns the FinFunctional (leaf: sign * e*_k; node: (1/m_j) * sum of
    children) when every constraint holds, otherwise the list of violation
    messages.  A family index beyond the parameter horizon raises, since no
    constraint set exists to check against.
    """
    violations: list[str] = []

    def walk(node: WTree) -> FinFunctional:
        if isinstance(node, WLeaf):
            return FinFunctional({node.index: Fraction(node.sign)})
        d = len(node.children)
        cap = p.n(node.j)  # raises ParameterHorizonError beyond the horizon
        if d > cap:
            violations.append(
                f"node with family j={node.j} has {d} children, width cap n_{node.j}={cap}"
            )
        parts = [walk(c) for c in node.children]
        for i, (a, b) in enumerate(zip(node.children, node.children[1:])):
            if _tree_support(a)[1] >= _tree_support(b)[0]:
                violations.append(
                    f"children {i} and {i + 1} of a j={node.j} node are not "
                    f"successive blocks (supports {_tree_support(a)} and {_tree_support(b)})"
                )
        total = FinFunctional()
        for f in parts:
            total = total + f
        return total.scale(Fraction(1, p.m(node.j)))

    f = walk(t)
    return violations if violations else f


def eval_functional(f: FinFunctional, x: FinVector) -> Fraction:
    """Exact pairing sum_k f_k x_k."""
    return f.dot(x)


class _NormDP:
    """Interval dynamic program over the sorted support of one vector."""

    def __init__(self, x: FinVector, p: Params):
        self.ks = x.support()
        self.vals = [x[k] for k in self.ks]
        self.p = p
        # per family the pair (m, n); deduplicated per effective part count
        # lazily inside _choices since the count depends on interval length
        self._norm_memo: dict[tuple[int, int], Fraction] = {}
        self._split_memo: dict[tuple[int, int, int], Fraction] = {}
        self._depth_memo: dict[tuple[int, int], int] = {}
        self._split_depth_memo: dict[tuple[int, int, int], int] = {}

    def _choices(self, length: int) -> list[tuple[int, int]]:
        """Distinct (m, d) pairs with d = min(n_j, length) >= 2, best m per d."""
        best: dict[int, int] = {}
        for m, n in self.p.families:
            d = min(n, length)
            if d >= 2 and (d not in best or m < best[d]):
                best[d] = m
        return [(m, d) for d, m in best.items()]

    def norm(self, a: int, b: int) -> Fraction:
        key = (a, b)
        if key in self._norm_memo:
            return self._norm_memo[key]
        best = max(abs(v) for v in self.vals[a : b + 1])
        if a != b:
            for m, d in self._choices(b - a + 1):
                cand = Fraction(1, m) * self.split(a, b, d)
                if cand > best:
                    best = cand
        self._norm_memo[key] = best
        return best

    def split(self, a: int, b: int, d: int) -> Fraction:
        """Best sum of interval norms over partitions into exactly d parts."""
        if d == 1:
            return self.norm(a, b)
        key = (a, b, d)
        if key in self._split_memo:
            return self._split_memo[key]
        best = None
        for e in range(a, b - d + 2):  # first part [a, e], d-1 parts remain
            cand = self.norm(a, e) + self.split(e + 1, b, d - 1)
            if best is None or cand > best:
                best = cand
        self._split_memo[key] = best
        return best

    # -- witness extraction ------------------------------------------------

    def _leaf_optimal(self, a: int, b: int) -> bool:
        return max(abs(v) for v in self.vals[a : b + 1]) == self.norm(a, b)

    def depth(self, a: int, b: int) -> int:
        """Minimal tree depth among value-optimal witnesses for [a, b]."""
        key = (a, b)
        if key in self._depth_memo:
            return self._depth_memo[key]
        if self._leaf_optimal(a, b):
            self._depth_memo[key] = 0
            return 0
        target = self.norm(a, b)
        best = None
        for m, d in self._choices(b - a + 1):
            if Fraction(1, m) * self.split(a, b, d) == target:
                g = self.split_depth(a, b, d)
                if best is None or g < best:
                    best = g
        self._depth_memo[key] = 1 + best
        return 1 + best

    def split_depth(self, a: int, b: int, d: int) -> int:
        """Min over value-optimal d-part splits of the max part depth."""
        if d == 1:
            return self.depth(a, b)
        key = (a, b, d)
        if key in self._split_depth_memo:
            return self._split_depth_memo[key]
        target = self.split(a, b, d)
        best = None
        for e in range(a, b - d + 2):
            if self.norm(a, e) + self.split(e + 1, b, d - 1) == target:
                g = max(self.depth(a, e), self.split_depth(e + 1, b, d - 1))
                if best is None or g < best:
                    best = g
        self._split_depth_memo[key] = best
        return best

    def _greedy_parts(self, a: int, b: int, d: int) -> list[tuple[int, int]]:
        """Depth-optimal d-part split peeling the longest first part."""
        if d == 1:
            return [(a, b)]
        target_v = self.split(a, b, d)
        target_g = self.split_depth(a, b, d)
        for e in range(b - d + 1, a - 1, -1):
            if (
                self.norm(a, e) + self.split(e + 1, b, d - 1) == target_v
                and max(self.depth(a, e), self.split_depth(e + 1, b, d - 1)) == target_g
            ):
                return [(a, e)] + self._greedy_parts(e + 1, b, d - 1)
        raise AssertionError("split table inconsistent")  # pragma: no cover

    def witness(self, a: int, b: int) -> WTree:
        if self._leaf_optimal(a, b):
            target = self.norm(a, b)
            for i in range(a, b + 1):
                if abs(self.vals[i]) == target:
                    return WLeaf(1 if self.vals[i] >= 0 else -1, self.ks[i])
        target = self.norm(a, b)
        dep = self.depth(a, b)
        candidates = []
        for m, d in self._choices(b - a + 1):
            if (
                Fraction(1, m) * self.split(a, b, d) == target
                and 1 + self.split_depth(a, b, d) == dep
            ):
                parts = self._greedy_parts(a, b, d)
                lengths = tuple(hi - lo + 1 for lo, hi in parts)
                j = next(jj for jj, (mm, _) in enumerate(self.p.families, 1) if mm == m)
                candidates.append((tuple(-L for L in lengths), j, parts))
        # longest-first-part order: lexicographically largest length vector,
        # then smallest family index
        candidates.sort(key=lambda c: (c[0], c[1]))
        _, j, parts = candidates[0]
        return WNode(j, [self.witness(lo, hi) for lo, hi in parts])


def t_norm(x: FinVector, p: Params) -> Fraction:
    """Exact norm of x over the norming set of p; zero vector has norm 0."""
    if x.is_zero:
        return Fraction(0)
    dp = _NormDP(x, p)
    return dp.norm(0, len(dp.ks) - 1)


def t_norm_witness(x: FinVector, p: Params) -> WTree:
    """A canonical tree whose weighted functional attains t_norm(x, p)."""
    if x.is_zero:
        raise ValueError("the zero vector has no witness tree")
    dp = _NormDP(x, p)
    return dp.witness(0, len(dp.ks) - 1)


def basis_average(j: int, ks: Sequence[int], p: Params) -> FinVector:
    """(m_j / n_j) times the sum of unit vectors at the n_j given indices."""
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("indices must be strictly increasing")
    if len(ks) != p.n(j):
        raise ValueError(f"need exactly n_{j}={p.n(j)} indices, got {len(ks)}")
    c = Fraction(p.m(j), p.n(j))
    return FinVector({k: c for k in ks})


def brute_force_norm(x: FinVector, p: Params, cap: int = 7) -> Fraction:
    """Independent exhaustive oracle for t_norm on supports up to `cap`.

    Enumerates every nonempty leaf subset T of supp x and every recursive
    partition of T's sorted sequence into d in [2, min(n_j, |T|)] contiguous
    chunks (leaf signs matched to coordinates, so each subtree contributes
    its absolute maximum).  Depth never exceeds |T| because every split is
    into at least two nonempty chunks.  No memoization, no code shared with
    the dynamic program.
    """
    ks = x.support()
    if not ks:
        return Fraction(0)
    if len(ks) > cap:
        raise SupportCapError(f"support size {len(ks)} exceeds oracle cap {cap}")

    def tree_max(seq: tuple[int, ...]) -> Fraction:
        if len(seq) == 1:
            return abs(x[seq[0]])
        best = Fraction(0)
        for m, n in p.families:
            dmax = min(n, len(seq))
            for d in range(2, dmax + 1):
                for cuts in combinations(range(1, len(seq)), d - 1):
                    bounds = (0,) + cuts + (len(seq),)
                    total = sum(
                        (tree_max(seq[lo:hi]) for lo, hi in zip(bounds, bounds[1:])),
                        Fraction(0),
                    )
                    if Fraction(1, m) * total > best:
                        best = Fraction(1, m) * total
        return best

    best = Fraction(0)
    for r in range(1, len(ks) + 1):
        for subset in combinations(ks, r):
            v = tree_max(subset)
            if v > best:
                best = v
    return best


def wtree_to_json(t: WTree):
    if isinstance(t, WLeaf):
        return {"sign": t.sign, "index": t.index}
    return {"j": t.j, "children": [wtree_to_json(c) for c in t.children]}


def wtree_from_json(data) -> WTree:
    if "index" in data:
        return WLeaf(int(data["sign"]), int(data["index"]))
    return WNode(int(data["j"]), [wtree_from_json(c) for c in data["children"]])
