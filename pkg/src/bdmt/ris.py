"""Averages, rapidly increasing sequences, and their quantitative checks.

The building blocks here are scaled sums over successive blocks:

* a C-l1 average of length i is x = (1/i) sum of i successive blocks,
  each of norm at most C; its largest d*-coordinate is at most 3C/i and
  projections onto at most j <= i disjoint rank intervals sum to at
  most (1 + 2j/i) times the largest projection;
* a rapidly increasing sequence (RIS) with constant C and strictly
  increasing growth index (j_i) is a block sequence with norms at most
  C, j_{i+1} beyond the range of x_i, and |x_i(gamma)| <= C/m_gamma for
  every node gamma whose weight family is lighter than j_i;
* a two-level RIS stacks the construction: each outer vector is a
  normalized weighted average y_i = (c_i m_{j_i} / n_{j_i}) sum_j
  y_{i,j} of an inner RIS of averages with strictly increasing inner
  widths and a rank gap of at least j_{i,j} between consecutive inner
  ranges.  The normalizers satisfy 1/(10C) <= c_i <= 1, a consequence
  of the basic inequality bounding the weighted sum of any such RIS of
  width n_j by 10C (and by 10C/m_j at nodes of width beyond n_j).

Norm statements are certified through exact enclosures: an inequality
counts as passed only when the sound side crosses it (upper bound of
the left side at most the right side), and as refuted only when the
opposite sound side crosses (lower bound strictly above).  Anything
else is reported indeterminate.  Coordinate statements are exact scans
over all built nodes up to a stated depth, so any reported violation is
a genuine counterexample on the finite model and never a tolerance
artifact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence, Union

from .arena import (
    BDVector,
    GammaArena,
    bd_norm_enclosure,
    eval_node,
    project_rank,
    rng_vector,
)
from .params import IndexInterval, rat_to_str


class RISConstructionError(Exception):
    """A certificate construction failed a required exact condition."""


class Report:
    """Outcome of one quantitative check.

    `passed` means the sound upper side crossed the bound; `refuted`
    means the sound lower side crossed it the other way; both False
    means the enclosure straddles the bound (indeterminate).
    """

    def __init__(self, name: str, bound: Fraction):
        self.name = name
        self.bound = bound
        self.passed = False
        self.refuted = False
        self.quantities: dict[str, Fraction] = {}
        self.notes: list[str] = []

    def settle(self, sound_upper: Fraction, sound_lower: Optional[Fraction] = None):
        self.passed = sound_upper <= self.bound
        if sound_lower is not None:
            self.refuted = sound_lower > self.bound
        return self

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "bound": rat_to_str(self.bound),
            "passed": self.passed,
            "refuted": self.refuted,
            "quantities": {k: rat_to_str(v) for k, v in sorted(self.quantities.items())},
            "notes": list(self.notes),
        }

    def __repr__(self) -> str:
        state = "pass" if self.passed else ("refuted" if self.refuted else "indeterminate")
        return f"Report({self.name}: {state}, bound={self.bound})"


def _check_successive(xs: Sequence[BDVector], a: GammaArena, what: str) -> list[IndexInterval]:
    ranges = []
    for k, x in enumerate(xs):
        r = rng_vector(x, a)
        if r is None:
            raise ValueError(f"{what}[{k}] is zero")
        if ranges and ranges[-1].hi >= r.lo:
            raise ValueError(
                f"{what}[{k - 1}] and {what}[{k}] are not successive by rank"
            )
        ranges.append(r)
    return ranges


class AverageCert:
    """A certified average of successive normalized blocks.

    Blocks are stored normalized by their enclosure lower bounds, so
    each has norm at least 1 and at most its enclosure ratio; C is the
    largest such ratio and the average is their arithmetic mean.
    """

    def __init__(
        self,
        blocks: list[BDVector],
        i: int,
        C: Fraction,
        arena: GammaArena,
        allow_truncated: bool = False,
    ):
        self.blocks = blocks
        self.i = i
        self.C = C
        self.arena = arena
        self.allow_truncated = allow_truncated

    @property
    def average(self) -> BDVector:
        total = BDVector()
        for b in self.blocks:
            total = total + b
        return total.scale(Fraction(1, self.i))

    def validate(self) -> None:
        if len(self.blocks) != self.i:
            raise RISConstructionError(
                f"average of length {self.i} holds {len(self.blocks)} blocks"
            )
        _check_successive(self.blocks, self.arena, "blocks")
        for k, b in enumerate(self.blocks):
            _, upper = bd_norm_enclosure(
                b, self.arena, allow_truncated=self.allow_truncated
            )
            if upper > self.C:
                raise RISConstructionError(
                    f"block {k} has certified norm bound {upper} above C={self.C}"
                )


def make_l1_average(
    blocks: Sequence[BDVector],
    i: int,
    a: GammaArena,
    allow_truncated: bool = False,
) -> AverageCert:
    """Normalize the first i successive blocks by their enclosure lower
    bounds and certify their average; C is the largest enclosure ratio."""
    if len(blocks) < i:
        raise ValueError(f"need at least {i} blocks, got {len(blocks)}")
    if i < 1:
        raise ValueError("an average needs a positive length")
    chosen = list(blocks[:i])
    _check_successive(chosen, a, "blocks")
    normalized = []
    C = Fraction(0)
    for k, b in enumerate(chosen):
        lower, upper = bd_norm_enclosure(b, a, allow_truncated=allow_truncated)
        if lower == 0:
            raise ValueError(f"block {k} has certified norm lower bound 0")
        normalized.append(b.scale(Fraction(1) / lower))
        C = max(C, upper / lower)
    return AverageCert(normalized, i, C, a, allow_truncated)


def check_d_star_bound(x: AverageCert, a: GammaArena, depth: int) -> Report:
    """Largest |d*_gamma(average)| over built nodes up to the depth,
    against 3C/i.  The d*-functionals are biorthogonal, so the value at
    gamma is the d-coordinate of the average there."""
    a.require_rank(depth)
    avg = x.average
    bound = 3 * x.C / x.i
    report = Report("d-star coordinate bound", bound)
    best = Fraction(0)
    argmax = None
    for g, v in avg.coords.items():
        if a.rank_of(g) <= depth and abs(v) > best:
            best = abs(v)
            argmax = g
    report.quantities["max_abs_dstar"] = best
    if argmax is not None:
        report.notes.append(f"attained at node {argmax}")
    return report.settle(best, best)


def check_projection_lemma(
    Es: Sequence[IndexInterval], x: AverageCert
) -> Report:
    """Sum of certified projection norms over disjoint rank intervals
    against (1 + 2j/i) times the largest certified projection norm.

    The left side uses enclosure lower bounds and the right side upper
    bounds, so a pass is sound; refutation would need the sides swapped
    and is reported separately via the raw quantities.
    """
    j = len(Es)
    if j > x.i:
        raise ValueError(f"{j} intervals exceed the average length {x.i}")
    for s in range(j):
        for t in range(s + 1, j):
            if Es[s].intersect(Es[t]) is not None:
                raise ValueError(f"intervals {s} and {t} overlap")
    a = x.arena
    avg = x.average
    factor = 1 + Fraction(2 * j, x.i)
    lhs = Fraction(0)
    sup_upper = Fraction(0)
    for e in Es:
        piece = BDVector(
            {g: v for g, v in avg.coords.items() if e.lo <= a.rank_of(g) <= e.hi}
        )
        lower, upper = bd_norm_enclosure(piece, a, allow_truncated=x.allow_truncated)
        lhs += lower
        sup_upper = max(sup_upper, upper)
    report = Report("projection sum bound", factor * sup_upper)
    report.quantities["sum_of_lower_bounds"] = lhs
    report.quantities["sup_of_upper_bounds"] = sup_upper
    report.quantities["factor"] = factor
    return report.settle(lhs, lhs)


class RISCert:
    """A certified rapidly increasing sequence at a stated depth."""

    def __init__(
        self,
        xs: list[BDVector],
        C: Fraction,
        js: list[int],
        depth: int,
        arena: GammaArena,
        allow_truncated: bool = False,
    ):
        self.xs = xs
        self.C = C
        self.js = js
        self.depth = depth
        self.arena = arena
        self.allow_truncated = allow_truncated

    def validate(self) -> None:
        out = verify_ris(
            self.xs, self.C, self.js, self.arena, self.depth, self.allow_truncated
        )
        if not isinstance(out, RISCert):
            raise RISConstructionError("; ".join(out))


def verify_ris(
    seq: Sequence[BDVector],
    C: Fraction,
    js: Sequence[int],
    a: GammaArena,
    depth: int,
    allow_truncated: bool = False,
) -> Union[RISCert, list[str]]:
    """Certify the three defining conditions, or list every violation.

    Condition (1) is certified through enclosure upper bounds (an upper
    bound above C is reported as uncertifiable rather than false unless
    the lower bound also crosses).  Condition (2) is exact on ranges.
    Condition (3) scans every built node of weight family lighter than
    j_i up to the stated depth; violations name (i, gamma).
    """
    a.require_rank(depth)
    if len(js) != len(seq):
        raise ValueError("growth index and sequence lengths differ")
    violations: list[str] = []
    if not seq:
        return RISCert([], Fraction(C), list(js), depth, a, allow_truncated)
    if any(js[k] >= js[k + 1] for k in range(len(js) - 1)):
        violations.append("growth index is not strictly increasing")
    if any(not 1 <= j <= a.params.horizon for j in js):
        violations.append("growth index leaves the parameter horizon")
    try:
        ranges = _check_successive(seq, a, "seq")
    except ValueError as exc:
        return [str(exc)]
    for i, x in enumerate(seq):
        lower, upper = bd_norm_enclosure(x, a, allow_truncated=allow_truncated)
        if upper > C:
            side = "certified above" if lower > C else "not certifiable at"
            violations.append(
                f"condition (1) {side} C for i={i}: enclosure "
                f"[{lower}, {upper}] vs {C}"
            )
    for i in range(len(seq) - 1):
        if js[i + 1] <= ranges[i].hi:
            violations.append(
                f"condition (2) fails for i={i}: j_{i + 1}={js[i + 1]} "
                f"is not beyond max rng x_{i}={ranges[i].hi}"
            )
    for i, x in enumerate(seq):
        if not 1 <= js[i] <= a.params.horizon:
            continue
        threshold = a.params.m(js[i])
        for node in a.gamma_upto(depth):
            if node.is_primitive or a.params.m(node.weight_j) >= threshold:
                continue
            value = abs(eval_node(node, x, a))
            if value > C * Fraction(1, a.params.m(node.weight_j)):
                violations.append(
                    f"condition (3) fails at (i={i}, gamma={node.id}): "
                    f"|x_i(gamma)| = {value} > C/m_{node.weight_j}"
                )
                break
    if violations:
        return violations
    return RISCert(list(seq), Fraction(C), list(js), depth, a, allow_truncated)


class TwoLevelCert:
    """A certified two-level construction: outer vectors, their inner
    averages, inner growth indices and the exact normalizers."""

    def __init__(
        self,
        ys: list[BDVector],
        inners: list[list[BDVector]],
        inner_js: list[list[int]],
        cs: list[Fraction],
        C: Fraction,
        js: list[int],
        depth: int,
        arena: GammaArena,
        allow_truncated: bool = False,
    ):
        self.ys = ys
        self.inners = inners
        self.inner_js = inner_js
        self.cs = cs
        self.C = C
        self.js = js
        self.depth = depth
        self.arena = arena
        self.allow_truncated = allow_truncated

    def validate(self) -> None:
        a = self.arena
        p = a.params
        for i, y in enumerate(self.ys):
            j = self.js[i]
            scale = self.cs[i] * Fraction(p.m(j), p.n(j))
            total = BDVector()
            for inner in self.inners[i]:
                total = total + inner
            if y != total.scale(scale):
                raise RISConstructionError(f"outer vector {i} mismatches its formula")
            if not Fraction(1, 10 * self.C) <= self.cs[i] <= 1:
                raise RISConstructionError(
                    f"normalizer c_{i} = {self.cs[i]} outside [1/(10C), 1]"
                )
        out = verify_ris(
            self.ys, self.C, self.js, a, self.depth, self.allow_truncated
        )
        if not isinstance(out, RISCert):
            raise RISConstructionError("; ".join(out))


def build_two_level_ris(
    spec: Sequence[tuple[int, RISCert]],
    a: GammaArena,
    depth: Optional[int] = None,
    allow_truncated: bool = False,
) -> TwoLevelCert:
    """Stack inner certified RIS of averages into normalized outer
    vectors y_i = (c_i m_{j_i} / n_{j_i}) sum_j y_{i,j}.

    Each item supplies the outer family j_i and the inner certificate;
    inner length must equal n_{j_i}, inner widths n at the inner growth
    indices must strictly increase above n_{j_i}, and consecutive inner
    ranges must leave a rank gap larger than the inner index.  c_i is
    the reciprocal of the enclosure lower bound of the unnormalized
    outer vector; the construction is rejected with diagnostics when
    c_i leaves [1/(10C), 1] or the outer sequence fails its own
    certification.
    """
    if not spec:
        raise ValueError("empty specification")
    if depth is None:
        depth = a.horizon
    p = a.params
    ys: list[BDVector] = []
    inners: list[list[BDVector]] = []
    inner_js: list[list[int]] = []
    cs: list[Fraction] = []
    js: list[int] = []
    C = Fraction(0)
    for i, (j_i, inner) in enumerate(spec):
        C = max(C, inner.C)
        width = p.n(j_i)
        if len(inner.xs) != width:
            raise RISConstructionError(
                f"outer element {i}: inner length {len(inner.xs)} != n_{j_i} = {width}"
            )
        widths = [p.n(jj) for jj in inner.js]
        if any(w2 <= w1 for w1, w2 in zip([width] + widths, widths)):
            raise RISConstructionError(
                f"outer element {i}: inner widths {widths} must strictly "
                f"increase above n_{j_i} = {width}"
            )
        ranges = _check_successive(inner.xs, a, f"inner[{i}]")
        for k in range(len(inner.xs) - 1):
            if ranges[k].hi + inner.js[k] >= ranges[k + 1].lo:
                raise RISConstructionError(
                    f"gap condition fails at (i={i}, j={k}): "
                    f"{ranges[k].hi} + {inner.js[k]} >= {ranges[k + 1].lo}"
                )
        total = BDVector()
        for x in inner.xs:
            total = total + x
        unnormalized = total.scale(Fraction(p.m(j_i), p.n(j_i)))
        lower, _ = bd_norm_enclosure(unnormalized, a, allow_truncated=allow_truncated)
        if lower == 0:
            raise RISConstructionError(f"outer element {i} has no certified norm")
        c_i = Fraction(1) / lower
        ys.append(unnormalized.scale(c_i))
        inners.append(list(inner.xs))
        inner_js.append(list(inner.js))
        cs.append(c_i)
        js.append(j_i)
    for i, c_i in enumerate(cs):
        if not Fraction(1, 10 * C) <= c_i <= 1:
            raise RISConstructionError(
                f"normalizer c_{i} = {c_i} outside [1/(10C), 1] = "
                f"[{Fraction(1, 10 * C)}, 1]; enclosure lower bound was {1 / c_i}"
            )
    out = verify_ris(ys, C, js, a, depth, allow_truncated)
    if not isinstance(out, RISCert):
        raise RISConstructionError(
            "outer sequence fails certification: " + "; ".join(out)
        )
    return TwoLevelCert(ys, inners, inner_js, cs, C, js, depth, a, allow_truncated)


def check_basic_inequality(
    j: int,
    seq: RISCert,
    a: GammaArena,
    depth: int,
    allow_truncated: bool = False,
) -> tuple[Report, Report]:
    """The weighted average of a certified RIS of width n_j against 10C,
    and its evaluations at heavy nodes against 10C/m_j.

    Returns (norm report, heavy-node report); the first settles by the
    enclosure of ||(m_j/n_j) sum x_i||, the second by an exact scan over
    built nodes whose width exceeds n_j.
    """
    a.require_rank(depth)
    p = a.params
    if len(seq.xs) != p.n(j):
        raise ValueError(f"need n_{j} = {p.n(j)} vectors, got {len(seq.xs)}")
    total = BDVector()
    for x in seq.xs:
        total = total + x
    y = total.scale(Fraction(p.m(j), p.n(j)))
    lower, upper = bd_norm_enclosure(y, a, allow_truncated=allow_truncated)
    norm_report = Report("weighted average norm", 10 * seq.C)
    norm_report.quantities["enclosure_lower"] = lower
    norm_report.quantities["enclosure_upper"] = upper
    norm_report.settle(upper, lower)
    heavy_bound = 10 * seq.C / p.m(j)
    heavy = Report("heavy node evaluations", heavy_bound)
    best = Fraction(0)
    argmax = None
    for node in a.gamma_upto(depth):
        if node.is_primitive or p.n(node.weight_j) <= p.n(j):
            continue
        value = abs(eval_node(node, y, a))
        if value > best:
            best = value
            argmax = node.id
    heavy.quantities["max_heavy_evaluation"] = best
    if argmax is not None:
        heavy.notes.append(f"attained at node {argmax}")
    heavy.settle(best, best)
    return norm_report, heavy


def check_gon_ris(
    seq: RISCert,
    s: int,
    a: GammaArena,
    depth: int,
) -> tuple[Report, Report]:
    """Tail evaluations |e*_gamma P_(s,inf) x_i| in the two weight
    regimes: nodes lighter than the element's own family against
    5C/m_gamma, nodes at least as heavy as the next family against
    3C/m_gamma.  Returns (light report, heavy report), each settled by
    the exact maximum of m_gamma times the evaluation."""
    a.require_rank(depth)
    p = a.params
    light = Report("tail evaluations, light nodes", 5 * seq.C)
    heavy = Report("tail evaluations, heavy nodes", 3 * seq.C)
    best = {"light": Fraction(0), "heavy": Fraction(0)}
    arg = {"light": None, "heavy": None}
    for i, x in enumerate(seq.xs):
        if s >= depth:
            tail = BDVector()
        else:
            tail = project_rank(x, s, depth, a)
        if tail.is_zero:
            continue
        for node in a.gamma_upto(depth):
            if node.is_primitive:
                continue
            m_gamma = p.m(node.weight_j)
            scaled = abs(eval_node(node, tail, a)) * m_gamma
            if m_gamma < p.m(seq.js[i]) and scaled > best["light"]:
                best["light"] = scaled
                arg["light"] = (i, node.id)
            if (
                i + 1 < len(seq.js)
                and m_gamma >= p.m(seq.js[i + 1])
                and scaled > best["heavy"]
            ):
                best["heavy"] = scaled
                arg["heavy"] = (i, node.id)
    light.quantities["max_weighted_tail"] = best["light"]
    heavy.quantities["max_weighted_tail"] = best["heavy"]
    for name, report in (("light", light), ("heavy", heavy)):
        if arg[name] is not None:
            report.notes.append(f"attained at (i, gamma) = {arg[name]}")
    light.settle(best["light"], best["light"])
    heavy.settle(best["heavy"], best["heavy"])
    return light, heavy
