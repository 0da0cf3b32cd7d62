"""Constructive transfer between node evaluations and the norming set.

The two models compute norms in different languages: the norming set W
of weighted trees on the basis side, and the evaluation functionals
e*_gamma of the node arena on the dual side.  This module carries
certified estimates across that boundary, in both directions, with
every inequality checked in exact rational arithmetic on the concrete
instance at hand.

`check_branch_length` bounds how deep an analysis-tree branch (or a
norming-tree branch) can reach while its functional still sees a vector
above the threshold 4^(-i-1): each step scales by at most 1/m_j <= 1/4,
so r <= i + 1 on the evaluation side (the covering position may sit one
step past the last weighted one) and r <= i on the norming side.  The
preconditions are themselves verified exactly; when one fails the
length is still returned but the bound is reported, not asserted.

`check_bdp_estimate` measures the chain mass of a two-level sequence:
over the minimal subtree containing the root and the covering indices
of the used blocks, the absolute d*-coordinates of sum a_i y_i inside
the tree windows total at most 1/n_{j_1}.  The left side is an exact
scan, so the report is settled on both sides.

`make_comparable` performs the two-step surgery that replaces a node
gamma by a node gamma' whose analysis tree is comparable with a clipped
subsequence of a rapidly increasing sequence, at the price of a factor
6 and an error term 49 C 4^(-j_1).  Straddling windows are split by
`approximate_node` and re-anchored on block boundaries; every window
operation is materialized as an honest arena node by re-ranking chain
steps, and the realized action of every slot is checked to equal the
intended one exactly.  States outside the displayed case list are never
resolved silently: they are logged in the audit and raised.

`extract_w_functional` walks the analysis tree of the best evaluation
functional against a sequence of interval projections of averages and
assembles, bottom up, a norming-set tree f with support inside the
prescribed basis indices, aiming at norm(sum y_i) <= 96 f(sum z_i).
`lift_to_node` goes the other way: given a norming tree whose leaves
match the inner vectors of a two-level sequence, it builds an arena
node bottom up whose evaluation dominates f(z) up to the factor 2^6,
asserting per node that the chain coordinates of y vanish and that the
displayed inequality holds.  `equivalence_report` packages both sides
into observed lower and upper ratios against the constants 2^(-7) and
2^10.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence, Union

from .analyses import (
    AnalysisError,
    AnalysisNode,
    AnalysisTree,
    ApproximationError,
    action_range,
    action_support,
    approximate_node,
    abs_bd_part,
    covering_index,
    evaluation_analysis,
    is_comparable,
    node_from_analysis,
    tree_analysis,
)
from .arena import (
    ArenaHorizonError,
    BDVector,
    GammaArena,
    Node,
    TruncatedArenaError,
    bd_norm_enclosure,
    eval_node,
    project_rank,
    rng_estar,
    rng_vector,
)
from .params import FinVector, IndexInterval, Params, rat_to_str, validate_params
from .ris import Report, RISCert, TwoLevelCert
from .tsirelson import WLeaf, WNode, WTree, basis_average, t_norm, validate_w_tree


class TransferError(Exception):
    """A transfer hypothesis fails exactly, or a surgery reaches a state
    outside the displayed case list; carries the audit trail when one
    exists."""

    def __init__(self, message: str, audit: Optional[list] = None):
        super().__init__(message)
        self.audit = audit if audit is not None else []


# -- small exact helpers -------------------------------------------------------


def _sup_coord(x: FinVector) -> Fraction:
    """max |coordinate| of x, zero for the zero vector."""
    if x.is_zero:
        return Fraction(0)
    return max(abs(c) for c in x.coords.values())


def _sum_vectors(vs: Sequence[FinVector]) -> BDVector:
    total = BDVector()
    for v in vs:
        total = total + v
    return total


def _window_piece(x: BDVector, interval: IndexInterval, a: GammaArena) -> BDVector:
    return project_rank(x, interval.lo - 1, interval.hi, a)


def _windowed_value(
    eta: Union[int, Node], interval: IndexInterval, x: BDVector, a: GammaArena
) -> Fraction:
    """Exact e*_eta P_interval (x)."""
    piece = _window_piece(x, interval, a)
    if piece.is_zero:
        return Fraction(0)
    return eval_node(eta, piece, a)


def _path_sign(tree: AnalysisTree, t: AnalysisNode) -> int:
    """Product of the step signs from the root down to t inclusive."""
    sign = tree.root.sign
    node = tree.root
    for step in t.pos:
        node = node.children[step - 1]
        sign *= node.sign
    return sign


def _sign_of(v: Fraction) -> int:
    return -1 if v < 0 else 1


# -- branch length -------------------------------------------------------------


def check_branch_length(
    mode: str,
    carrier,
    y,
    i: int,
    p: Optional[Params] = None,
) -> tuple[int, Optional[bool]]:
    """Length of the branch to the covering position (mode "bd") or to a
    prescribed leaf (mode "mt"), with the weight-decay bound on it.

    Mode "bd": carrier is an AnalysisTree, y a BDVector.  The branch runs
    from the root to the covering index of y; under the preconditions
    norm(y) <= 1, |d*_xi(y)| < 4^(-i-3) for every xi and
    |e*_gamma(y)| > 4^(-i-1), its length is at most i + 1.

    Mode "mt": carrier is a norming-set tree, y a basis index l, and p
    the parameters.  The branch runs to the unique positive leaf at
    index l; when the tree validates and its functional gives the
    coordinate at l a value above 4^(-i-1), the length is at most i.

    Returns (r, bound_ok): bound_ok is True when every precondition is
    verified exactly and the bound holds, None when some precondition
    fails (the bound is then reported, not asserted).  A verified
    instance violating the bound raises TransferError.
    """
    if i < 0:
        raise ValueError(f"the decay index i must be >= 0, got {i}")
    if mode == "bd":
        tree = carrier
        if not isinstance(tree, AnalysisTree):
            raise ValueError("mode 'bd' needs an AnalysisTree carrier")
        a = tree.arena
        v = covering_index(tree, y)
        r = len(v.pos)
        bound = i + 1
        verified = True
        if _sup_coord(y) >= Fraction(1, 4 ** (i + 3)):
            verified = False
        if abs(eval_node(tree.gamma, y, a)) <= Fraction(1, 4 ** (i + 1)):
            verified = False
        try:
            _, upper = bd_norm_enclosure(y, a)
            if upper > 1:
                verified = False
        except (TruncatedArenaError, ArenaHorizonError):
            verified = False
    elif mode == "mt":
        f = carrier
        if p is None:
            raise ValueError("mode 'mt' needs the parameters p")
        depths = _leaf_depths(f, int(y))
        if not depths:
            raise ValueError(f"the tree has no leaf at basis index {y}")
        r, sign = depths[0]
        bound = i
        verified = sign == 1
        weighted = validate_w_tree(f, p)
        if isinstance(weighted, list):
            verified = False
        elif weighted[int(y)] <= Fraction(1, 4 ** (i + 1)):
            verified = False
    else:
        raise ValueError(f"unknown mode {mode!r}, expected 'bd' or 'mt'")
    if not verified:
        return r, None
    if r > bound:
        raise TransferError(
            f"branch length {r} exceeds the bound {bound} although every "
            f"precondition is verified exactly"
        )
    return r, True


def _leaf_depths(t: WTree, index: int, depth: int = 0) -> list[tuple[int, int]]:
    """(depth, sign) of every leaf at the given basis index."""
    if isinstance(t, WLeaf):
        return [(depth, t.sign)] if t.index == index else []
    out = []
    for c in t.children:
        out.extend(_leaf_depths(c, index, depth + 1))
    return out


# -- chain-mass estimate ---------------------------------------------------------


def check_bdp_estimate(
    gamma: Union[int, Node],
    ys: TwoLevelCert,
    coeffs: Sequence[Fraction],
    a: GammaArena,
) -> Report:
    """Exact chain mass of sum a_i y_i over the minimal subtree through
    the covering indices, against the bound 1/n_{j_1}.

    Preconditions (verified exactly, failures reported in the notes):
    |a_i| <= 1; every used block admits a covering index t_i with
    |e*_gamma(y_i)| > 4^(-i-1); and the covering node's width does not
    exceed the block's width n_{j_i}.  The left side is an exact scan of
    chain d*-coordinates inside tree windows, so the report settles on
    both sides.
    """
    node = a.resolve(gamma)
    if len(coeffs) != len(ys.ys):
        raise ValueError(
            f"{len(coeffs)} coefficients for {len(ys.ys)} outer vectors"
        )
    coeffs = [Fraction(c) for c in coeffs]
    report = Report("chain-mass estimate", Fraction(1, a.params.n(ys.js[0])))
    used = [i for i, c in enumerate(coeffs) if c != 0]
    if not used:
        report.quantities["chain_mass"] = Fraction(0)
        report.settle(Fraction(0), Fraction(0))
        report.notes.append("all coefficients vanish; the left side is zero")
        return report
    for i in used:
        if abs(coeffs[i]) > 1:
            report.notes.append(
                f"precondition fails: |a_{i + 1}| = {abs(coeffs[i])} > 1"
            )
    tree = tree_analysis(node, a)
    er = rng_estar(node, a)
    positions = {()}
    for i in used:
        y_i = ys.ys[i]
        threshold = Fraction(1, 4 ** (i + 2))
        value = abs(eval_node(node, y_i, a))
        if value <= threshold:
            report.notes.append(
                f"precondition fails: |e*({node.id})(y_{i + 1})| = "
                f"{rat_to_str(value)} <= 4^(-{i + 2})"
            )
        xr = rng_vector(y_i, a)
        if xr is None or er.intersect(xr) is None:
            report.notes.append(
                f"precondition fails: block {i + 1} has no covering index "
                f"under node {node.id}"
            )
            continue
        t_i = covering_index(tree, y_i)
        eta = a.node(t_i.eta)
        if eta.weight_j is not None and a.params.n(eta.weight_j) > a.params.n(
            ys.js[i]
        ):
            report.notes.append(
                f"precondition fails: covering width n_{eta.weight_j} = "
                f"{a.params.n(eta.weight_j)} exceeds n_{ys.js[i]} at block {i + 1}"
            )
        for k in range(len(t_i.pos) + 1):
            positions.add(t_i.pos[:k])
    x = _sum_vectors([y.scale(c) for y, c in zip(ys.ys, coeffs) if c != 0])
    subtree = [tree.find(pos) for pos in sorted(positions)]
    mass = abs_bd_part(subtree, x, a)
    report.quantities["chain_mass"] = mass
    report.quantities["subtree_size"] = Fraction(len(subtree))
    report.settle(mass, mass)
    return report


# -- comparability surgery -------------------------------------------------------


class ComparabilityResult:
    """Outcome of the two-step surgery: the surviving block indices, the
    clipping intervals, the rebuilt node, the exact two sides of the
    displayed inequality and the per-step audit."""

    def __init__(
        self,
        gamma: int,
        gamma_prime: Node,
        surviving: list[int],
        clippings: dict,
        clipped: dict,
        lhs: Fraction,
        rhs_main: Fraction,
        error_term: Fraction,
        audit: list,
        arena: GammaArena,
    ):
        self.gamma = gamma
        self.gamma_prime = gamma_prime
        self.surviving = surviving
        self.clippings = clippings
        self.clipped = clipped
        self.lhs = lhs
        self.rhs_main = rhs_main
        self.error_term = error_term
        self.audit = audit
        self.arena = arena

    @property
    def inequality_holds(self) -> bool:
        return self.lhs <= 6 * self.rhs_main + self.error_term

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "gamma_prime": self.gamma_prime.id,
            "surviving": list(self.surviving),
            "clippings": {
                str(i): [e.lo, e.hi] for i, e in sorted(self.clippings.items())
            },
            "lhs": rat_to_str(self.lhs),
            "rhs_main": rat_to_str(self.rhs_main),
            "error_term": rat_to_str(self.error_term),
            "inequality_holds": self.inequality_holds,
            "audit": self.audit,
        }


def _chain_slots(eta: Union[int, Node], a: GammaArena) -> list[dict]:
    """The canonical chain of a node as mutable slots: intended action
    window [lo, hi], step sign, target id and chain node id."""
    slots = []
    for e in evaluation_analysis(eta, a).entries:
        slots.append(
            {
                "lo": e.interval.lo,
                "hi": e.interval.hi,
                "sign": e.sign,
                "target": e.eta,
                "xi": e.xi,
            }
        )
    return slots


def _materialize(
    slots: list[dict], j: int, rank: int, a: GammaArena, audit: list
) -> Node:
    """Rebuild a node of the given weight family and rank whose slots
    realize the intended action windows exactly.

    Chain ranks are forced by placing each window's start exactly (the
    targets' supports reach down to rank 1, so a loose start would expose
    extra action); window ends may widen to the next start since a
    target's support stops at its own rank.  Every slot's realized action
    is compared with the intended one and any mismatch raises."""
    entries = []
    prev_rank = 0
    for s, slot in enumerate(slots):
        next_lo = slots[s + 1]["lo"] if s + 1 < len(slots) else rank + 1
        lo_real = prev_rank + 1
        hi_real = next_lo - 2
        if lo_real > hi_real:
            raise TransferError(
                f"surgery squeezes slot {s + 1} to the empty window "
                f"[{lo_real}, {hi_real}]",
                audit,
            )
        window = IndexInterval(lo_real, hi_real)
        if slot["lo"] <= slot["hi"]:
            intended = action_support(
                slot["target"], IndexInterval(slot["lo"], slot["hi"]), a
            )
        else:
            intended = []
        realized = action_support(slot["target"], window, a)
        if realized != intended:
            raise TransferError(
                f"slot {s + 1} realizes action ranks {realized} instead of "
                f"the intended {intended}; the state is outside the case list",
                audit,
            )
        entries.append((window, slot["sign"], slot["target"]))
        prev_rank = hi_real + 1
    try:
        return node_from_analysis(entries, j, a)
    except (AnalysisError, ArenaHorizonError) as exc:
        raise TransferError(f"rebuilt chain is not realizable: {exc}", audit) from exc


def _rebuild_with_slots(
    tree: AnalysisTree,
    pos: tuple,
    slots: list[dict],
    a: GammaArena,
    audit: list,
    parent_lo: Optional[int] = None,
) -> Node:
    """Materialize new slots at a tree position and cascade the target
    swap through the ancestors, keeping every rank; an optional exact
    window start is applied to the position's slot in its parent."""
    t = tree.find(pos)
    eta = a.node(t.eta)
    child = _materialize(slots, eta.weight_j, eta.rank, a, audit)
    for depth in range(len(pos) - 1, -1, -1):
        parent = tree.find(pos[:depth])
        parent_eta = a.node(parent.eta)
        pslots = _chain_slots(parent_eta, a)
        xi = tree.find(pos[: depth + 1]).xi
        idx = next(k for k, s in enumerate(pslots) if s["xi"] == xi)
        pslots[idx]["target"] = child.id
        if depth == len(pos) - 1 and parent_lo is not None:
            pslots[idx]["lo"] = parent_lo
        child = _materialize(pslots, parent_eta.weight_j, parent_eta.rank, a, audit)
    return child


def make_comparable(
    gamma: Union[int, Node], xs: RISCert, a: GammaArena
) -> ComparabilityResult:
    """Two-step surgery making a node comparable with a clipped
    subsequence of a rapidly increasing sequence.

    Hypotheses checked exactly first: the rank gap
    max rng x_i + j_i < min rng x_{i+1} and the coordinate bound
    |d*_xi(x_i)| <= 3C/n_{j_i}.  Step 0 clips each surviving block
    between its straddling windows; step 1 walks the surviving blocks in
    order, splitting straddlers with `approximate_node` and re-anchoring
    window starts on block boundaries, either inside the covering node
    (case I) or on its window in the parent (case II).  The emitted
    instance always satisfies, exactly, both the comparability predicate
    and |e*_gamma(sum_I x_i)| <= 6 |e*_gamma'(sum_I' x'_i)| + 49 C 4^(-j_1);
    any state outside the displayed case list raises with the audit.
    """
    node = a.resolve(gamma)
    p = a.params
    seq = xs.xs
    js = xs.js
    C = xs.C
    n_seq = len(seq)
    if n_seq == 0:
        raise ValueError("empty sequence")
    audit: list = []
    ranges = []
    for k, x in enumerate(seq):
        r = rng_vector(x, a)
        if r is None:
            raise TransferError(f"block {k + 1} is zero", audit)
        ranges.append(r)
    for k in range(n_seq - 1):
        if ranges[k].hi + js[k] >= ranges[k + 1].lo:
            raise TransferError(
                f"gap hypothesis fails between blocks {k + 1} and {k + 2}: "
                f"{ranges[k].hi} + {js[k]} >= {ranges[k + 1].lo}",
                audit,
            )
    for k, x in enumerate(seq):
        sup = _sup_coord(x)
        cap = 3 * C * Fraction(1, p.n(js[k]))
        if sup > cap:
            raise TransferError(
                f"coordinate hypothesis fails at block {k + 1}: "
                f"{rat_to_str(sup)} > 3C/n_{js[k]}",
                audit,
            )
    total = _sum_vectors(seq)
    lhs = eval_node(node, total, a)
    eps = _sign_of(lhs)
    lhs = abs(lhs)
    error_term = 49 * C * Fraction(1, 4 ** js[0])
    evals = [eval_node(node, x, a) for x in seq]
    surviving = [
        k + 1
        for k in range(n_seq)
        if eps * evals[k] > Fraction(1, 4 ** (js[k] + 1))
    ]
    audit.append({"step": "select", "eps": eps, "surviving": list(surviving)})
    if not surviving:
        result = ComparabilityResult(
            node.id, node, [], {}, {}, lhs, Fraction(0), error_term, audit, a
        )
        if not result.inequality_holds:
            raise TransferError(
                f"no block survives yet |e*(sum)| = {rat_to_str(lhs)} exceeds "
                f"the error term {rat_to_str(error_term)}",
                audit,
            )
        return result

    # step 0: clip each surviving block between its straddling windows
    tree0 = tree_analysis(node, a)
    clippings: dict = {}
    clipped: dict = {}
    for idx, i in enumerate(surviving):
        x_i = seq[i - 1]
        i_minus = surviving[idx - 1] if idx > 0 else None
        i_plus = surviving[idx + 1] if idx + 1 < len(surviving) else None
        t0 = covering_index(tree0, x_i)
        meet = [
            c
            for c in t0.children
            if _slot_action(c, a) is not None
            and _slot_action(c, a).intersect(ranges[i - 1]) is not None
        ]
        entry = {"step": 0, "i": i, "case": "B"}
        e_i = ranges[i - 1]
        if len(meet) == 2 and i_minus is not None and i_plus is not None:
            q, r = meet
            q_rng = _slot_action(q, a)
            r_rng = _slot_action(r, a)
            if (
                q_rng.intersect(ranges[i_minus - 1]) is not None
                and r_rng.intersect(ranges[i_plus - 1]) is not None
            ):
                entry["case"] = "A"
                sgn = eps * _path_sign(tree0, t0)
                val_q = sgn * q.sign * _windowed_value(q.eta, q.interval, x_i, a)
                val_r = sgn * r.sign * _windowed_value(r.eta, r.interval, x_i, a)
                if val_q >= val_r:
                    hi = r_rng.lo - 1
                    e_i = (
                        IndexInterval(ranges[i - 1].lo, hi)
                        if hi >= ranges[i - 1].lo
                        else None
                    )
                    entry["side"] = "left of the right straddler"
                else:
                    lo = q_rng.hi + 1
                    e_i = (
                        IndexInterval(lo, ranges[i - 1].hi)
                        if lo <= ranges[i - 1].hi
                        else None
                    )
                    entry["side"] = "right of the left straddler"
        if e_i is None:
            entry["note"] = "clip empties the block; it is dropped"
            audit.append(entry)
            continue
        piece = _window_piece(x_i, e_i, a)
        if piece.is_zero:
            entry["note"] = "clip empties the block; it is dropped"
            audit.append(entry)
            continue
        doubled = 2 * eps * eval_node(node, piece, a)
        entry["doubling_holds"] = bool(eps * evals[i - 1] <= doubled)
        clippings[i] = e_i
        clipped[i] = piece
        audit.append(entry)
    surviving = [i for i in surviving if i in clippings]
    if not surviving:
        result = ComparabilityResult(
            node.id, node, [], {}, {}, lhs, Fraction(0), error_term, audit, a
        )
        if not result.inequality_holds:
            raise TransferError("every clip emptied its block", audit)
        return result

    # step 1: split straddlers and re-anchor window starts per block
    current = node
    for idx, i in enumerate(surviving):
        x_p = clipped[i]
        i_minus = surviving[idx - 1] if idx > 0 else None
        i_plus = surviving[idx + 1] if idx + 1 < len(surviving) else None
        tree = tree_analysis(current, a)
        xr = rng_vector(x_p, a)
        if rng_estar(current, a).intersect(xr) is None:
            audit.append({"step": 1, "i": i, "note": "block left the range"})
            continue
        t = covering_index(tree, x_p)
        eta_t = a.node(t.eta)
        entry = {"step": 1, "i": i, "pos": list(t.pos)}
        if eta_t.is_primitive or not t.children:
            entry["note"] = "covering node carries no windowed action"
            audit.append(entry)
            continue
        m_t = p.m(eta_t.weight_j)
        lighter = [l + 1 for l in range(n_seq) if p.m(js[l]) <= m_t]
        i_t = max(lighter) if lighter else 1
        if i < i_t:
            entry["note"] = (
                f"block {i} is lighter than the selector i_t = {i_t}; "
                "the case list does not cover it"
            )
            audit.append(entry)
            raise TransferError(
                f"uncovered comparability state at block {i}: the covering "
                f"node selects i_t = {i_t} > {i}",
                audit,
            )
        entry["case"] = "II" if i == i_t else "I"
        meet = [
            c
            for c in t.children
            if _slot_action(c, a) is not None
            and _slot_action(c, a).intersect(xr) is not None
        ]
        if not meet:
            entry["note"] = "no child window meets the block"
            if entry["case"] == "I":
                audit.append(entry)
                continue
        slots = _chain_slots(eta_t, a)
        slot_of = {s["xi"]: k for k, s in enumerate(slots)}
        sgn = eps * _path_sign(tree, t)
        mutated = False

        # right end: the last child window meeting the block
        if meet:
            r_c = meet[-1]
            r_rng = _slot_action(r_c, a)
            r_straddles = (
                i_plus is not None
                and r_rng.intersect(rng_vector(clipped[i_plus], a)) is not None
            )
            if not r_straddles:
                entry["right"] = "c"
            else:
                rs = slot_of[r_c.xi]
                boundary = rng_vector(clipped[i_plus], a).lo
                kids = t.children
                pred = kids[kids.index(r_c) - 1] if kids.index(r_c) > 0 else None
                val_r = (
                    sgn * r_c.sign * _windowed_value(r_c.eta, r_c.interval, x_p, a)
                )
                val_pred = (
                    sgn
                    * pred.sign
                    * _windowed_value(pred.eta, pred.interval, x_p, a)
                    if pred is not None
                    else Fraction(0)
                )
                if val_pred >= val_r:
                    entry["right"] = "a"
                    slots[rs]["lo"] = boundary
                    mutated = True
                else:
                    entry["right"] = "b"
                    if pred is None:
                        raise TransferError(
                            f"straddler at block {i} dominates but has no "
                            f"predecessor window to absorb its left part",
                            audit + [entry],
                        )
                    n_cut = xr.hi
                    budget = min(js[i - 1], boundary - 2 - n_cut)
                    if budget < 1:
                        raise TransferError(
                            f"no rank room to split the straddler at block "
                            f"{i}: budget {budget}",
                            audit + [entry],
                        )
                    try:
                        eta_new = approximate_node(r_c.eta, 1, n_cut, budget, a)
                    except (ApproximationError, ArenaHorizonError) as exc:
                        raise TransferError(
                            f"straddler split fails at block {i}: {exc}",
                            audit + [entry],
                        ) from exc
                    ps = slot_of[pred.xi]
                    slots[ps]["target"] = eta_new.id
                    slots[ps]["lo"] = r_rng.lo
                    slots[ps]["hi"] = eta_new.rank
                    slots[rs]["lo"] = boundary
                    entry["split_rank"] = eta_new.rank
                    mutated = True

        # left end: the first child window meeting the block (case I only)
        if entry["case"] == "I":
            q_c = meet[0]
            q_rng = _slot_action(q_c, a)
            q_straddles = (
                i_minus is not None
                and q_rng.intersect(rng_vector(clipped[i_minus], a)) is not None
            )
            if not q_straddles:
                entry["left"] = "f"
            elif q_c is r_c and entry.get("right") in ("a", "b"):
                raise TransferError(
                    f"a single window straddles both ends of block {i}; "
                    f"the case list does not cover it",
                    audit + [entry],
                )
            else:
                qs = slot_of[q_c.xi]
                kids = t.children
                succ = (
                    kids[kids.index(q_c) + 1]
                    if kids.index(q_c) + 1 < len(kids)
                    else None
                )
                if succ is None:
                    raise TransferError(
                        f"left straddler at block {i} has no successor window",
                        audit + [entry],
                    )
                val_q = (
                    sgn * q_c.sign * _windowed_value(q_c.eta, q_c.interval, x_p, a)
                )
                val_succ = (
                    sgn
                    * succ.sign
                    * _windowed_value(succ.eta, succ.interval, x_p, a)
                )
                n_cut = rng_vector(clipped[i_minus], a).hi
                if val_succ >= val_q:
                    entry["left"] = "d"
                    try:
                        eta_new = approximate_node(
                            q_c.eta, 1, n_cut, js[i_minus - 1], a
                        )
                    except (ApproximationError, ArenaHorizonError) as exc:
                        raise TransferError(
                            f"left straddler split fails at block {i}: {exc}",
                            audit + [entry],
                        ) from exc
                    slots[qs]["target"] = eta_new.id
                    slots[qs]["hi"] = eta_new.rank
                    entry["split_rank"] = eta_new.rank
                    mutated = True
                else:
                    entry["left"] = "e"
                    boundary = xr.lo
                    budget = min(js[i_minus - 1], boundary - 2 - n_cut)
                    if budget < 1:
                        raise TransferError(
                            f"no rank room to split the left straddler at "
                            f"block {i}: budget {budget}",
                            audit + [entry],
                        )
                    try:
                        eta_new = approximate_node(q_c.eta, 1, n_cut, budget, a)
                    except (ApproximationError, ArenaHorizonError) as exc:
                        raise TransferError(
                            f"left straddler split fails at block {i}: {exc}",
                            audit + [entry],
                        ) from exc
                    ss = slot_of[succ.xi]
                    old_target = slots[qs]["target"]
                    old_hi = slots[ss]["hi"]
                    slots[qs]["target"] = eta_new.id
                    slots[qs]["lo"] = q_rng.lo
                    slots[qs]["hi"] = eta_new.rank
                    slots[ss]["target"] = old_target
                    slots[ss]["lo"] = boundary
                    slots[ss]["hi"] = old_hi
                    entry["split_rank"] = eta_new.rank
                    mutated = True

        # case II: the block re-anchors the covering window in its parent
        parent_lo = None
        if entry["case"] == "II":
            if t.pos == ():
                entry["parent_clip"] = "skipped: covering index is the root"
            else:
                parent = tree.find(t.pos[:-1])
                pslots = _chain_slots(a.node(parent.eta), a)
                pidx = next(
                    k for k, s in enumerate(pslots) if s["xi"] == t.xi
                )
                if pidx == 0:
                    entry["parent_clip"] = (
                        "skipped: the first window is pinned at rank 1"
                    )
                else:
                    parent_lo = xr.lo
                    entry["parent_clip"] = xr.lo

        audit.append(entry)
        if not mutated and parent_lo is None:
            continue
        current = _rebuild_with_slots(tree, t.pos, slots, a, audit, parent_lo)

    # step 2: exact verification on the emitted instance
    xps = [clipped[i] for i in surviving]
    rhs_main = abs(eval_node(current, _sum_vectors(xps), a))
    result = ComparabilityResult(
        node.id,
        current,
        surviving,
        clippings,
        clipped,
        lhs,
        rhs_main,
        error_term,
        audit,
        a,
    )
    if not result.inequality_holds:
        raise TransferError(
            f"surgery loses too much: {rat_to_str(lhs)} > "
            f"6 * {rat_to_str(rhs_main)} + {rat_to_str(error_term)}",
            audit,
        )
    ok, witness = is_comparable(current, xps, a)
    if not ok:
        raise TransferError(
            f"rebuilt node {current.id} still fails comparability at "
            f"position {witness[0]} against block {witness[1] + 1}",
            audit,
        )
    return result


def _slot_action(c: AnalysisNode, a: GammaArena) -> Optional[IndexInterval]:
    return action_range(c.eta, c.interval, a)


# -- extraction of a norming functional ------------------------------------------


def extract_w_functional(
    ys: RISCert,
    zs: Sequence[int],
    a: GammaArena,
    p: Params,
) -> tuple[WTree, Report]:
    """A norming-set tree f over the prescribed basis indices with
    norm(sum y_i) <= 96 f(sum e_{zs_i}) as the target inequality.

    The tree is assembled bottom up over the minimal analysis subtree of
    the best evaluation functional: a covering node lighter than the
    first block averages its blocks' duals next to the recursive
    children; a heavier one keeps the single best block or averages the
    later ones, dropping the children.  The result always validates in
    the norming set with support inside zs.  The growth hypotheses
    (j >= 5 and m_{j_1} >= 2 n_j^3) are evaluated exactly: when they
    hold the inequality is asserted, otherwise the report only records
    both sides.
    """
    seq = ys.xs
    n_seq = len(seq)
    if len(zs) != n_seq:
        raise ValueError(f"{len(zs)} basis indices for {n_seq} blocks")
    if any(k2 <= k1 for k1, k2 in zip(zs, zs[1:])):
        raise ValueError("basis indices must be strictly increasing")
    notes: list[str] = []
    assert_mode = True
    ranges = [rng_vector(x, a) for x in seq]
    for k in range(n_seq - 1):
        if ranges[k].hi + ys.js[k] >= ranges[k + 1].lo:
            raise TransferError(
                f"gap hypothesis fails between blocks {k + 1} and {k + 2}"
            )
    width_match = [
        j for j in range(1, p.horizon + 1) if p.n(j) == n_seq
    ]
    if not width_match:
        assert_mode = False
        notes.append(f"no family has width {n_seq}; growth hypotheses unchecked")
        j_big = None
    else:
        j_big = width_match[0]
        if j_big < 5:
            assert_mode = False
            notes.append(f"family index {j_big} < 5")
        if p.m(ys.js[0]) < 2 * p.n(j_big) ** 3:
            assert_mode = False
            notes.append(
                f"m_{ys.js[0]} = {p.m(ys.js[0])} < 2 n_{j_big}^3 = "
                f"{2 * p.n(j_big) ** 3}"
            )
    y = _sum_vectors(seq)
    a.require_rank(ys.depth)
    best = None
    best_val = Fraction(0)
    for node in a.gamma_upto(ys.depth):
        v = abs(eval_node(node, y, a))
        if v > best_val:
            best, best_val = node, v
    if best is None or best_val == 0:
        raise TransferError("every evaluation functional vanishes on the sum")
    tree = tree_analysis(best, a)
    er = rng_estar(best, a)
    t_pos: list[Optional[tuple]] = []
    for i, x in enumerate(seq):
        if er.intersect(ranges[i]) is None:
            t_pos.append(None)
            notes.append(f"block {i + 1} is out of range of the best functional")
        else:
            t_pos.append(covering_index(tree, x).pos)
    prefix_closed = set()
    for pos in t_pos:
        if pos is None:
            continue
        for k in range(len(pos) + 1):
            prefix_closed.add(pos[:k])
    if not prefix_closed:
        raise TransferError("no block admits a covering index")
    m_first = p.m(ys.js[0])

    def assemble(pos: tuple) -> WTree:
        t = tree.find(pos)
        eta = a.node(t.eta)
        blocks = [i for i in range(n_seq) if t_pos[i] == pos]
        kid_trees = [
            assemble(c.pos) for c in t.children if c.pos in prefix_closed
        ]
        if not blocks:
            if not kid_trees:
                raise TransferError(f"empty subtree at position {pos}")
            if eta.weight_j is None:
                raise TransferError(
                    f"primitive node at position {pos} cannot average"
                )
            return WNode(eta.weight_j, _block_order(kid_trees))
        if eta.weight_j is None:
            raise TransferError(
                f"primitive covering node at position {pos} cannot average"
            )
        j_t = eta.weight_j
        m_t = p.m(j_t)
        if m_t < m_first:
            leaves = [WLeaf(1, zs[i]) for i in blocks]
            kept = len(t.children) - len(kid_trees)
            if len(blocks) > kept:
                notes.append(
                    f"admissibility margin fails at {pos}: {len(blocks)} "
                    f"adopted blocks exceed {kept} free slots"
                )
            return WNode(j_t, _block_order(kid_trees + leaves))
        selector = [i for i in blocks if p.m(ys.js[i]) <= m_t]
        if selector:
            i_t = max(selector)
        else:
            i_t = min(blocks)
            notes.append(
                f"no block at {pos} is lighter than the node; the first is kept"
            )
        later = [i for i in blocks if i > i_t]
        v_single = abs(_windowed_value(t.eta, t.interval, seq[i_t], a))
        v_rest = (
            abs(
                _windowed_value(
                    t.eta, t.interval, _sum_vectors([seq[i] for i in later]), a
                )
            )
            if later
            else Fraction(0)
        )
        if v_single > v_rest or not later:
            return WLeaf(1, zs[i_t])
        return WNode(j_t, [WLeaf(1, zs[i]) for i in later])

    f = assemble(())
    weighted = validate_w_tree(f, p)
    if isinstance(weighted, list):
        raise TransferError(
            "assembled tree leaves the norming set: " + "; ".join(weighted)
        )
    stray = [k for k in weighted.support() if k not in set(zs)]
    if stray:
        raise TransferError(f"support escapes the basis indices at {stray}")
    z = FinVector({k: Fraction(1) for k in zs})
    f_of_z = weighted.dot(z)
    report = Report("norming-set transfer", 96 * f_of_z)
    lower, upper = bd_norm_enclosure(y, a, allow_truncated=ys.allow_truncated)
    report.quantities["norm_lower"] = lower
    report.quantities["norm_upper"] = upper
    report.quantities["f_of_z"] = f_of_z
    report.quantities["best_gamma"] = Fraction(best.id)
    if not a.model_complete:
        notes.append("norm sides scanned on a truncated enumeration")
    report.settle(upper, lower)
    report.notes.extend(notes)
    report.notes.append("assert mode" if assert_mode else "report mode")
    if assert_mode and not report.passed:
        raise TransferError(
            f"growth hypotheses hold yet norm {rat_to_str(upper)} exceeds "
            f"96 f(z) = {rat_to_str(96 * f_of_z)}"
        )
    return f, report


def _block_order(trees: list[WTree]) -> list[WTree]:
    def low(t: WTree) -> int:
        if isinstance(t, WLeaf):
            return t.index
        return min(low(c) for c in t.children)

    return sorted(trees, key=low)


# -- lifting a norming functional to a node ---------------------------------------


def lift_to_node(
    f: WTree,
    ys: TwoLevelCert,
    a: GammaArena,
) -> tuple[Node, Report]:
    """An arena node gamma whose evaluation dominates the norming tree:
    f(z) <= 2^6 e*_gamma-side value on y, asserted exactly per node.

    The leaves of f, in block order, match the inner vectors of the
    two-level sequence in lexicographic order; z rebuilds the scaled
    basis averages from the leaf indices.  Each leaf is matched with the
    lowest-id arena node of rank inside its inner vector's range that
    evaluates it to at least 1/2 in absolute value.  Internal nodes are
    rebuilt through their evaluation analyses with chain ranks just past
    each child's support; at every built node the chain coordinates of y
    must vanish (the rank gaps put them between blocks) and the factor
    2^6 inequality must hold, both checked exactly.
    """
    pairs = [
        (i, k) for i in range(len(ys.inners)) for k in range(len(ys.inners[i]))
    ]
    leaves = _collect_leaves(f)
    if len(leaves) != len(pairs):
        raise ValueError(
            f"{len(leaves)} leaves for {len(pairs)} inner vectors"
        )
    p = a.params
    y = _sum_vectors(ys.ys)
    z = BDVector()
    for (i, _), leaf in zip(pairs, leaves):
        scale = Fraction(p.m(ys.js[i]), p.n(ys.js[i]))
        z = z + FinVector({leaf.index: scale})
    weighted = validate_w_tree(f, p)
    if isinstance(weighted, list):
        raise TransferError(
            "the tree leaves the norming set: " + "; ".join(weighted)
        )
    report = Report("node lifting", Fraction(0))
    a.require_rank(ys.depth)

    matches: dict[int, tuple[Node, int]] = {}
    for idx, leaf in enumerate(leaves):
        i, k = pairs[idx]
        y_p = ys.inners[i][k]
        rp = rng_vector(y_p, a)
        chosen = None
        best_val = Fraction(0)
        best_id = None
        for node in a.gamma_upto(min(ys.depth, a.horizon)):
            if not rp.lo <= node.rank <= rp.hi:
                continue
            v = eval_node(node, y_p, a)
            if abs(v) > best_val:
                best_val, best_id = abs(v), node.id
            if abs(v) >= Fraction(1, 2):
                chosen = (node, _sign_of(v))
                break
        if chosen is None:
            raise TransferError(
                f"no node of rank inside {rp} evaluates leaf {idx + 1} to "
                f"1/2; the best is {rat_to_str(best_val)} at node {best_id}"
            )
        matches[idx] = chosen

    counter = {"next": 0}

    def build(t: WTree) -> tuple[Node, int, int]:
        if isinstance(t, WLeaf):
            idx = counter["next"]
            counter["next"] += 1
            node, sign = matches[idx]
            i, k = pairs[idx]
            y_p = ys.inners[i][k]
            rp = rng_vector(y_p, a)
            er = rng_estar(node, a)
            window = er.intersect(IndexInterval(rp.lo, max(er.hi, rp.lo)))
            _check_factor(t, node, sign, window, y, z, p, a, report)
            return node, sign, rp.hi
        built_children = []
        for c in t.children:
            built_children.append((c, build(c)))
        entries = []
        prev_rank = 0
        for c, (cnode, csign, ctop) in built_children:
            chain_rank = ctop + 1 if isinstance(c, WLeaf) else cnode.rank + 1
            if chain_rank - 1 < prev_rank + 1:
                raise TransferError(
                    f"children of a j={t.j} node overlap in rank at {chain_rank}"
                )
            entries.append(
                (IndexInterval(prev_rank + 1, chain_rank - 1), csign, cnode.id)
            )
            prev_rank = chain_rank
        try:
            node = node_from_analysis(entries, t.j, a)
        except AnalysisError as exc:
            raise TransferError(f"lifted chain is not realizable: {exc}") from exc
        except ArenaHorizonError as exc:
            raise TransferError(
                f"arena horizon insufficient for the lifted node: {exc}"
            ) from exc
        for step, xi in enumerate(_chain_ids(node, a)):
            if y[xi] != 0:
                raise TransferError(
                    f"chain coordinate of y survives at step {step + 1} of "
                    f"node {node.id} (child {step + 1} of the j={t.j} node)"
                )
        _check_factor(t, node, 1, rng_estar(node, a), y, z, p, a, report)
        return node, 1, node.rank

    out = build(f)
    root = out[0]
    f_of_z = weighted.dot(z)
    root_val = report.quantities["root_value"]
    report.bound = 64 * root_val
    report.quantities["f_of_z"] = f_of_z
    report.settle(f_of_z, f_of_z)
    if not report.passed:
        raise TransferError(
            f"lifted node undershoots: f(z) = {rat_to_str(f_of_z)} > "
            f"2^6 * {rat_to_str(root_val)}"
        )
    return root, report


def _collect_leaves(t: WTree) -> list[WLeaf]:
    if isinstance(t, WLeaf):
        return [t]
    out = []
    for c in t.children:
        out.extend(_collect_leaves(c))
    return out


def _chain_ids(node: Node, a: GammaArena) -> list[int]:
    return [e.xi for e in evaluation_analysis(node, a).entries]


def _check_factor(
    t: WTree,
    node: Node,
    sign: int,
    window: Optional[IndexInterval],
    y: BDVector,
    z: BDVector,
    p: Params,
    a: GammaArena,
    report: Report,
) -> None:
    """Exact per-node check f_t(z) <= 2^6 sign * e*_node P_window (y)."""
    part = validate_w_tree(t, p)
    lhs = part.dot(z)
    rhs = (
        sign * _windowed_value(node, window, y, a)
        if window is not None
        else Fraction(0)
    )
    if lhs > 64 * rhs:
        raise TransferError(
            f"factor check fails at node {node.id}: f_t(z) = {rat_to_str(lhs)} "
            f"> 2^6 * {rat_to_str(rhs)}"
        )
    report.quantities["root_value"] = rhs
    report.notes.append(
        f"node {node.id}: f_t(z) = {rat_to_str(lhs)} <= 2^6 * {rat_to_str(rhs)}"
    )


# -- the equivalence report -------------------------------------------------------


class TransferReport:
    """Both certified norm sides of matched vectors, their observed
    ratios and the constants they are measured against."""

    def __init__(
        self,
        coefficients: list[Fraction],
        t_norm_value: Fraction,
        bd_lower: Fraction,
        bd_upper: Fraction,
        mode: str,
    ):
        self.coefficients = coefficients
        self.t_norm_value = t_norm_value
        self.bd_lower = bd_lower
        self.bd_upper = bd_upper
        self.mode = mode
        self.lower_const = Fraction(1, 2**7)
        self.upper_const = Fraction(2**10)
        self.lower_ratio: Optional[Fraction] = None
        self.upper_ratio: Optional[Fraction] = None
        self.passed_lower: Optional[bool] = None
        self.passed_upper: Optional[bool] = None
        self.notes: list[str] = []

    def to_json(self) -> dict:
        def opt(v: Optional[Fraction]) -> Optional[str]:
            return None if v is None else rat_to_str(v)

        return {
            "coefficients": [rat_to_str(c) for c in self.coefficients],
            "t_norm": rat_to_str(self.t_norm_value),
            "bd_lower": rat_to_str(self.bd_lower),
            "bd_upper": rat_to_str(self.bd_upper),
            "lower_ratio": opt(self.lower_ratio),
            "upper_ratio": opt(self.upper_ratio),
            "lower_const": rat_to_str(self.lower_const),
            "upper_const": rat_to_str(self.upper_const),
            "passed_lower": self.passed_lower,
            "passed_upper": self.passed_upper,
            "mode": self.mode,
            "notes": list(self.notes),
        }


def equivalence_report(
    coeffs: Sequence[Fraction],
    ys: TwoLevelCert,
    p: Params,
    a: GammaArena,
) -> TransferReport:
    """Certified norms of matched combinations on both sides and the
    observed ratios against 2^(-7) and 2^10.

    The mixed-space side takes fresh scaled basis averages z_i at the
    outer families; the node side encloses norm(sum a_i y_i).  Ratios
    are computed from certified sides only and left undefined when the
    base norm vanishes.  Mode is "assert" exactly when the growth
    report passes on every family the instance touches; failed
    comparisons are recorded, never raised.
    """
    if len(coeffs) != len(ys.ys):
        raise ValueError(
            f"{len(coeffs)} coefficients for {len(ys.ys)} outer vectors"
        )
    coeffs = [Fraction(c) for c in coeffs]
    next_k = 1
    z = FinVector()
    for i, c in enumerate(coeffs):
        width = p.n(ys.js[i])
        z_i = basis_average(ys.js[i], range(next_k, next_k + width), p)
        next_k += width
        z = z + z_i.scale(c)
    z_norm = t_norm(z, p)
    y = _sum_vectors([v.scale(c) for v, c in zip(ys.ys, coeffs)])
    lower, upper = bd_norm_enclosure(y, a, allow_truncated=ys.allow_truncated)
    touched = set(ys.js)
    for js in ys.inner_js:
        touched.update(js)
    growth = validate_params(p)
    mode = "assert"
    if not growth.base_ok:
        mode = "report"
    for j in touched:
        if j >= 2 and not growth.steps[j - 2].ok:
            mode = "report"
    report = TransferReport(coeffs, z_norm, lower, upper, mode)
    if z_norm == 0:
        report.notes.append("base norm vanishes; the ratios are undefined")
    else:
        report.lower_ratio = lower / z_norm
        report.upper_ratio = upper / z_norm
        report.passed_lower = report.lower_const * z_norm <= lower
        report.passed_upper = upper <= report.upper_const * z_norm
    if not a.model_complete:
        report.notes.append("node side scanned on a truncated enumeration")
    if mode == "report":
        report.notes.append("growth hypotheses fail; comparisons are observational")
    return report
