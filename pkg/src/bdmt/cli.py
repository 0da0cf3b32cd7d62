"""Command line front end: configuration, serialization, experiment suites.

Every artifact is deterministic: rationals are rendered as "p/q" strings
(never floats), JSON is written with sorted keys, CSV files open with a
versioned column header comment, and all random draws come from a single
`random.Random(seed)`.  Rerunning a suite with the same configuration and
seed reproduces the artifact bytes exactly.

Exit codes: 0 all checks pass (or report mode), 1 an assert-mode check
fails, 2 usage, configuration, or IO error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .analyses import (
    AnalysisError,
    ApproximationError,
    evaluation_analysis,
    i_analysis,
    node_from_analysis,
    tree_analysis,
)
from .arena import (
    ArenaHorizonError,
    GammaArena,
    TruncatedArenaError,
    bd_norm_enclosure,
    build_arena,
    check_biorthogonality,
    estar_dcoords,
    eval_node,
    export_arena,
    import_arena,
    project_rank,
)
from .params import (
    FinVector,
    IndexInterval,
    ParameterHorizonError,
    Params,
    rat_from_str,
    rat_to_str,
)
from .ris import (
    RISConstructionError,
    build_two_level_ris,
    check_basic_inequality,
    verify_ris,
)
from .transfer import (
    TransferError,
    check_bdp_estimate,
    equivalence_report,
    extract_w_functional,
    lift_to_node,
    make_comparable,
)
from .tsirelson import (
    SupportCapError,
    brute_force_norm,
    t_norm,
    t_norm_witness,
    wtree_from_json,
    wtree_to_json,
)

CSV_VERSION = "columns-v1"

SUITES = (
    "oracle-equivalence",
    "biorthogonality",
    "analyses-roundtrip",
    "ris",
    "transfer",
    "equivalence",
)

# weight/width families small enough that every desk construction below
# (tall arenas, width-2 averages, heavy synthesized nodes) stays buildable
RELAXED_FAMILIES = [
    (4, 2), (8, 3), (16, 4), (32, 5), (64, 6), (128, 7), (256, 8), (512, 9),
]

_COEFF_PALETTE = (
    Fraction(2), Fraction(1), Fraction(1, 2),
    Fraction(-2), Fraction(-1), Fraction(-1, 2),
)


class ConfigError(Exception):
    """Bad configuration or malformed input artifact."""


# -- configuration and small codecs -------------------------------------------


def _rat(obj) -> Fraction:
    if isinstance(obj, bool) or isinstance(obj, float):
        raise ConfigError(f"rationals must be integers or 'p/q' strings: {obj!r}")
    if isinstance(obj, int):
        return Fraction(obj)
    if isinstance(obj, str):
        try:
            return rat_from_str(obj)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad rational {obj!r}: {exc}") from exc
    raise ConfigError(f"bad rational {obj!r}")


def _vec(obj) -> FinVector:
    if not isinstance(obj, dict):
        raise ConfigError(f"a vector is a JSON object of index -> 'p/q': {obj!r}")
    try:
        coords = {int(k): _rat(v) for k, v in obj.items()}
    except ValueError as exc:
        raise ConfigError(f"bad vector index: {exc}") from exc
    return FinVector(coords)


def vec_json(x: FinVector) -> dict:
    return {str(k): rat_to_str(v) for k, v in sorted(x.coords.items())}


def _vec_cell(x: FinVector) -> str:
    if x.is_zero:
        return "0"
    return " ".join(f"{k}:{rat_to_str(v)}" for k, v in sorted(x.coords.items()))


def node_json(n) -> dict:
    return {
        "id": n.id,
        "rank": n.rank,
        "base": n.base,
        "j": n.weight_j,
        "sign": n.sign,
        "target": n.target,
        "age": n.age,
    }


def _load_obj(arg: str):
    """Inline JSON when the argument looks like JSON, else a file path."""
    text = arg.strip()
    if not text.startswith(("{", "[")):
        try:
            text = Path(arg).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {arg}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {arg}: {exc}") from exc


def load_params(spec: Optional[str], default: str = "official:5") -> Params:
    """Families from 'official:N', inline JSON, or a JSON file.

    The JSON form is a list of [m, n] pairs, or an object with a
    "families" key holding one.
    """
    if spec is None:
        spec = default
    if isinstance(spec, str) and spec.startswith("official:"):
        try:
            return Params.official(int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad parameter spec {spec!r}: {exc}") from exc
    obj = _load_obj(spec) if isinstance(spec, str) else spec
    if isinstance(obj, dict):
        obj = obj.get("families")
    if not isinstance(obj, list):
        raise ConfigError("parameter files hold a list of [m, n] pairs")
    try:
        return Params([(int(m), int(n)) for m, n in obj])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad families: {exc}") from exc


def write_csv(path, columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}: {','.join(columns)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())
    return str(path)


def write_json(path, obj) -> str:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return str(path)


def export_gamma(a: GammaArena, path) -> str:
    Path(path).write_text(export_arena(a))
    return str(path)


def import_gamma(path, p: Params) -> GammaArena:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read arena file: {exc}") from exc
    if not text.strip():
        raise ConfigError(f"{path}: empty arena export")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{lineno}: malformed arena line: {exc}"
            ) from exc
    try:
        return import_arena(text, p)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


class ExperimentConfig:
    """One suite run; a fixed seed makes the artifacts byte-identical."""

    def __init__(
        self,
        name: str,
        params_path: Optional[str] = None,
        ranks: Optional[int] = None,
        level_cap: Optional[int] = None,
        out_dir: str = "out",
        mode: str = "assert",
        seed: int = 0,
    ):
        if name not in SUITES and name != "all":
            raise ConfigError(
                f"unknown suite {name!r}; pick one of {', '.join(SUITES)} or all"
            )
        if mode not in ("assert", "report"):
            raise ConfigError(f"mode must be assert or report, got {mode!r}")
        self.name = name
        self.params_path = params_path
        self.ranks = ranks
        self.level_cap = level_cap
        self.out_dir = out_dir
        self.mode = mode
        self.seed = int(seed)

    def params(self, default: str = "official:5") -> Params:
        if self.params_path is None and default == "relaxed":
            return Params(RELAXED_FAMILIES)
        return load_params(self.params_path, default)


# -- suites --------------------------------------------------------------------


def _suite_oracle(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    p = cfg.params(default="[[2,2],[4,3]]")
    rng = random.Random(cfg.seed)
    rows = []
    ok = True
    for _ in range(200):
        size = rng.randint(1, 6)
        support = sorted(rng.sample(range(1, 25), size))
        x = FinVector({k: rng.choice(_COEFF_PALETTE) for k in support})
        dp = t_norm(x, p)
        brute = brute_force_norm(x, p)
        same = dp == brute
        ok = ok and same
        rows.append([_vec_cell(x), rat_to_str(dp), rat_to_str(brute), int(same)])
    path = write_csv(
        Path(cfg.out_dir) / "oracle-equivalence.csv",
        ("vector", "dp", "brute", "equal"),
        rows,
    )
    return ok, [path]


def _suite_biorthogonality(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    p = cfg.params()
    a = build_arena(p, cfg.ranks or 4, level_cap=cfg.level_cap)
    ok, bad = check_biorthogonality(a, a.horizon)
    artifact = {
        "ok": ok,
        "horizon": a.horizon,
        "nodes": a.size,
        "complete": a.model_complete,
        "first_bad_pair": list(bad) if bad else None,
    }
    path = write_json(Path(cfg.out_dir) / "biorthogonality.json", artifact)
    return ok, [path]


def _suite_analyses(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    p = cfg.params()
    a = build_arena(p, cfg.ranks or 4, level_cap=cfg.level_cap)
    rows = []
    ok = True
    for n in a.gamma_upto(a.horizon):
        if n.is_primitive:
            continue
        ea = evaluation_analysis(n, a)
        rebuilt = node_from_analysis(
            [(e.interval, e.sign, e.eta) for e in ea.entries], n.weight_j, a
        )
        recon = FinVector()
        share = Fraction(1, p.m(n.weight_j))
        for e in ea.entries:
            recon = recon + FinVector({e.xi: Fraction(1)})
            piece = project_rank(
                estar_dcoords(e.eta, a), e.interval.lo - 1, e.interval.hi, a
            )
            recon = recon + piece.scale(share * e.sign)
        inverted = rebuilt.id == n.id
        exact = recon == estar_dcoords(n, a)
        ok = ok and inverted and exact
        rows.append([n.id, n.age, int(inverted), int(exact)])
    path = write_csv(
        Path(cfg.out_dir) / "analyses-roundtrip.csv",
        ("gamma", "age", "inverted", "estar_exact"),
        rows,
    )
    return ok, [path]


def _default_ris_blocks(a: GammaArena, js: Sequence[int]) -> list[FinVector]:
    """One d-basis block per rank, supported on a node heavy enough for
    its growth index: primitive, or weight family with m >= m_{j_i}."""
    p = a.params
    blocks = []
    for i, j in enumerate(js):
        rank = i + 1
        pick = next(
            (
                n
                for n in a.level(rank)
                if n.is_primitive or p.m(n.weight_j) >= p.m(j)
            ),
            None,
        )
        if pick is None:
            raise ConfigError(f"no node at rank {rank} is heavy enough for j={j}")
        blocks.append(FinVector({pick.id: Fraction(1)}))
    return blocks


def _suite_ris(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    p = cfg.params()
    a = build_arena(p, cfg.ranks or 5, level_cap=cfg.level_cap or 100_000)
    js = tuple(range(1, min(p.horizon, p.n(1)) + 1))
    if len(js) != p.n(1):
        raise ConfigError(
            f"the width-n_1 average needs {p.n(1)} families, have {p.horizon}"
        )
    xs = _default_ris_blocks(a, js)
    allow = not a.model_complete
    res = verify_ris(xs, 3, js, a, a.horizon, allow_truncated=allow)
    artifact: dict = {
        "params": cfg.params_path or "official:5",
        "js": list(js),
        "C": "3/1",
        "blocks": [vec_json(x) for x in xs],
    }
    if isinstance(res, list):
        artifact["failures"] = res
        path = write_json(Path(cfg.out_dir) / "ris.json", artifact)
        return False, [path]
    norm_rep, heavy_rep = check_basic_inequality(1, res, a, a.horizon, allow)
    artifact["weighted_average_norm"] = norm_rep.to_json()
    artifact["heavy_node_evaluations"] = heavy_rep.to_json()
    path = write_json(Path(cfg.out_dir) / "ris.json", artifact)
    return norm_rep.passed and heavy_rep.passed, [path]


DEFAULT_SCENARIO = {
    "ranks": 8,
    "cap": 2500,
    "depth": 6,
    "C": 3,
    "inner_js": [2, 3],
    "inserts": [[2, None, 2, 1, 1], [5, None, 3, 1, 1]],
    "blocks": None,
    "zs": [1, 2],
    "outer_js": [1],
    "lift": {"j": 1, "children": [{"sign": 1, "index": 1},
                                  {"sign": 1, "index": 2}]},
    "coefficient_sets": None,
}


def _run_desk_scenario(p: Params, spec: dict, seed: int) -> dict:
    """The full constructive chain on one configuration: inner RIS, norming
    functional extraction, two-level certificate, lifting, chain-mass
    check, comparability surgery, and equivalence reports."""
    merged = {**DEFAULT_SCENARIO, **spec}
    a = build_arena(p, int(merged["ranks"]), level_cap=merged["cap"])
    inserted = _apply_inserts(a, merged["inserts"])
    if merged["blocks"] is None:
        xs = [FinVector({gid: Fraction(1)}) for gid in inserted]
    else:
        xs = [_vec(obj) for obj in merged["blocks"]]
    C = _rat(merged["C"])
    js = tuple(int(j) for j in merged["inner_js"])
    depth = int(merged["depth"])
    inner = verify_ris(xs, C, js, a, depth, allow_truncated=True)
    out: dict = {
        "arena": {"horizon": a.horizon, "nodes": a.size,
                  "complete": a.model_complete},
        "inserted": inserted,
    }
    if isinstance(inner, list):
        out["ris_failures"] = inner
        return out
    zs = [int(k) for k in merged["zs"]]
    f, rep_extract = extract_w_functional(inner, zs, a, p)
    out["extract"] = {"functional": wtree_to_json(f),
                      "report": rep_extract.to_json()}
    cert = build_two_level_ris(
        [(int(j), inner) for j in merged["outer_js"]], a, depth,
        allow_truncated=True,
    )
    out["two_level"] = {
        "cs": [rat_to_str(c) for c in cert.cs],
        "C": rat_to_str(Fraction(cert.C)),
        "js": list(cert.js),
        "depth": cert.depth,
    }
    lift_tree = wtree_from_json(merged["lift"])
    node, rep_lift = lift_to_node(lift_tree, cert, a)
    out["lift"] = {"node": node_json(node), "report": rep_lift.to_json()}
    ones = [Fraction(1)] * len(cert.ys)
    out["chain_mass"] = check_bdp_estimate(node, cert, ones, a).to_json()
    comp = make_comparable(node, inner, a)
    out["comparability"] = comp.to_json()
    sets = merged["coefficient_sets"]
    if sets is None:
        rng = random.Random(seed)
        sets = [
            [rat_to_str(rng.choice(_COEFF_PALETTE)) for _ in cert.ys]
            for _ in range(3)
        ]
    out["equivalence"] = [
        equivalence_report([_rat(c) for c in coeffs], cert, p, a).to_json()
        for coeffs in sets
    ]
    return out


def _scenario_ok(out: dict, what: str) -> bool:
    if "ris_failures" in out:
        return False
    if what == "equivalence":
        for er in out["equivalence"]:
            if er["mode"] == "assert" and not (
                er["passed_lower"] and er["passed_upper"]
            ):
                return False
        return True
    return (
        out["extract"]["report"]["passed"]
        and out["lift"]["report"]["passed"]
        and out["chain_mass"]["passed"]
        and out["comparability"]["inequality_holds"]
    )


def _suite_transfer(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    p = cfg.params(default="relaxed")
    spec: dict = {}
    if cfg.ranks is not None:
        spec["ranks"] = cfg.ranks
    if cfg.level_cap is not None:
        spec["cap"] = cfg.level_cap
    out = _run_desk_scenario(p, spec, cfg.seed)
    path = write_json(Path(cfg.out_dir) / f"{cfg.name}.json", out)
    return _scenario_ok(out, cfg.name), [path]


SUITE_RUNNERS = {
    "oracle-equivalence": _suite_oracle,
    "biorthogonality": _suite_biorthogonality,
    "analyses-roundtrip": _suite_analyses,
    "ris": _suite_ris,
    "transfer": _suite_transfer,
    "equivalence": _suite_transfer,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run the named suite (or all of them), writing artifacts under the
    output directory; nonzero only when an assert-mode check fails."""
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    names = SUITES if cfg.name == "all" else (cfg.name,)
    status = 0
    for name in names:
        sub = ExperimentConfig(
            name,
            params_path=cfg.params_path,
            ranks=cfg.ranks,
            level_cap=cfg.level_cap,
            out_dir=cfg.out_dir,
            mode=cfg.mode,
            seed=cfg.seed,
        )
        ok, artifacts = SUITE_RUNNERS[name](sub)
        verdict = "pass" if ok else ("reported" if cfg.mode == "report" else "FAIL")
        print(f"suite {name}: {verdict} ({', '.join(artifacts)})")
        if not ok and cfg.mode == "assert":
            status = 1
    return status


# -- subcommands ---------------------------------------------------------------


def _arena_for(args, default_ranks: int = 4) -> tuple[Params, GammaArena]:
    p = load_params(args.params)
    ranks = args.ranks if args.ranks is not None else default_ranks
    a = build_arena(p, ranks, level_cap=args.cap)
    return p, a


def cmd_build_gamma(args) -> int:
    p, a = _arena_for(args)
    counts = [len(a.level(r)) for r in range(1, a.horizon + 1)]
    print(
        f"gamma built: horizon={a.horizon} nodes={a.size} "
        f"complete={a.model_complete} level_counts={counts}"
    )
    if args.out:
        print(f"exported to {export_gamma(a, args.out)}")
    return 0


def cmd_tnorm(args) -> int:
    p = load_params(args.params)
    x = _vec(_load_obj(args.vec))
    print(rat_to_str(t_norm(x, p)))
    if args.witness:
        print(json.dumps(wtree_to_json(t_norm_witness(x, p)), sort_keys=True))
    return 0


def cmd_bdnorm(args) -> int:
    p, a = _arena_for(args)
    x = _vec(_load_obj(args.vec))
    lower, upper = bd_norm_enclosure(x, a, allow_truncated=args.allow_truncated)
    print(json.dumps(
        {"lower": rat_to_str(lower), "upper": rat_to_str(upper)},
        sort_keys=True,
    ))
    return 0


def cmd_eval_node(args) -> int:
    p, a = _arena_for(args)
    x = _vec(_load_obj(args.vec))
    print(rat_to_str(eval_node(args.gamma, x, a)))
    return 0


def cmd_analyze_node(args) -> int:
    p, a = _arena_for(args)
    ea = evaluation_analysis(args.gamma, a)
    tree = tree_analysis(args.gamma, a)

    def entry_json(e):
        return {
            "interval": [e.interval.lo, e.interval.hi],
            "sign": e.sign,
            "eta": e.eta,
            "xi": e.xi,
        }

    obj = {
        "gamma": args.gamma,
        "entries": [entry_json(e) for e in ea.entries],
        "tree": tree.to_json(),
    }
    if args.interval:
        try:
            lo, hi = (int(s) for s in args.interval.split(","))
        except ValueError as exc:
            raise ConfigError(f"--interval takes lo,hi: {exc}") from exc
        window = IndexInterval(lo, hi)
        clipped = i_analysis(args.gamma, window, a)
        obj["i_analysis"] = {
            "interval": [lo, hi],
            "indecomposable": not clipped,
            "entries": [entry_json(e) for e in clipped],
        }
    if args.out:
        print(write_json(args.out, obj))
    else:
        print(json.dumps(obj, sort_keys=True, indent=2))
    return 0


def _parse_js(arg: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in arg.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"--js takes comma-separated integers: {exc}") from exc


def _apply_inserts(a: GammaArena, rows) -> list[int]:
    ids = []
    for rank, base, j, sign, target in rows:
        n = a.insert_node(int(rank), base, int(j), int(sign), int(target))
        ids.append(n.id)
    return ids


def cmd_ris_check(args) -> int:
    p, a = _arena_for(args, default_ranks=5)
    if args.inserts:
        _apply_inserts(a, _load_obj(args.inserts))
    blocks = _load_obj(args.vecs)
    if not isinstance(blocks, list):
        raise ConfigError("--vecs takes a JSON list of vectors")
    xs = [_vec(obj) for obj in blocks]
    depth = args.depth if args.depth is not None else a.horizon
    res = verify_ris(
        xs, _rat(args.c), _parse_js(args.js), a, depth,
        allow_truncated=args.allow_truncated,
    )
    if isinstance(res, list):
        for line in res:
            print(f"FAIL {line}")
        return 1
    print(json.dumps(
        {"C": rat_to_str(Fraction(res.C)), "js": list(res.js),
         "depth": res.depth, "blocks": len(res.xs)},
        sort_keys=True,
    ))
    return 0


def cmd_two_level_build(args) -> int:
    p, a = _arena_for(args, default_ranks=5)
    spec = _load_obj(args.spec)
    _apply_inserts(a, spec.get("inserts", []))
    inners = []
    depth = args.depth if args.depth is not None else a.horizon
    for k, inner in enumerate(spec.get("inners", [])):
        res = verify_ris(
            [_vec(o) for o in inner["blocks"]],
            _rat(inner.get("C", args.c)),
            tuple(int(j) for j in inner["js"]),
            a,
            depth,
            allow_truncated=args.allow_truncated,
        )
        if isinstance(res, list):
            for line in res:
                print(f"FAIL inner {k}: {line}")
            return 1
        inners.append(res)
    pairs = [(int(j), inners[int(k)]) for j, k in spec["pairs"]]
    try:
        cert = build_two_level_ris(
            pairs, a, depth, allow_truncated=args.allow_truncated
        )
    except RISConstructionError as exc:
        print(f"FAIL {exc}")
        return 1
    print(json.dumps(
        {
            "cs": [rat_to_str(c) for c in cert.cs],
            "C": rat_to_str(Fraction(cert.C)),
            "js": list(cert.js),
            "depth": cert.depth,
        },
        sort_keys=True,
    ))
    return 0


def cmd_basic_ineq(args) -> int:
    p, a = _arena_for(args, default_ranks=5)
    if args.vecs:
        blocks = [_vec(o) for o in _load_obj(args.vecs)]
        js = _parse_js(args.js) if args.js else tuple(
            range(1, len(blocks) + 1)
        )
    else:
        js = _parse_js(args.js) if args.js else tuple(
            range(1, min(p.horizon, p.n(args.j)) + 1)
        )
        blocks = _default_ris_blocks(a, js)
    depth = args.depth if args.depth is not None else a.horizon
    res = verify_ris(
        blocks, _rat(args.c), js, a, depth,
        allow_truncated=args.allow_truncated,
    )
    if isinstance(res, list):
        for line in res:
            print(f"FAIL {line}")
        return 1
    norm_rep, heavy_rep = check_basic_inequality(
        args.j, res, a, depth, args.allow_truncated
    )
    print(json.dumps(norm_rep.to_json(), sort_keys=True))
    print(json.dumps(heavy_rep.to_json(), sort_keys=True))
    if args.mode == "report":
        return 0
    return 0 if norm_rep.passed and heavy_rep.passed else 1


def cmd_transfer(args) -> int:
    p = load_params(args.params) if args.params else Params(RELAXED_FAMILIES)
    spec = _load_obj(args.spec) if args.spec else {}
    out = _run_desk_scenario(p, spec, args.seed)
    if args.out:
        print(write_json(args.out, out))
    else:
        print(json.dumps(out, sort_keys=True, indent=2))
    what = "equivalence" if args.command == "equivalence" else "transfer"
    if "ris_failures" in out:
        return 1
    if args.mode == "report":
        return 0
    return 0 if _scenario_ok(out, what) else 1


def cmd_run_suite(args) -> int:
    cfg = ExperimentConfig(
        args.name,
        params_path=args.params,
        ranks=args.ranks,
        level_cap=args.cap,
        out_dir=args.out,
        mode=args.mode,
        seed=args.seed,
    )
    return run_experiment(cfg)


# -- parser --------------------------------------------------------------------


def _add_common(sub, *, ranks=False, depth=False, mode=False, vec=False):
    sub.add_argument("--params", help="families: official:N, JSON, or a file")
    if ranks:
        sub.add_argument("--ranks", type=int, help="ranks to build")
        sub.add_argument("--cap", type=int, help="level size cap")
        sub.add_argument(
            "--allow-truncated", action="store_true",
            help="let certified scans run on truncated levels",
        )
    if depth:
        sub.add_argument("--depth", type=int, help="scan depth (default: horizon)")
    if mode:
        sub.add_argument(
            "--mode", choices=("assert", "report"), default="assert",
            help="fail on broken checks, or only report quantities",
        )
    if vec:
        sub.add_argument(
            "--vec", required=True,
            help='vector as JSON {"index": "p/q", ...} or a file',
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdmt",
        description=(
            "Exact-arithmetic desk models of mixed Tsirelson norms and "
            "their Bourgain-Delbaen relatives."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("build-gamma", help="build and export a node arena")
    _add_common(s, ranks=True)
    s.add_argument("--out", help="write the arena as JSON lines")
    s.set_defaults(func=cmd_build_gamma)

    s = subs.add_parser("tnorm", help="exact mixed Tsirelson norm")
    _add_common(s, vec=True)
    s.add_argument("--witness", action="store_true", help="print a witness tree")
    s.set_defaults(func=cmd_tnorm)

    s = subs.add_parser("bdnorm", help="certified norm enclosure on the arena")
    _add_common(s, ranks=True, vec=True)
    s.set_defaults(func=cmd_bdnorm)

    s = subs.add_parser("eval-node", help="evaluate e*_gamma on a vector")
    _add_common(s, ranks=True, vec=True)
    s.add_argument("--gamma", type=int, required=True, help="node id")
    s.set_defaults(func=cmd_eval_node)

    s = subs.add_parser("analyze-node", help="evaluation analysis and tree")
    _add_common(s, ranks=True)
    s.add_argument("--gamma", type=int, required=True, help="node id")
    s.add_argument("--interval", help="clip window lo,hi for an I-analysis")
    s.add_argument("--out", help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_analyze_node)

    s = subs.add_parser("ris-check", help="verify a rapidly increasing sequence")
    _add_common(s, ranks=True, depth=True)
    s.add_argument("--vecs", required=True, help="JSON list of vectors or a file")
    s.add_argument("--c", default="3", help="RIS constant C (default 3)")
    s.add_argument("--js", required=True, help="growth indices, comma-separated")
    s.add_argument(
        "--inserts",
        help="JSON list of [rank, base, j, sign, target] nodes to synthesize",
    )
    s.set_defaults(func=cmd_ris_check)

    s = subs.add_parser("two-level-build", help="build a two-level certificate")
    _add_common(s, ranks=True, depth=True)
    s.add_argument("--spec", required=True, help="JSON spec or a file")
    s.add_argument("--c", default="3", help="default RIS constant")
    s.set_defaults(func=cmd_two_level_build)

    s = subs.add_parser(
        "basic-ineq", help="weighted average of a RIS against 10C"
    )
    _add_common(s, ranks=True, depth=True, mode=True)
    s.add_argument("--j", type=int, default=1, help="averaging family")
    s.add_argument("--c", default="3", help="RIS constant C (default 3)")
    s.add_argument("--js", help="growth indices, comma-separated")
    s.add_argument("--vecs", help="JSON list of vectors or a file")
    s.set_defaults(func=cmd_basic_ineq)

    for name in ("transfer", "equivalence"):
        s = subs.add_parser(
            name, help=f"run the constructive {name} chain on one scenario"
        )
        s.add_argument("--params", help="families (default: relaxed desk set)")
        s.add_argument("--spec", help="scenario JSON or a file")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", help="write JSON here instead of stdout")
        s.add_argument(
            "--mode", choices=("assert", "report"), default="assert"
        )
        s.set_defaults(func=cmd_transfer)

    s = subs.add_parser("run-suite", help="run a named experiment suite")
    s.add_argument("--name", required=True, help=f"one of {', '.join(SUITES)} or all")
    s.add_argument("--params", help="families: official:N, JSON, or a file")
    s.add_argument("--ranks", type=int)
    s.add_argument("--cap", type=int)
    s.add_argument("--mode", choices=("assert", "report"), default="assert")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out", help="artifact directory")
    s.set_defaults(func=cmd_run_suite)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except (
        ValueError,
        KeyError,
        ParameterHorizonError,
        ArenaHorizonError,
        TruncatedArenaError,
        AnalysisError,
        ApproximationError,
        RISConstructionError,
        SupportCapError,
        TransferError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
