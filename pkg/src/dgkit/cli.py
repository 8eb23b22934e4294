"""``dg``: command-line front end.

Data (JSON or CSV) goes to stdout or ``--out``; logs and errors go to
stderr. Exit status is 0 on success, including well-posed NO answers,
1 on domain or I/O errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from . import bp, core, embed, linalg, percolation, rigidity, udgp
from .errors import DgError, ParseError

log = logging.getLogger("dgkit")


def _read(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None


# -- subcommands ------------------------------------------------------------

def cmd_convert(args) -> str:
    data = _json(_read(args.inp))
    if isinstance(data, dict) and "x" in data:
        x = core.realization_from_dict(data)
        if args.to == "sqedm":
            return core.dump_matrix(linalg.sqedm_from_realization(x))
        if args.to == "instance":
            pairs = [(u, v) for u in range(x.n) for v in range(u + 1, x.n)]
            return core.dump_instance(core.instance_from_realization(x, pairs))
        if args.to == "distances":
            d = core.pairwise_distances(x.coords)
            vals = sorted(float(d[u, v]) for u in range(x.n) for v in range(u + 1, x.n))
            return udgp.dump_distance_list(udgp.DistanceList(x.K, x.n, tuple(vals)))
        return core.dump_realization(x)
    if isinstance(data, dict) and "edges" in data:
        inst = core.load_instance(json.dumps(data))
        if args.to not in (None, "instance"):
            raise ParseError(f"an instance can only be converted to 'instance', not {args.to!r}")
        return core.dump_instance(inst)
    raise ParseError("convert expects a realization (field 'x') or an instance (field 'edges')")


def cmd_validate(args) -> str:
    inst = core.load_instance(_read(args.inp))
    x = core.load_realization(_read(args.x))
    rep = core.validate(inst, x, args.tol)
    return core.dumps({
        "ok": rep.ok,
        "max_abs_error": rep.max_abs_error,
        "mean_sq_error": rep.mean_sq_error,
        "violated_edges": [{"u": u + 1, "v": v + 1, "realized": d} for u, v, d in rep.violated_edges],
    })


def cmd_edm2gram(args) -> str:
    return core.dump_matrix(linalg.gram_from_sqedm(core.load_matrix(_read(args.inp))))


def cmd_gram2x(args) -> str:
    return core.dump_realization(linalg.realize_from_gram(core.load_matrix(_read(args.inp)), args.dim, args.tol))


def cmd_rank(args) -> str:
    M = core.load_matrix(_read(args.inp))
    return core.dumps({"rank": linalg.numerical_rank(M, args.tol_factor),
                       "singular_values": linalg.singular_values(M).tolist()})


def cmd_rigidity(args) -> str:
    inst = core.load_instance(_read(args.inp))
    K = args.dim or inst.K
    if args.mode == "framework":
        if args.x is None:
            raise ParseError("--mode framework needs a realization via --x")
        x = core.load_realization(_read(args.x))
        if K != inst.K:
            inst = core.DgpInstance(inst.n, K, inst.edges)
        return core.dumps(rigidity.infinitesimal_rigidity(core.Framework(inst, x)).to_dict())
    if args.mode == "generic":
        return core.dumps(rigidity.generic_rigidity(inst, K, args.trials, args.seed).to_dict())
    if args.mode == "laman":
        return core.dumps({"laman": rigidity.count_condition(inst, 2)})
    if args.mode == "pebble":
        verdict, comps = rigidity.pebble_game_2_3(inst)
        return core.dumps({"verdict": verdict.value, "components": [[v + 1 for v in c] for c in comps]})
    return core.dumps({"globally_rigid": rigidity.globally_rigid(inst, K, args.trials, args.seed),
                       "kind": "generic (probabilistic)"})


def cmd_solve_bp(args) -> str:
    inst = core.load_instance(_read(args.inp))
    max_solutions = 1 if args.first else args.max_solutions
    opts = bp.BPOptions(tol=args.tol, max_solutions=max_solutions,
                        fix_reflection=args.fix_reflection, jobs=args.jobs)
    sols = bp.bp_solve(inst, opts)
    log.info("bp: %d solution(s), %d pruned", len(sols), sols.pruned_count)
    out = sols.to_dict()
    if not args.stats:
        del out["tree_stats"]
    return core.dumps(out)


def cmd_udgp_tribond(args) -> str:
    lst = udgp.load_distance_list(_read(args.inp))
    res = udgp.tribond(lst, args.tol, args.timeout_seconds)
    log.info("tribond: %s after %d nodes", res.status, res.nodes)
    out = res.to_dict()
    out["K"], out["n"] = lst.K, lst.n
    return core.dumps(out)


def cmd_reduce_partition(args) -> str:
    data = _json(_read(args.inp))
    if isinstance(data, dict):
        data = data.get("a")
    if not isinstance(data, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in data):
        raise ParseError("expected a JSON list of integers (or an object with field 'a')")
    return core.dump_instance(embed.partition_to_edgp1(data))


def cmd_embed_frechet(args) -> str:
    data = _json(_read(args.inp))
    if isinstance(data, dict) and "d" not in data and "m" in data:
        data = {"n": data.get("n"), "d": data["m"]}
    metric = embed.load_metric(json.dumps(data))
    return core.dump_realization(embed.frechet_embed(metric))


def cmd_jll(args) -> str:
    data = _json(_read(args.inp))
    pts = data.get("points") if isinstance(data, dict) else data
    if not isinstance(pts, list):
        raise ParseError("expected a JSON list of points (or an object with field 'points')")
    try:
        X = np.array(pts, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad points: {exc}") from None
    if X.ndim != 2:
        raise ParseError("points must be rows of equal length")
    Y, report = embed.jll_project(X, args.epsilon, args.seed, args.constant)
    return core.dumps({"K": report.K_used, "points": Y.tolist(), "report": report.to_dict()})


def cmd_percolate(args) -> str:
    if args.gnp is not None:
        patch = percolation.gnp_patch(args.gnp)
    else:
        if args.rows is None or args.cols is None:
            raise ParseError("--patch triangular needs --rows and --cols")
        patch = percolation.triangular_patch(args.rows, args.cols)
    try:
        ps = [float(s) for s in args.p_list.split(",") if s.strip()]
    except ValueError:
        raise ParseError(f"bad --p-list {args.p_list!r}") from None
    rows = percolation.sweep(patch, ps, args.trials, args.seed, args.jobs, args.spanning,
                             args.process, args.max_steps)
    return percolation.sweep_csv(rows)


# -- parser ------------------------------------------------------------------

def _io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="inp", metavar="PATH", help="input file (default: stdin)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dg", description="Distance geometry toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log to stderr (repeat for more)")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("convert", help="convert a realization to another format, or normalize an instance")
    _io(p)
    p.add_argument("--to", choices=["realization", "instance", "sqedm", "distances"])
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="check a realization against an instance")
    _io(p)
    p.add_argument("--x", required=True, metavar="PATH", help="realization JSON")
    p.add_argument("--tol", type=float, default=core.DEFAULT_TOL)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("edm2gram", help="squared EDM to centered Gram matrix")
    _io(p)
    p.set_defaults(func=cmd_edm2gram)

    p = sub.add_parser("gram2x", help="factor a Gram matrix into a realization")
    _io(p)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--tol", type=float, default=core.DEFAULT_TOL)
    p.set_defaults(func=cmd_gram2x)

    p = sub.add_parser("rank", help="numerical rank and singular values of a matrix")
    _io(p)
    p.add_argument("--tol-factor", type=float, default=linalg.RANK_TOL_FACTOR)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("rigidity", help="rigidity tests")
    _io(p)
    p.add_argument("--dim", type=_positive_int, help="dimension K (default: the instance's K)")
    p.add_argument("--mode", choices=["framework", "generic", "laman", "pebble", "global"], default="generic")
    p.add_argument("--x", metavar="PATH", help="realization JSON for --mode framework")
    p.add_argument("--trials", type=_positive_int, default=rigidity.DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rigidity)

    p = sub.add_parser("solve-bp", help="Branch-and-Prune on a discretizable instance")
    _io(p)
    p.add_argument("--tol", type=float, default=core.DEFAULT_TOL)
    p.add_argument("--max-solutions", type=_positive_int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--all", dest="first", action="store_false", help="enumerate every solution (default)")
    g.add_argument("--first", dest="first", action="store_true", help="stop at the first solution")
    p.add_argument("--fix-reflection", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--stats", action="store_true", help="include tree statistics")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_solve_bp, first=False)

    p = sub.add_parser("udgp-tribond", help="realize an unassigned distance list")
    _io(p)
    p.add_argument("--tol", type=float, default=udgp.TRIBOND_TOL)
    p.add_argument("--timeout-seconds", type=float)
    p.set_defaults(func=cmd_udgp_tribond)

    p = sub.add_parser("reduce-partition", help="Partition instance to a 1D cycle DGP instance")
    _io(p)
    p.set_defaults(func=cmd_reduce_partition)

    p = sub.add_parser("embed-frechet", help="exact l-infinity embedding of a finite metric")
    _io(p)
    p.set_defaults(func=cmd_embed_frechet)

    p = sub.add_parser("jll", help="Johnson-Lindenstrauss random projection")
    _io(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constant", type=float, default=embed.JLL_CONSTANT, help="C in K = ceil(C ln|Y| / eps^2)")
    p.set_defaults(func=cmd_jll)

    p = sub.add_parser("percolate", help="rigidity percolation sweep (CSV)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--patch", choices=["triangular"], default="triangular")
    g.add_argument("--gnp", type=_positive_int, metavar="N", help="complete graph on N vertices (G(n,p))")
    p.add_argument("--rows", type=_positive_int)
    p.add_argument("--cols", type=_positive_int)
    p.add_argument("--p-list", required=True, help="comma-separated retention probabilities")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--spanning", choices=percolation.SPANNING_MODES, default="all",
                   help="all: one rigid cluster holds every vertex; boundary: a rigid cluster joins opposite sides")
    p.add_argument("--process", choices=percolation.PROCESSES, default="dilution")
    p.add_argument("--max-steps", type=_positive_int, help="step budget for --process resample")
    p.set_defaults(func=cmd_percolate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        _write(args, args.func(args))
    except (DgError, ValueError) as exc:
        print(f"dg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dg {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
