"""Command-line entry point.

Subcommands mirror the library pipeline: ``solve`` produces a solution file,
``analyze-support`` / ``decompose-limbs`` / ``reconstruct`` operate on its
coupling, ``check-extremal`` runs the certificates, ``subtwist-check`` and
``circle-demo`` drive the manifold tooling, and ``selftest`` runs the
acceptance suite.  Exit codes: 0 success, 1 domain error (a JSON object with
``error`` and ``detail`` fields goes to stderr), 2 usage error.

The environment variable ``LIMBSYS_ARITHMETIC`` (``exact`` or ``float``)
sets the default arithmetic; ``--exact`` / ``--float`` override it.  All
outputs are deterministic given identical inputs and flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import serialize
from .errors import LimbsysError
from .extremality import check_extremality
from .kantorovich import solve, verify_certificate
from .limbs import decompose, reconstruct, validate, verify_recursion
from .manifold import GridManifold, circle_demo, cost_by_name, twist_census
from .measures import marginals
from .support import acyclicity_test, build_support_graph


def _arithmetic_default() -> bool | None:
    env = os.environ.get("LIMBSYS_ARITHMETIC", "").strip().lower()
    if env == "exact":
        return True
    if env == "float":
        return False
    return None


def _add_arithmetic_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", dest="exact", action="store_true", default=None,
                   help="force exact rational arithmetic")
    g.add_argument("--float", dest="exact", action="store_false", default=None,
                   help="force float arithmetic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limbsys",
        description="Exact discrete transport, extremality certificates, numbered limb systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a transportation problem")
    p.add_argument("--mu", required=True, help="measure JSON file")
    p.add_argument("--nu", required=True, help="measure JSON file")
    p.add_argument("--cost", required=True, help="cost matrix JSON file")
    p.add_argument("--tol", type=float, default=None, help="zero-set tolerance (float mode)")
    p.add_argument("--out", required=True, help="solution JSON output path")
    _add_arithmetic_flags(p)

    p = sub.add_parser("analyze-support", help="forest test on a solution's support")
    p.add_argument("solution", help="solution JSON file")

    p = sub.add_parser("decompose-limbs", help="numbered limb system of a solution's support")
    p.add_argument("solution", help="solution JSON file")
    p.add_argument("--root-side", choices=["y", "x-shifted"], default="y",
                   help="root components on the column side (default) or exhibit the shifted numbering")
    p.add_argument("--out", required=True, help="system JSON output path")

    p = sub.add_parser("reconstruct", help="rebuild the unique coupling of a limb system")
    p.add_argument("--system", required=True, help="system JSON file")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--out", default=None, help="coupling JSON output path")

    p = sub.add_parser("check-extremal", help="extremality certificates for a coupling")
    p.add_argument("coupling", help="coupling JSON file")
    p.add_argument("--methods", default="forest,rank",
                   help="comma list from forest,rank,brute (default forest,rank)")
    p.add_argument("--out", required=True, help="verdict JSON output path")

    p = sub.add_parser("subtwist-check", help="twist/subtwist census for a library cost")
    p.add_argument("--manifold", choices=["circle", "interval"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--cost", required=True, help="cost name (e.g. circle_cos)")

    p = sub.add_parser("circle-demo", help="full circular-town pipeline")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--out", required=True, help="output directory")
    _add_arithmetic_flags(p)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="reduced instance counts")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except LimbsysError as exc:
        json.dump({"error": exc.code, "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (OSError, ValueError, KeyError) as exc:
        json.dump({"error": type(exc).__name__, "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "solve":
        return _cmd_solve(args)
    if cmd == "analyze-support":
        return _cmd_analyze(args)
    if cmd == "decompose-limbs":
        return _cmd_decompose(args)
    if cmd == "reconstruct":
        return _cmd_reconstruct(args)
    if cmd == "check-extremal":
        return _cmd_check_extremal(args)
    if cmd == "subtwist-check":
        return _cmd_subtwist(args)
    if cmd == "circle-demo":
        return _cmd_circle_demo(args)
    if cmd == "selftest":
        return _cmd_selftest(args)
    raise AssertionError(cmd)  # pragma: no cover


def _resolve_exact(args) -> bool | None:
    return args.exact if args.exact is not None else _arithmetic_default()


def _cmd_solve(args) -> int:
    mu = serialize.measure_from_json(serialize.load(args.mu))
    nu = serialize.measure_from_json(serialize.load(args.nu))
    cost = serialize.cost_from_json(serialize.load(args.cost))
    sol = solve(mu, nu, cost, exact=_resolve_exact(args), zero_tol=args.tol)
    serialize.dump(args.out, "solution", serialize.solution_to_json(sol))
    report = verify_certificate(sol)
    print(
        json.dumps(
            {
                "out": args.out,
                "arithmetic": "exact" if sol.exact else "float",
                "primal_value": serialize.number_to_json(sol.primal_value),
                "support_size": len(sol.coupling.entries),
                "certificate_ok": report.passed,
            },
            sort_keys=True,
        )
    )
    return 0


def _load_coupling_from_solution(path: str):
    doc = serialize.load(path, kind="solution")
    return serialize.coupling_from_json(doc["coupling"])


def _cmd_analyze(args) -> int:
    coupling = _load_coupling_from_solution(args.solution)
    report = acyclicity_test(build_support_graph(coupling))
    print(
        serialize.dumps_canonical(
            {
                "is_forest": report.is_forest,
                "components": [
                    {"x": list(xs), "y": list(ys)} for xs, ys in report.components
                ],
                "witness_cycle": list(report.witness_cycle) if report.witness_cycle else None,
            }
        ),
        end="",
    )
    return 0


def _cmd_decompose(args) -> int:
    coupling = _load_coupling_from_solution(args.solution)
    system = decompose(build_support_graph(coupling), root_side=args.root_side)
    serialize.dump(args.out, "limb_system", serialize.system_to_json(system))
    report = validate(system)
    print(
        json.dumps(
            {"out": args.out, "n_limbs": system.n_limbs, "valid": report.passed},
            sort_keys=True,
        )
    )
    return 0


def _cmd_reconstruct(args) -> int:
    system = serialize.system_from_json(serialize.load(args.system, kind="limb_system"))
    mu = serialize.measure_from_json(serialize.load(args.mu))
    nu = serialize.measure_from_json(serialize.load(args.nu))
    rec = reconstruct(system, mu, nu)
    worst = verify_recursion(system, mu, nu, rec)
    if args.out:
        serialize.dump(args.out, "coupling", serialize.coupling_to_json(rec.total))
    print(
        json.dumps(
            {
                "out": args.out,
                "n_limbs": system.n_limbs,
                "support_size": len(rec.total.entries),
                "total_mass": serialize.number_to_json(rec.total.total_mass),
                "recursion_violation": serialize.number_to_json(worst),
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_check_extremal(args) -> int:
    doc = serialize.load(args.coupling)
    coupling = serialize.coupling_from_json(doc["coupling"] if "coupling" in doc else doc)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    verdict = check_extremality(coupling, methods=methods)
    payload = {
        "extremal": verdict.extremal,
        "agree": verdict.agree,
        "methods": {},
    }
    for v in verdict.verdicts:
        entry: dict = {"extremal": v.extremal}
        if v.witness_cycle is not None:
            entry["witness_cycle"] = list(v.witness_cycle)
        if v.rank is not None:
            entry["rank"] = v.rank
            entry["deficit"] = v.deficit
        if v.n_vertices is not None:
            entry["n_vertices"] = v.n_vertices
        if v.witness is not None:
            entry["witness"] = [
                serialize.coupling_to_json(v.witness[0]),
                serialize.coupling_to_json(v.witness[1]),
            ]
        payload["methods"][v.method] = entry
    serialize.dump(args.out, "extremality_verdict", payload)
    print(json.dumps({"out": args.out, "extremal": verdict.extremal, "agree": verdict.agree}, sort_keys=True))
    return 0


def _cmd_subtwist(args) -> int:
    grid = GridManifold(args.manifold, args.n)
    report = twist_census(grid, cost_by_name(args.cost))
    pairs = list(report.census.values())
    print(
        serialize.dumps_canonical(
            {
                "manifold": args.manifold,
                "n": args.n,
                "cost": args.cost,
                "classification": report.classification,
                "pairs": len(pairs),
                "max_interior_minima": max((c.interior_minima for c in pairs), default=0),
                "max_interior_maxima": max((c.interior_maxima for c in pairs), default=0),
                "pairs_with_plateaus": sum(1 for c in pairs if c.plateaus),
                "degenerate_pairs": [list(p) for p in report.degenerate_pairs],
            }
        ),
        end="",
    )
    return 0


def _cmd_circle_demo(args) -> int:
    report = circle_demo(
        args.n,
        args.kappa,
        exact=_resolve_exact(args) if _resolve_exact(args) is not None else True,
        out_dir=args.out,
    )
    print(
        serialize.dumps_canonical(
            {
                "n": report.n,
                "kappa": report.kappa,
                "arithmetic": "exact" if report.exact else "float",
                "primal_value": serialize.number_to_json(report.solution.primal_value),
                "duality_gap": serialize.number_to_json(
                    report.solution.primal_value - report.solution.dual_value
                ),
                "limb_count": report.limb_count,
                "max_fiber_size": report.max_fiber_size,
                "cross_lake_mass": serialize.number_to_json(report.cross_lake_mass),
                "marked_points": len(report.marked),
                "marked_split_valid": report.split.valid,
                "marked_split_matches_coupling": report.split.reconstruction_matches,
                "pivot_stable": report.pivot_stable,
                "files": list(report.files),
            }
        ),
        end="",
    )
    return 0


def _cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail} ({r.seconds:.1f}s)")
        if not r.passed:
            failed += 1
    print(f"{len(results) - failed}/{len(results)} acceptance criteria passed")
    return 0 if failed == 0 else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
