"""Command-line front end.

Subcommands: refine (run the two-step iteration), analyze (dual-space
structure), check (deflation-one verdict), bench (experiment runners).
Exit codes: 0 success, 1 usage/input error, 2 refinement did not converge.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, dualspace
from .numla import split_svd
from .polycore import PolyParseError, load_system_json
from .twostep import StepConfig, auto_tolerance, refine

_USAGE_ERROR = 1
_NOT_CONVERGED = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snewton",
        description="Refine and classify singular zeros of polynomial systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_system_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--catalog", help="name of a built-in benchmark system")
        src.add_argument("--file", help="JSON file with {'vars': [...], 'polys': [...]}")
        p.add_argument("--x0", help="comma-separated start point, entries like 1.5 or 2+0.5i")
        p.add_argument("--format", choices=("json", "table"), default="table")

    p_refine = sub.add_parser("refine", help="run the two-step refinement")
    add_system_args(p_refine)
    p_refine.add_argument("--tol", default="auto", help="rank tolerance or 'auto'")
    p_refine.add_argument("--seed", type=int, default=None)
    p_refine.add_argument("--iters", type=int, default=20)
    p_refine.add_argument("--stop", type=float, default=1e-13)
    p_refine.add_argument("--reference", help="known zero for error annotation")

    p_analyze = sub.add_parser("analyze", help="dual-space structure at a point")
    add_system_args(p_analyze)
    p_analyze.add_argument("--max-order", type=int, default=12)

    p_check = sub.add_parser("check", help="deflation-one classification at a point")
    add_system_args(p_check)
    p_check.add_argument("--tol", default="auto", help="rank tolerance or 'auto'")
    p_check.add_argument("--seed", type=int, default=None)
    p_check.add_argument("--trials", type=int, default=3)

    p_bench = sub.add_parser("bench", help="run an experiment")
    p_bench.add_argument(
        "experiment", choices=("table1", "stability", "efficiency", "robustness")
    )
    p_bench.add_argument("--sizes", default="10:2", help="efficiency sizes, e.g. 10:2,50:2")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--iters", type=int, default=3)
    p_bench.add_argument("--format", choices=("json", "table"), default="table")
    return parser


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SNEWTON_SEED")
    return int(env) if env else 0


def _parse_point(text: str, n: int) -> np.ndarray:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"point has {len(parts)} coordinates, system has {n} variables")
    values = []
    for part in parts:
        v = part.replace("i", "j")
        values.append(complex(v))
    return np.array(values, dtype=complex)


def _load_system(args):
    if args.catalog:
        entry = bench.get_entry(args.catalog)
        return entry.system, entry
    system, _names = load_system_json(args.file)
    return system, None


def _start_point(args, system, entry) -> np.ndarray:
    if args.x0:
        return _parse_point(args.x0, system.num_vars)
    if entry is not None:
        return entry.zero
    raise ValueError("--x0 is required when loading a system from a file")


def _emit(payload: dict, text: str, fmt: str):
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _cmd_refine(args) -> int:
    system, entry = _load_system(args)
    x0 = _start_point(args, system, entry)
    tol = args.tol if args.tol == "auto" else float(args.tol)
    cfg = StepConfig(tol=tol, seed=_seed(args), stop_residual=args.stop, max_iters=args.iters)
    reference = None
    if args.reference:
        reference = _parse_point(args.reference, system.num_vars)
    elif entry is not None:
        reference = entry.zero
    trace = refine(system, x0, cfg, reference=reference)

    payload = trace.to_json()
    del payload["steps"]  # per-step timings vary run to run; keep JSON reproducible
    payload["kappas"] = [s.kappa for s in trace.steps]
    payload["residuals"] = trace.residuals
    lines = [
        f"iterations: {trace.iterations} (stop: {trace.stop_reason})",
        f"final residual: {trace.residuals[-1]:.3e}",
        "final point: " + ", ".join(bench.format_complex(z) for z in trace.x),
    ]
    if trace.error_exponents is not None:
        lines.append(
            "error exponents: " + " -> ".join(f"{e:.2f}" for e in trace.error_exponents)
        )
    _emit(payload, "\n".join(lines), args.format)
    return 0 if trace.residuals[-1] <= cfg.stop_residual else _NOT_CONVERGED


def _cmd_analyze(args) -> int:
    system, entry = _load_system(args)
    x = _start_point(args, system, entry)
    report = dualspace.multiplicity_structure(system, x, max_order=args.max_order)
    text = (
        f"breadth kappa = {report.breadth}"
        + (" (regular point)" if report.regular else "")
        + f"\ndepth rho = {report.depth}\nmultiplicity mu = {report.multiplicity}"
        + f"\ndims by order: {report.dims}\nstabilized: {report.stabilized}"
    )
    _emit(report.to_json(), text, args.format)
    return 0


def _cmd_check(args) -> int:
    system, entry = _load_system(args)
    x = _start_point(args, system, entry)
    jac = system.jacobian(x)
    if args.tol == "auto":
        tol = auto_tolerance(jac) if np.linalg.norm(jac) > 0 else 1e-8
    else:
        tol = float(args.tol)
    split = split_svd(jac, tol)
    if split.kappa == 0:
        _emit(
            {"schema": 1, "kappa": 0, "verdict": "regular"},
            "kappa = 0: regular point, nothing to deflate",
            args.format,
        )
        return 0
    necessary = dualspace.deflation_one_necessary(system, x)
    sufficient = dualspace.is_deflation_one(
        system, x, tol, trials=args.trials, seed=_seed(args)
    )
    verdict = "deflation-one" if sufficient else "NOT deflation-one"
    payload = {
        "schema": 1,
        "kappa": split.kappa,
        "necessary_dimension_test": necessary,
        "randomized_operator_test": sufficient,
        "verdict": verdict,
    }
    text = (
        f"kappa = {split.kappa}\n"
        f"necessary (order-2 dimension) test: {'pass' if necessary else 'FAIL'}\n"
        f"sufficient (randomized operator) test: {'pass' if sufficient else 'FAIL'}\n"
        f"verdict: {verdict}"
    )
    _emit(payload, text, args.format)
    return 0


def _cmd_bench(args) -> int:
    seed = _seed(args)
    if args.experiment == "table1":
        report = bench.run_table_convergence(iters=args.iters, seed=seed)
    elif args.experiment == "stability":
        report = bench.run_stability(
            k_values=[3, 4, 2], tol_values=[1e-2], iters=args.iters
        )
    elif args.experiment == "efficiency":
        sizes = []
        for chunk in args.sizes.split(","):
            n, k = chunk.split(":")
            sizes.append((int(n), int(k)))
        report = bench.run_efficiency(sizes, iters=args.iters, seed=seed)
    else:
        report = bench.run_robustness()
    _emit(report.to_json(), report.to_text(), args.format)
    return 0


_COMMANDS = {
    "refine": _cmd_refine,
    "analyze": _cmd_analyze,
    "check": _cmd_check,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _USAGE_ERROR if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (PolyParseError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
