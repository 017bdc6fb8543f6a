"""``frac`` command-line front end.

Exit codes: 0 on success, 1 on invalid input, 2 when a computed result misses
its tolerance (non-convergence, residual above ``--tol``, failed
reproduction row). Verbosity is set by ``FRAC_LOG`` (``quiet``, ``info`` or
``debug``; default ``quiet``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from fracvar import fracops
from fracvar.fracops import FractionalParams, Grid, SampledPath
from fracvar.lagrangian import ExpressionDomainError, evaluate, parse, variable_names
from fracvar.problemfile import ProblemFileError, load_problem
from fracvar.reproduce import cmd_reproduce
from fracvar.solver import SolveOptions, solve
from fracvar.specfun import mittag_leffler
from fracvar.variational import MultiplierSet, ProblemSpec, el_residual

__all__ = ["main"]

OK, INVALID, TOLERANCE = 0, 1, 2

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

OPERATORS = ("lrlfi", "rrlfi", "lcaputo", "rcaputo", "combined", "lrlfd", "rrlfd", "dual")


class UsageError(ValueError):
    pass


# {{{ csv helpers


def _fmt(v: float, digits: int | None) -> str:
    # both forms use "." whatever the locale; repr round-trips exactly
    return repr(float(v)) if digits is None else f"{float(v):.{digits}g}"


def write_csv(
    path: str | Path | None,
    header: Sequence[str],
    columns: Sequence[np.ndarray],
    digits: int | None = None,
) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(v, digits) for v in row])
    if path is None or str(path) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_path_csv(path: str | Path, problem: ProblemSpec) -> SampledPath:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    expected = ["x"] + [f"y{i + 1}" for i in range(problem.n_components)]
    if header != expected:
        raise UsageError(f"{path}: header {header} != {expected}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if data.shape != (problem.grid.n + 1, len(expected)):
        raise UsageError(f"{path}: expected {problem.grid.n + 1} rows of {len(expected)} values")
    if np.abs(data[:, 0] - problem.grid.x).max() > 1e-9 * max(1.0, abs(problem.grid.b)):
        raise UsageError(f"{path}: x column does not match the problem grid")
    return SampledPath(problem.grid, data[:, 1:].T.copy())


# }}}


# {{{ commands


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def cmd_ml(args: argparse.Namespace) -> int:
    print(f"{mittag_leffler(args.alpha, args.z):.13g}")
    return OK


def _grid(text: str) -> Grid:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--grid: expected a,b,n, got {text!r}")
    try:
        return Grid(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise UsageError(f"--grid: {exc}") from None


def cmd_op(args: argparse.Namespace) -> int:
    grid = _grid(args.grid)
    expr = parse(args.fn, 1)
    extra = variable_names(expr) - {"x"}
    if extra:
        raise UsageError(f"--fn may only use x: found {sorted(extra)}")
    values = np.broadcast_to(np.asarray(evaluate(expr, {"x": grid.x}), dtype=np.float64), grid.x.shape)
    f = SampledPath(grid, values[None, :].copy())
    beta = args.alpha if args.beta is None else args.beta

    kind = args.kind
    if kind == "lrlfi":
        out = fracops.left_rlfi(f, args.alpha)
    elif kind == "rrlfi":
        out = fracops.right_rlfi(f, args.alpha)
    elif kind == "lcaputo":
        out = fracops.left_caputo(f, args.alpha)
    elif kind == "rcaputo":
        out = fracops.right_caputo(f, args.alpha)
    elif kind == "lrlfd":
        out = fracops.left_rlfd(f, args.alpha)
    elif kind == "rrlfd":
        out = fracops.right_rlfd(f, args.alpha)
    else:
        params = FractionalParams(args.alpha, beta, args.gamma)
        op = fracops.combined_caputo if kind == "combined" else fracops.dual_combined_rl
        out = op(f, params)
    write_csv(args.out, ["x", "value"], [grid.x, out.values[0]], digits=12)
    return OK


def _options(path: str | None) -> SolveOptions:
    if path is None:
        return SolveOptions()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(SolveOptions)}
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"{path}: unknown option(s) {sorted(unknown)}")
    return SolveOptions(**doc)


def _finite(v: float) -> float | None:
    return float(v) if math.isfinite(v) else None


def cmd_solve(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    report = solve(problem, _options(args.opts))
    x = problem.grid.x
    write_csv(
        args.out,
        ["x"] + [f"y{i + 1}" for i in range(problem.n_components)],
        [x, *report.path.values],
    )
    res = report.residual
    sidecar = {
        "converged": report.converged,
        "iterations": report.iterations,
        "objective": report.objective,
        "gradient_norm": _finite(report.gradient_norm),
        "multipliers": list(report.multipliers.values),
        "el_max": res.el_max,
        "constraint_violations": list(res.constraint_violations),
        "slackness": list(res.slackness),
        "transversality": None
        if res.transversality is None
        else dataclasses.asdict(res.transversality),
        "warnings": list(report.warnings),
    }
    Path(args.out).with_suffix(".report.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )
    if not report.converged:
        print("solver did not converge", file=sys.stderr)
        return TOLERANCE
    return OK


def cmd_check_el(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    path = read_path_csv(args.path, problem)
    lam = MultiplierSet(tuple(_floats(args.lambda_, "--lambda"))) if args.lambda_ else None
    if lam is not None and len(lam) != len(problem.constraints):
        raise UsageError(f"--lambda: need {len(problem.constraints)} value(s), got {len(lam)}")
    res = el_residual(problem, path, lam)
    tol = args.tol

    ok = True
    per_component = np.abs(res.el_window).max(axis=1)
    for i, v in enumerate(per_component):
        print(f"el_max[y{i + 1}] = {v:.6e}")
        ok &= bool(v <= tol)
    if res.transversality is not None:
        t = res.transversality
        verdict = "ok" if t.holds(tol) else "violated"
        print(f"transversality ({t.mode}) = {t.value:.6e} at y(b) = {t.endpoint:.6g}: {verdict}")
        ok &= t.holds(tol)
    for j, v in enumerate(res.constraint_violations):
        print(f"constraint[{j}] violation = {v:.6e}")
        ok &= bool(abs(v) <= tol)
    for j, v in enumerate(res.slackness):
        print(f"slackness[{j}] = {v:.6e}")
        ok &= bool(abs(v) <= tol)
    print("PASS" if ok else "FAIL")
    return OK if ok else TOLERANCE


def cmd_reproduce_cli(args: argparse.Namespace) -> int:
    report = cmd_reproduce(_floats(args.alphas, "--alphas"), args.xi, args.n)
    print(report.table())
    if args.out:
        rows = report.rows
        write_csv(
            args.out,
            ["alpha", "path_error", "el_max", "constraint_error", "lambda", "erfc_error",
             "line_distance", "exp_distance", "passed"],
            [np.array([getattr(r, k) for r in rows], dtype=np.float64) for k in
             ("alpha", "path_error", "el_max", "constraint_error", "multiplier",
              "closed_form_error", "line_distance", "exp_distance", "passed")],
        )
    return OK if report.passed else TOLERANCE


# }}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ml", help="one-parameter Mittag-Leffler function")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--z", type=float, required=True)
    s.set_defaults(func=cmd_ml)

    s = sub.add_parser("op", help="apply a fractional operator to a function of x")
    s.add_argument("--kind", choices=OPERATORS, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, default=None, help="right order (default: alpha)")
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--grid", required=True, help="a,b,n")
    s.add_argument("--fn", required=True, help="expression in x")
    s.add_argument("--out", default=None, help="CSV file (default: stdout)")
    s.set_defaults(func=cmd_op)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--opts", default=None, help="JSON object of solver options")
    s.add_argument("--out", required=True, help="CSV path; report goes to <out>.report.json")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("check-el", help="optimality residuals of a sampled path")
    s.add_argument("--problem", required=True)
    s.add_argument("--path", required=True)
    s.add_argument("--lambda", dest="lambda_", default=None, help="comma-separated multipliers")
    s.add_argument("--tol", type=float, default=1e-3)
    s.set_defaults(func=cmd_check_el)

    s = sub.add_parser("reproduce", help="solve the isoperimetric example family")
    s.add_argument("--alphas", default="0.05,0.25,0.5,0.75,0.95")
    s.add_argument("--xi", type=float, default=1.0)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--out", default=None, help="optional CSV of the table")
    s.set_defaults(func=cmd_reproduce_cli)
    return p


def _configure_logging() -> None:
    level = os.environ.get("FRAC_LOG", "quiet").strip().lower() or "quiet"
    if level not in _LOG_LEVELS:
        raise UsageError(f"FRAC_LOG must be one of {sorted(_LOG_LEVELS)}: got {level!r}")
    logging.basicConfig(level=_LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INVALID if exc.code else OK
    try:
        _configure_logging()
        return args.func(args)
    except (UsageError, ProblemFileError, ValueError, ExpressionDomainError, OverflowError, OSError) as exc:
        print(f"frac: error: {exc}", file=sys.stderr)
        return INVALID


if __name__ == "__main__":
    sys.exit(main())
