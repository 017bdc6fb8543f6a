"""The fractional isoperimetric example family and its closed-form extremals.

For ``0 < alpha < 1`` and ``xi`` the problem is::

    minimize   int_0^1 (y' + D y)^2 dx       (left Caputo, gamma = 1)
    subject to int_0^1 (y' + D y) dx = xi,  y(0) = 0,  y(1) = y_ref(1)

with extremal ``y_ref(x) = xi int_0^x E_{1-alpha}(-s^{1-alpha}) ds`` and
multiplier ``lambda = 2 xi``. At ``alpha = 1/2`` the extremal is
``xi (e^x erfc(sqrt x) + 2 sqrt(x / pi) - 1)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from fracvar.fracops import FractionalParams, Grid, SampledPath
from fracvar.lagrangian import parse
from fracvar.solver import SolveOptions, SolveReport, solve_isoperimetric
from fracvar.specfun import erfc, ml_running_integral
from fracvar.variational import BoundaryConditions, Constraint, ProblemSpec, constraint_values

__all__ = [
    "ReproReport",
    "ReproRow",
    "cmd_reproduce",
    "example_problem",
    "half_order_path",
    "reference_path",
]

logger = logging.getLogger(__name__)

#: per-row acceptance thresholds
PATH_TOLERANCE = 5.0e-3
MULTIPLIER_TOLERANCE = 0.05
CONSTRAINT_TOLERANCE = 1.0e-6


def reference_path(alpha: float, xi: float, x: np.ndarray) -> np.ndarray:
    """Extremal ``xi int_0^x E_{1-alpha}(-s^{1-alpha}) ds`` on ``[0, 1]``."""
    return xi * np.array([ml_running_integral(1.0 - alpha, float(t)) for t in x])


def half_order_path(xi: float, x: np.ndarray) -> np.ndarray:
    """Closed form of the extremal at ``alpha = 1/2``."""
    return xi * np.array(
        [math.exp(t) * erfc(math.sqrt(t)) + 2.0 * math.sqrt(t / math.pi) - 1.0 for t in x]
    )


def example_problem(alpha: float, xi: float, n: int) -> ProblemSpec:
    grid = Grid(0.0, 1.0, n)
    yb = xi * ml_running_integral(1.0 - alpha, 1.0)
    return ProblemSpec(
        lagrangian=parse("(dy1 + Dy1)^2", 1),
        params=FractionalParams(alpha, alpha, 1.0),
        grid=grid,
        bc=BoundaryConditions.fixed([0.0], [yb]),
        constraints=(Constraint(parse("dy1 + Dy1", 1), xi),),
    )


@dataclass(frozen=True)
class ReproRow:
    alpha: float
    path_error: float = math.nan
    el_max: float = math.nan
    constraint_error: float = math.nan
    multiplier: float = math.nan
    #: max distance to the erfc closed form (``alpha = 1/2`` only)
    closed_form_error: float = math.nan
    #: max distances to the classical extremals ``xi x / 2`` and ``1 - e^{-x}``
    line_distance: float = math.nan
    exp_distance: float = math.nan
    seconds: float = math.nan
    converged: bool = False
    passed: bool = False
    error: str = ""


@dataclass(frozen=True)
class ReproReport:
    xi: float
    n: int
    rows: tuple[ReproRow, ...]
    #: solved paths by alpha (absent for failed rows)
    paths: dict[float, SampledPath]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, alpha: float) -> ReproRow:
        for r in self.rows:
            if r.alpha == alpha:
                return r
        raise KeyError(alpha)

    def table(self) -> str:
        head = (
            f"{'alpha':>6} {'path_err':>10} {'el_max':>10} {'constr_err':>10} "
            f"{'lambda':>10} {'erfc_err':>10} {'to_line':>10} {'to_exp':>10} {'secs':>7}  status"
        )
        lines = [head]
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            if r.error:
                status += f" ({r.error})"
            lines.append(
                f"{r.alpha:6.3f} {r.path_error:10.3e} {r.el_max:10.3e} {r.constraint_error:10.3e} "
                f"{r.multiplier:10.6f} {r.closed_form_error:10.3e} {r.line_distance:10.3e} "
                f"{r.exp_distance:10.3e} {r.seconds:7.2f}  {status}"
            )
        return "\n".join(lines)


def _row(alpha: float, xi: float, n: int, options: SolveOptions | None) -> tuple[ReproRow, SolveReport]:
    t0 = time.perf_counter()
    problem = example_problem(alpha, xi, n)
    report = solve_isoperimetric(problem, options)
    seconds = time.perf_counter() - t0

    x = problem.grid.x
    y = report.path.values[0]
    path_error = float(np.abs(y - reference_path(alpha, xi, x)).max())
    constraint_error = float(abs(constraint_values(problem, report.path)[0] - xi))
    lam = report.multipliers.values[0]
    closed = float(np.abs(y - half_order_path(xi, x)).max()) if alpha == 0.5 else math.nan
    passed = (
        report.converged
        and path_error <= PATH_TOLERANCE
        and abs(lam - 2.0 * xi) <= MULTIPLIER_TOLERANCE * max(1.0, abs(xi))
        and constraint_error <= CONSTRAINT_TOLERANCE
        and (math.isnan(closed) or closed <= PATH_TOLERANCE)
    )
    row = ReproRow(
        alpha=alpha,
        path_error=path_error,
        el_max=report.residual.el_max,
        constraint_error=constraint_error,
        multiplier=lam,
        closed_form_error=closed,
        line_distance=float(np.abs(y - 0.5 * xi * x).max()),
        exp_distance=float(np.abs(y - xi * (1.0 - np.exp(-x))).max()),
        seconds=seconds,
        converged=report.converged,
        passed=passed,
    )
    return row, report


def cmd_reproduce(
    alphas: list[float], xi: float = 1.0, n: int = 1000, options: SolveOptions | None = None
) -> ReproReport:
    """Solve the example for every ``alpha`` and compare with the closed forms.

    A failing row records its error message; the remaining rows still run.
    """
    if not alphas:
        raise ValueError("need at least one alpha")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1): got {a}")
    if n < 200:
        raise ValueError(f"n must be at least 200: got {n}")
    if not math.isfinite(xi):
        raise ValueError(f"xi must be finite: got {xi}")

    rows = []
    paths = {}
    for a in alphas:
        try:
            row, report = _row(float(a), float(xi), int(n), options)
            paths[float(a)] = report.path
        except (ValueError, ArithmeticError) as exc:
            logger.warning("alpha=%g failed: %s", a, exc)
            row = ReproRow(alpha=float(a), error=str(exc))
        logger.info("alpha=%g done in %.2fs", a, row.seconds)
        rows.append(row)
    return ReproReport(xi=float(xi), n=int(n), rows=tuple(rows), paths=paths)
