"""Optimality conditions of fractional variational problems as residuals.

A problem is the functional ``J(y) = int_a^b L(x, y, y', D y) dx`` where ``D``
is the combined Caputo operator, together with boundary data and optional
integral constraints ``int G_j(x, y, y', D y) dx = xi_j`` (or ``<= xi_j``).
Every quantity here is computed on a sampled candidate path; nothing is
solved.

Multiplier signs: for an equality constraint the augmented integrand is
``L - lambda_j G_j``; for an inequality constraint ``G_j <= xi_j`` it is
``L + mu_j G_j`` with ``mu_j >= 0``.
"""

from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from fracvar import fracops
from fracvar.fracops import FractionalParams, Grid, SampledPath
from fracvar.lagrangian import Expr, diff, evaluate, variable_names

__all__ = [
    "BoundaryConditions",
    "Constraint",
    "EndCondition",
    "Jet",
    "MultiplierSet",
    "ProblemSpec",
    "Residual",
    "Transversality",
    "check_regularity",
    "constraint_values",
    "el_residual",
    "first_variation",
    "functional_value",
    "cell_jet",
    "norm_1_infty",
    "path_jet",
    "slackness_check",
    "transversality_residual",
]

#: relative window ``[0.05 n, 0.95 n]`` on which EL residuals are asserted
EL_WINDOW = (0.05, 0.95)


_VARIABLE = re.compile(r"(?:y|dy|Dy)(\d+)")

# {{{ problem description


@dataclass(frozen=True)
class EndCondition:
    """Right-endpoint regime of one component: ``fixed``, ``free`` or ``capped``."""

    kind: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "free", "capped"):
            raise ValueError(f"unknown endpoint condition: {self.kind!r}")
        if (self.kind == "free") != (self.value is None):
            raise ValueError(f"'{self.kind}' endpoint {'takes no' if self.kind == 'free' else 'needs a'} value")
        if self.value is not None:
            object.__setattr__(self, "value", float(self.value))

    @classmethod
    def fixed(cls, value: float) -> EndCondition:
        return cls("fixed", value)

    @classmethod
    def free(cls) -> EndCondition:
        return cls("free")

    @classmethod
    def capped(cls, value: float) -> EndCondition:
        return cls("capped", value)


@dataclass(frozen=True)
class BoundaryConditions:
    """Fixed left values and per-component right conditions (at most one non-fixed)."""

    left: tuple[float, ...]
    right: tuple[EndCondition, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", tuple(float(v) for v in self.left))
        object.__setattr__(self, "right", tuple(self.right))
        if len(self.left) != len(self.right):
            raise ValueError("left and right boundary data have different lengths")
        if len(self.left) == 0:
            raise ValueError("boundary data must have at least one component")
        if sum(r.kind != "fixed" for r in self.right) > 1:
            raise ValueError("at most one right endpoint may be free or capped")

    @classmethod
    def fixed(cls, left: Sequence[float], right: Sequence[float]) -> BoundaryConditions:
        return cls(tuple(left), tuple(EndCondition.fixed(v) for v in right))

    @property
    def n_components(self) -> int:
        return len(self.left)

    @property
    def open_index(self) -> int | None:
        """Index of the free or capped component, if any."""
        for i, r in enumerate(self.right):
            if r.kind != "fixed":
                return i
        return None


@dataclass(frozen=True)
class Constraint:
    """Integral constraint ``int G dx = target`` or ``int G dx <= target``."""

    integrand: Expr
    target: float
    kind: str = "equality"

    def __post_init__(self) -> None:
        if self.kind not in ("equality", "inequality"):
            raise ValueError(f"constraint kind must be 'equality' or 'inequality': got {self.kind!r}")
        object.__setattr__(self, "target", float(self.target))

    @property
    def sign(self) -> float:
        """Sign of the multiplier term in the augmented integrand ``L - sign * lambda * G``."""
        return 1.0 if self.kind == "equality" else -1.0


@dataclass(frozen=True)
class MultiplierSet:
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)


class _Partials:
    """Symbolic partials of one integrand with respect to ``y``, ``dy`` and ``Dy``."""

    def __init__(self, expr: Expr, n: int) -> None:
        names = variable_names(expr)
        self.expr = expr
        self.by_kind = {
            kind: [diff(expr, f"{kind}{i}") if f"{kind}{i}" in names else None for i in range(1, n + 1)]
            for kind in ("y", "dy", "Dy")
        }

    def depends_on(self, kind: str) -> bool:
        return any(p is not None for p in self.by_kind[kind])

    @cached_property
    def second(self) -> dict[tuple[str, int, str, int], Expr]:
        """Non-vanishing second partials keyed by ``(kind, i, kind, j)``, 0-based."""
        out = {}
        for ka, row in self.by_kind.items():
            for i, e in enumerate(row):
                if e is None:
                    continue
                names = variable_names(e)
                for kb in ("y", "dy", "Dy"):
                    for j in range(len(row)):
                        if f"{kb}{j + 1}" in names:
                            out[ka, i, kb, j] = diff(e, f"{kb}{j + 1}")
        return out


@dataclass(frozen=True)
class ProblemSpec:
    """A fractional variational problem on a grid."""

    lagrangian: Expr
    params: FractionalParams
    grid: Grid
    bc: BoundaryConditions
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = self.n_components
        for e in [self.lagrangian, *(c.integrand for c in self.constraints)]:
            for name in variable_names(e):
                m = _VARIABLE.fullmatch(name)
                if m is not None and int(m.group(1)) > n:
                    raise ValueError(f"variable {name!r} exceeds N={n}")

    @property
    def n_components(self) -> int:
        return self.bc.n_components

    @cached_property
    def lagrangian_partials(self) -> _Partials:
        return _Partials(self.lagrangian, self.n_components)

    @cached_property
    def constraint_partials(self) -> tuple[_Partials, ...]:
        return tuple(_Partials(c.integrand, self.n_components) for c in self.constraints)

    def linear_path(self) -> SampledPath:
        """Straight line between the boundary data; open ends start at the left value."""
        x = self.grid.x
        t = (x - self.grid.a) / (self.grid.b - self.grid.a)
        rows = []
        for ya, r in zip(self.bc.left, self.bc.right):
            yb = r.value if r.kind == "fixed" else ya
            rows.append(ya + (yb - ya) * t)
        return SampledPath(self.grid, np.array(rows))


# }}}


# {{{ jets


@dataclass(frozen=True, eq=False)
class Jet:
    """Node samples of ``(x, y, y', D y)`` along a path."""

    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    Dy: np.ndarray

    def env(self) -> dict[str, np.ndarray]:
        out = {"x": self.x}
        for i in range(self.y.shape[0]):
            out[f"y{i + 1}"] = self.y[i]
            out[f"dy{i + 1}"] = self.dy[i]
            out[f"Dy{i + 1}"] = self.Dy[i]
        return out


def _check_path(problem: ProblemSpec, y: SampledPath) -> None:
    if y.grid != problem.grid:
        raise fracops.GridMismatchError(f"path grid {y.grid} != problem grid {problem.grid}")
    if y.n_components != problem.n_components:
        raise ValueError(f"path has {y.n_components} components, problem has {problem.n_components}")


def path_jet(problem: ProblemSpec, y: SampledPath) -> Jet:
    """Sample ``y``, its finite-difference derivative and its combined Caputo derivative."""
    _check_path(problem, y)
    return Jet(
        x=problem.grid.x,
        y=y.values,
        dy=fracops.derivative(y).values,
        Dy=fracops.combined_caputo(y, problem.params).values,
    )


def _sample(expr: Expr | None, env: dict[str, np.ndarray], shape: tuple[int, ...]) -> np.ndarray:
    if expr is None:
        return np.zeros(shape)
    return np.broadcast_to(np.asarray(evaluate(expr, env), dtype=np.float64), shape)


def _sampled_partials(p: _Partials, jet: Jet) -> dict[str, np.ndarray]:
    env = jet.env()
    shape = jet.x.shape
    return {
        kind: np.array([_sample(e, env, shape) for e in p.by_kind[kind]])
        for kind in ("y", "dy", "Dy")
    }


# }}}


def cell_jet(problem: ProblemSpec, y: SampledPath) -> Jet:
    """Cell-midpoint samples used by the discrete functional.

    On each cell ``[x_k, x_{k+1}]`` the path value is the average of the two
    end nodes, ``y'`` is the forward difference and ``D y`` is the L1
    combined Caputo derivative at the midpoint.
    """
    _check_path(problem, y)
    v = y.values
    return Jet(
        x=problem.grid.x[:-1] + 0.5 * problem.grid.h,
        y=0.5 * (v[:, 1:] + v[:, :-1]),
        dy=np.diff(v, axis=1) / problem.grid.h,
        Dy=fracops.midpoint_combined_caputo(y, problem.params),
    )


def _cell_adjoint(problem: ProblemSpec, gy: np.ndarray, gdy: np.ndarray, gDy: np.ndarray) -> np.ndarray:
    # transpose of the map from node values to cell samples
    h = problem.grid.h
    out = fracops.midpoint_combined_caputo_adjoint(gDy, problem.grid, problem.params)
    out[:, 1:] += 0.5 * gy + gdy / h
    out[:, :-1] += 0.5 * gy - gdy / h
    return out


# }}}


# {{{ functionals


def _integral(expr: Expr, problem: ProblemSpec, jet: Jet) -> float:
    return float(problem.grid.h * _sample(expr, jet.env(), jet.x.shape).sum())


def functional_value(problem: ProblemSpec, y: SampledPath) -> float:
    """Midpoint-rule value of ``int L dx`` along the path."""
    return _integral(problem.lagrangian, problem, cell_jet(problem, y))


def constraint_values(problem: ProblemSpec, y: SampledPath) -> np.ndarray:
    """Midpoint-rule values of every constraint integral along the path."""
    jet = cell_jet(problem, y)
    return np.array([_integral(c.integrand, problem, jet) for c in problem.constraints])


def _integrand_gradient(p: _Partials, problem: ProblemSpec, jet: Jet) -> np.ndarray:
    d = _sampled_partials(p, jet)
    h = problem.grid.h
    return _cell_adjoint(problem, h * d["y"], h * d["dy"], h * d["Dy"])




def first_variation(problem: ProblemSpec, y: SampledPath, h: SampledPath) -> float:
    """Gateaux derivative of the discrete functional at *y* in the direction *h*."""
    _check_path(problem, h)
    g = _integrand_gradient(problem.lagrangian_partials, problem, cell_jet(problem, y))
    return float(np.sum(g * h.values))


def norm_1_infty(problem: ProblemSpec, y: SampledPath) -> float:
    """``max |y| + max |y'| + max |D y|`` with the Euclidean norm across components."""
    jet = path_jet(problem, y)
    return float(sum(np.linalg.norm(v, axis=0).max() for v in (jet.y, jet.dy, jet.Dy)))


# }}}


# {{{ Euler-Lagrange


@dataclass(frozen=True)
class Transversality:
    """Value of the natural boundary expression at ``x = b`` and its regime."""

    value: float
    mode: str
    endpoint: float
    cap: float | None = None

    def holds(self, tol: float) -> bool:
        if self.mode == "free":
            return abs(self.value) <= tol
        # capped: inequality always, equality whenever the cap is slack
        if self.value > tol:
            return False
        if self.endpoint < self.cap - tol:
            return abs(self.value) <= tol
        return True


@dataclass(frozen=True, eq=False)
class Residual:
    """Residuals of the first-order optimality conditions on a candidate path.

    *el* holds the Euler-Lagrange residual of each component on the interior
    nodes ``1 .. n-1``; :attr:`el_max` is its maximum over the assertion
    window ``[ceil(0.05 n), floor(0.95 n)]``.
    """

    grid: Grid
    el: np.ndarray
    transversality: Transversality | None = None
    constraint_violations: tuple[float, ...] = ()
    slackness: tuple[float, ...] = ()
    window: tuple[int, int] = field(default=(1, 1))

    @property
    def el_window(self) -> np.ndarray:
        lo, hi = self.window
        return self.el[:, lo - 1 : hi]

    @property
    def el_max(self) -> float:
        return float(np.abs(self.el_window).max())


def el_window(grid: Grid) -> tuple[int, int]:
    n = grid.n
    lo = max(1, math.ceil(EL_WINDOW[0] * n))
    hi = min(n - 1, math.floor(EL_WINDOW[1] * n))
    return lo, hi


def _el_values(p: _Partials, problem: ProblemSpec, jet: Jet) -> np.ndarray:
    d = _sampled_partials(p, jet)
    grid = problem.grid
    out = d["y"].copy()
    if p.depends_on("dy"):
        out -= fracops.derivative(SampledPath(grid, d["dy"])).values
    if p.depends_on("Dy"):
        out += fracops.dual_combined_rl(SampledPath(grid, d["Dy"]), problem.params).values
    return out


def _check_multipliers(problem: ProblemSpec, multipliers: MultiplierSet | None) -> MultiplierSet:
    r = len(problem.constraints)
    if multipliers is None:
        if r:
            raise ValueError(f"problem has {r} constraints but no multipliers were given")
        return MultiplierSet(())
    if len(multipliers) != r:
        raise ValueError(f"expected {r} multipliers: got {len(multipliers)}")
    return multipliers


def el_residual(
    problem: ProblemSpec, y: SampledPath, multipliers: MultiplierSet | None = None
) -> Residual:
    """Euler-Lagrange residual of the (augmented) integrand along *y*.

    The node-wise value ``d_y F - d/dx d_y' F + D_dual d_Dy F`` is computed
    for ``F = L - sum_j s_j lambda_j G_j`` (``s_j`` per :attr:`Constraint.sign`).
    Transversality, constraint violations and slackness products are filled
    in when the problem has an open endpoint or constraints.
    """
    lam = _check_multipliers(problem, multipliers)
    jet = path_jet(problem, y)
    el = _el_values(problem.lagrangian_partials, problem, jet)
    for c, p, lj in zip(problem.constraints, problem.constraint_partials, lam.values):
        if lj != 0.0:
            el = el - c.sign * lj * _el_values(p, problem, jet)

    violations: tuple[float, ...] = ()
    slack: tuple[float, ...] = ()
    if problem.constraints:
        values = constraint_values(problem, y)
        violations = tuple(float(v) for v in _violations(problem, values))
        slack = tuple(float(v) for v in _slackness(problem, values, lam))

    trans = None
    if problem.bc.open_index is not None:
        trans = _transversality(problem, jet, lam)

    return Residual(
        grid=problem.grid,
        el=el[:, 1:-1],
        transversality=trans,
        constraint_violations=violations,
        slackness=slack,
        window=el_window(problem.grid),
    )


# }}}


# {{{ transversality


def _transversality(problem: ProblemSpec, jet: Jet, lam: MultiplierSet) -> Transversality:
    l = problem.bc.open_index
    grid, params = problem.grid, problem.params

    def partials(p: _Partials) -> tuple[np.ndarray, np.ndarray]:
        d = _sampled_partials(p, jet)
        return d["dy"][l], d["Dy"][l]

    ddy, dDy = partials(problem.lagrangian_partials)
    for c, p, lj in zip(problem.constraints, problem.constraint_partials, lam.values):
        if lj != 0.0:
            a, b = partials(p)
            ddy = ddy - c.sign * lj * a
            dDy = dDy - c.sign * lj * b

    g = SampledPath(grid, dDy)
    right = fracops.right_rlfi(g, 1.0 - params.alpha).values[0]
    left = fracops.left_rlfi(g, 1.0 - params.beta).values[0]
    # the right integral degenerates to the empty integral at x = b; its
    # boundary value is the limit from the left, taken at the last interior node
    value = ddy[-1] + params.gamma * right[-2] - (1.0 - params.gamma) * left[-1]

    cond = problem.bc.right[l]
    return Transversality(
        value=float(value),
        mode=cond.kind,
        endpoint=float(jet.y[l, -1]),
        cap=cond.value if cond.kind == "capped" else None,
    )


def transversality_residual(
    problem: ProblemSpec, y: SampledPath, multipliers: MultiplierSet | None = None
) -> Transversality:
    """Natural boundary expression at ``x = b`` for the free or capped component.

    :raises ValueError: if every right endpoint is fixed.
    """
    if problem.bc.open_index is None:
        raise ValueError("transversality needs a free or capped right endpoint")
    lam = _check_multipliers(problem, multipliers)
    return _transversality(problem, path_jet(problem, y), lam)


# }}}


# {{{ constraints


def _violations(problem: ProblemSpec, values: np.ndarray) -> np.ndarray:
    """``G - xi`` for equalities and ``max(0, G - xi)`` for inequalities."""
    out = np.empty(len(problem.constraints))
    for j, (c, v) in enumerate(zip(problem.constraints, values)):
        out[j] = v - c.target if c.kind == "equality" else max(0.0, v - c.target)
    return out


def _slackness(problem: ProblemSpec, values: np.ndarray, lam: MultiplierSet) -> np.ndarray:
    return np.array(
        [lj * (c.target - v) for c, v, lj in zip(problem.constraints, values, lam.values)]
    )


def slackness_check(problem: ProblemSpec, y: SampledPath, multipliers: MultiplierSet) -> np.ndarray:
    """Complementary slackness products ``lambda_j (xi_j - G_j(y))``."""
    lam = _check_multipliers(problem, multipliers)
    return _slackness(problem, constraint_values(problem, y), lam)


def check_regularity(
    problem: ProblemSpec, y: SampledPath, directions: Sequence[SampledPath]
) -> int:
    """Numerical rank of the matrix of constraint first variations.

    Entry ``(k, l)`` is the first variation of constraint ``k`` at *y* in
    direction ``l``; singular values below ``1e-8`` times the largest are
    treated as zero.
    """
    if not problem.constraints or not directions:
        return 0
    jet = cell_jet(problem, y)
    for h in directions:
        _check_path(problem, h)
    grads = [_integrand_gradient(p, problem, jet) for p in problem.constraint_partials]
    a = np.array([[np.sum(g * h.values) for h in directions] for g in grads])
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > 1e-8 * s[0]))


# }}}
