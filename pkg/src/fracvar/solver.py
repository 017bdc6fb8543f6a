"""Direct method: minimize the discretized functional over node values.

Interior node values (plus the right node of a free or capped component)
are the decision variables. The unconstrained problem is solved with a
limited-memory quasi-Newton method and Armijo backtracking; integral
constraints are handled by an augmented-Lagrangian outer loop.

Gradients are exact for the discrete objective: every discrete operator is
linear in the node values, so its transpose is applied to the sampled
partial derivatives of the integrand.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_banded

from fracvar import fracops
from fracvar.fracops import SampledPath
from fracvar.variational import (
    MultiplierSet,
    ProblemSpec,
    Residual,
    _Partials,
    _sample,
    _integrand_gradient,
    check_regularity,
    el_residual,
    cell_jet,
    functional_value,
)

__all__ = [
    "SolveOptions",
    "SolveReport",
    "discrete_gradient",
    "solve",
    "solve_basic",
    "solve_free_endpoint",
    "solve_isoperimetric",
]

logger = logging.getLogger(__name__)

MAX_PENALTY = 1.0e8
MAX_OUTER_ITERATIONS = 60


@dataclass(frozen=True)
class SolveOptions:
    """Solver controls.

    *gradient_tolerance* bounds the max-norm of the objective gradient divided
    by the grid spacing (a grid-independent stationarity measure); ``None``
    selects 1e-8 for problems without fractional terms and 1e-6 otherwise.
    *preconditioner* is ``"auto"``, ``"hessian"``, ``"laplacian"`` or
    ``"none"``. ``"hessian"`` factors the exact Hessian of the merit function
    at the start of every inner solve and uses it as the initial L-BFGS
    curvature; ``"auto"`` selects it.
    """

    max_iterations: int = 5000
    gradient_tolerance: float | None = None
    constraint_tolerance: float = 1.0e-8
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    seed: int = 0
    perturbation: float = 0.0
    memory: int = 10
    preconditioner: str = "auto"

    def __post_init__(self) -> None:
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.gradient_tolerance is not None and self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.constraint_tolerance <= 0 or self.penalty_initial <= 0:
            raise ValueError("tolerances and penalty must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.perturbation < 0 or self.memory <= 0:
            raise ValueError("perturbation must be non-negative and memory positive")
        if self.preconditioner not in ("auto", "hessian", "laplacian", "none"):
            raise ValueError(f"unknown preconditioner: {self.preconditioner!r}")


@dataclass(frozen=True, eq=False)
class SolveReport:
    path: SampledPath
    multipliers: MultiplierSet
    objective: float
    residual: Residual
    iterations: int
    converged: bool
    gradient_norm: float
    warnings: tuple[str, ...] = ()
    #: objective values at accepted steps of the (last) inner solve
    history: tuple[float, ...] = field(default=(), repr=False)


# {{{ discrete objective


class _Layout:
    """Map between the decision vector and full node arrays."""

    def __init__(self, problem: ProblemSpec) -> None:
        n_comp, n = problem.n_components, problem.grid.n
        self.problem = problem
        self.mask = np.zeros((n_comp, n + 1), dtype=bool)
        self.mask[:, 1:n] = True
        self.upper = np.full((n_comp, n + 1), np.inf)
        l = problem.bc.open_index
        if l is not None:
            self.mask[l, n] = True
            cond = problem.bc.right[l]
            if cond.kind == "capped":
                self.upper[l, n] = cond.value
        self.base = problem.linear_path().values.copy()
        self.base[self.mask] = 0.0
        self.ub = self.upper[self.mask]
        self.size = int(self.mask.sum())

    def full(self, z: np.ndarray) -> np.ndarray:
        y = self.base.copy()
        y[self.mask] = z
        return y

    def path(self, z: np.ndarray) -> SampledPath:
        return SampledPath(self.problem.grid, self.full(z))

    def restrict(self, g: np.ndarray) -> np.ndarray:
        return g[self.mask]


def _integrand_value(p: _Partials, problem: ProblemSpec, jet) -> float:
    return float(problem.grid.h * _sample(p.expr, jet.env(), jet.x.shape).sum())


def discrete_gradient(problem: ProblemSpec, y: SampledPath) -> SampledPath:
    """Exact gradient of the discretized functional w.r.t. the decision variables.

    Entries at nodes fixed by the boundary conditions are zero.
    """
    jet = cell_jet(problem, y)
    g = _integrand_gradient(problem.lagrangian_partials, problem, jet)
    layout = _Layout(problem)
    return SampledPath(problem.grid, np.where(layout.mask, g, 0.0))


class _Objective:
    """Augmented-Lagrangian merit function on the decision vector."""

    def __init__(self, problem: ProblemSpec, layout: _Layout) -> None:
        self.problem = problem
        self.layout = layout
        self.lam = np.zeros(len(problem.constraints))
        self.rho = 0.0

    def parts(self, z: np.ndarray):
        problem = self.problem
        jet = cell_jet(problem, self.layout.path(z))
        j = _integrand_value(problem.lagrangian_partials, problem, jet)
        gj = _integrand_gradient(problem.lagrangian_partials, problem, jet)
        cons = []
        for c, p in zip(problem.constraints, problem.constraint_partials):
            cons.append((c, _integrand_value(p, problem, jet), p))
        return jet, j, gj, cons

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        problem, rho = self.problem, self.rho
        jet, f, g, cons = self.parts(z)
        for (c, value, p), lam in zip(cons, self.lam):
            viol = value - c.target
            if c.kind == "equality":
                f += -lam * viol + 0.5 * rho * viol**2
                coef = -lam + rho * viol
            else:
                shifted = max(0.0, lam + rho * viol)
                f += (shifted**2 - lam**2) / (2.0 * rho)
                coef = shifted
            if coef != 0.0:
                g = g + coef * _integrand_gradient(p, problem, jet)
        return f, self.layout.restrict(g)


# }}}


# {{{ quasi-Newton


class _Preconditioner:
    """Inverse of a per-component tridiagonal Laplacian on the decision nodes."""

    def __init__(self, layout: _Layout) -> None:
        h = layout.problem.grid.h
        self.blocks = []
        start = 0
        for row in layout.mask:
            m = int(row.sum())
            ab = np.zeros((3, m))
            ab[0, 1:] = -1.0 / h
            ab[1, :] = 2.0 / h
            ab[2, :-1] = -1.0 / h
            if row[-1]:
                ab[1, -1] = 1.0 / h
            self.blocks.append((slice(start, start + m), ab))
            start += m

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for s, ab in self.blocks:
            out[s] = solve_banded((1, 1), ab, v[s])
        return out


def _jet_maps(problem: ProblemSpec) -> dict[str, np.ndarray]:
    """Dense matrices of the node-to-cell maps for ``y``, ``y'`` and ``D y``."""
    grid = problem.grid
    n = grid.n
    eye = np.eye(n + 1)
    avg = 0.5 * (eye[1:] + eye[:-1])
    fwd = (eye[1:] - eye[:-1]) / grid.h
    frac = fracops.midpoint_combined_caputo(SampledPath(grid, eye), problem.params).T
    return {"y": avg, "dy": fwd, "Dy": frac}


class _HessianPreconditioner:
    """Cholesky factor of the merit Hessian on the decision variables.

    The cell jet is linear in the node values, so the Hessian of
    ``h * sum L(jet)`` is ``A^T diag(h d2L) A`` summed over pairs of jet
    kinds. Indefinite Hessians get a growing diagonal shift.
    """

    def __init__(self, objective: _Objective, z: np.ndarray) -> None:
        problem, layout = objective.problem, objective.layout
        maps = _jet_maps(problem)
        jet = cell_jet(problem, layout.path(z))
        n_comp, size = problem.n_components, problem.grid.n + 1
        full = np.zeros((n_comp * size, n_comp * size))
        h = problem.grid.h

        def add(p: _Partials, coef: float) -> None:
            env = jet.env()
            for (ka, i, kb, j), e in p.second.items():
                w = coef * h * _sample(e, env, jet.x.shape)
                full[i * size:(i + 1) * size, j * size:(j + 1) * size] += maps[ka].T @ (w[:, None] * maps[kb])

        add(problem.lagrangian_partials, 1.0)
        _, _, _, cons = objective.parts(z)
        for (c, value, p), lam in zip(cons, objective.lam):
            viol = value - c.target
            if c.kind == "equality":
                coef, curv = -lam + objective.rho * viol, objective.rho
            else:
                coef = max(0.0, lam + objective.rho * viol)
                curv = objective.rho if coef > 0.0 else 0.0
            if coef != 0.0:
                add(p, coef)
            if curv != 0.0:
                gc = _integrand_gradient(p, problem, jet).ravel()
                full += curv * np.outer(gc, gc)

        idx = np.flatnonzero(layout.mask.ravel())
        hess = full[np.ix_(idx, idx)]
        hess = 0.5 * (hess + hess.T)
        scale = float(np.abs(np.diag(hess)).max(initial=0.0)) or 1.0
        shift = 0.0
        while True:
            try:
                self.factor = cho_factor(hess + shift * np.eye(len(idx)))
                break
            except LinAlgError:
                shift = max(2.0 * shift, 1e-10 * scale)
        if shift:
            logger.debug("hessian preconditioner shifted by %.3e", shift)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, v)


@dataclass
class _MinimizeResult:
    z: np.ndarray
    f: float
    gnorm: float
    iterations: int
    converged: bool
    history: list[float]


def _on_free_set(apply, free: np.ndarray):
    """Restrict an inverse-curvature operator to the free variables.

    With ``B`` the held variables, solves ``H_FF r_F = v_F`` using only
    products with ``H^{-1}`` (a Schur complement on the few held entries).
    """
    held = np.flatnonzero(~free)
    if held.size == 0:
        return apply
    cols = np.stack([apply(np.eye(free.size)[i]) for i in held], axis=1)
    schur = cols[held]

    def restricted(v: np.ndarray) -> np.ndarray:
        v = np.where(free, v, 0.0)
        r = apply(v)
        r -= cols @ np.linalg.solve(schur, r[held])
        r[held] = 0.0
        return r

    return restricted


def _minimize(fun, z0, ub, scale, tol, max_iter, memory, precond) -> _MinimizeResult:
    """Projected L-BFGS with Armijo backtracking (c = 1e-4, halving).

    Only upper bounds *ub* are supported; variables at their bound with a
    gradient pushing outward are held fixed for the step.
    """
    base_h0 = precond if precond is not None else (lambda v: v)
    z = np.minimum(z0, ub)
    f, g = fun(z)
    history = [f]
    pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=memory)

    def free_mask(z, g):
        return ~((z >= ub) & (g < 0.0))

    it = 0
    gnorm = math.inf
    prev_free = None
    while True:
        free = free_mask(z, g)
        if prev_free is not None and not np.array_equal(free, prev_free):
            pairs.clear()
        prev_free = free
        apply_h0 = _on_free_set(base_h0, free)
        pg = np.where(free, g, 0.0)
        gnorm = float(np.abs(pg).max(initial=0.0)) / scale
        if gnorm <= tol:
            return _MinimizeResult(z, f, gnorm, it, True, history)
        if it >= max_iter:
            return _MinimizeResult(z, f, gnorm, it, False, history)

        # two-loop recursion
        q = pg.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        r = apply_h0(q)
        if pairs:
            s, y, _ = pairs[-1]
            hy = apply_h0(y)
            r *= (s @ y) / (y @ hy)
        elif precond is None:
            r /= max(1.0, float(np.abs(pg).max()))
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * (y @ r)
            r += (a - b) * s
        d = np.where(free, -r, 0.0)

        slope = float(g @ d)
        if slope >= 0.0:
            pairs.clear()
            d = -pg
            slope = float(g @ d)

        t = 1.0
        accepted = False
        for _ in range(60):
            z_new = np.minimum(z + t * d, ub)
            f_new, g_new = fun(z_new)
            if f_new <= f + 1e-4 * float(g @ (z_new - z)) and np.isfinite(f_new):
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            logger.debug("line search failed at iteration %d", it)
            return _MinimizeResult(z, f, gnorm, it, False, history)

        s = z_new - z
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
        z, f, g = z_new, f_new, g_new
        history.append(f)


# }}}


# {{{ drivers


def _depends_on(problem: ProblemSpec, kind: str) -> bool:
    parts = (problem.lagrangian_partials, *problem.constraint_partials)
    return any(p.depends_on(kind) for p in parts)


def _resolve(problem: ProblemSpec, options: SolveOptions) -> SolveOptions:
    if options.gradient_tolerance is None:
        tol = 1e-6 if _depends_on(problem, "Dy") else 1e-8
        options = replace(options, gradient_tolerance=tol)
    return options


def _initial(layout: _Layout, options: SolveOptions) -> np.ndarray:
    z = layout.restrict(layout.problem.linear_path().values)
    if options.perturbation > 0.0:
        rng = np.random.default_rng(options.seed)
        z = z + options.perturbation * rng.standard_normal(z.shape)
    return np.minimum(z, layout.ub)


def _solve(problem: ProblemSpec, options: SolveOptions) -> SolveReport:
    options = _resolve(problem, options)
    layout = _Layout(problem)
    objective = _Objective(problem, layout)
    h = problem.grid.h

    def inner(z0: np.ndarray) -> _MinimizeResult:
        if options.preconditioner in ("auto", "hessian"):
            precond = _HessianPreconditioner(objective, z0)
        elif options.preconditioner == "laplacian":
            precond = _Preconditioner(layout)
        else:
            precond = None
        return _minimize(
            objective,
            z0,
            layout.ub,
            h,
            options.gradient_tolerance,
            options.max_iterations,
            options.memory,
            precond,
        )

    z = _initial(layout, options)
    warnings: list[str] = []
    iterations = 0

    if not problem.constraints:
        res = inner(z)
        iterations = res.iterations
        converged = res.converged
    else:
        objective.rho = options.penalty_initial
        prev = math.inf
        converged = False
        for outer in range(MAX_OUTER_ITERATIONS):
            res = inner(z)
            iterations += res.iterations
            z = res.z
            _, _, _, cons = objective.parts(z)
            viol = np.empty(len(cons))
            new_lam = objective.lam.copy()
            for j, ((c, value, _), lam) in enumerate(zip(cons, objective.lam)):
                cj = value - c.target
                if c.kind == "equality":
                    new_lam[j] = lam - objective.rho * cj
                    viol[j] = abs(cj)
                else:
                    new_lam[j] = max(0.0, lam + objective.rho * cj)
                    viol[j] = abs(max(cj, -lam / objective.rho))
            objective.lam = new_lam
            worst = float(viol.max())
            logger.info(
                "outer %d: violation %.3e, rho %.1e, multipliers %s",
                outer, worst, objective.rho, np.array2string(new_lam, precision=6),
            )
            # with the updated multipliers the Lagrangian gradient equals the
            # inner merit gradient, so inner convergence carries over
            if res.converged and worst <= options.constraint_tolerance:
                converged = True
                break
            if worst > 0.25 * prev:
                objective.rho = min(objective.rho * options.penalty_growth, MAX_PENALTY)
            prev = worst
        else:
            warnings.append(f"augmented Lagrangian stopped after {MAX_OUTER_ITERATIONS} outer iterations")

    path = layout.path(res.z)
    lam = MultiplierSet(tuple(objective.lam))
    if problem.constraints:
        warnings.extend(_regularity_warnings(problem, path, lam))
    if not converged:
        warnings.append("did not converge")
    return SolveReport(
        path=path,
        multipliers=lam,
        objective=functional_value(problem, path),
        residual=el_residual(problem, path, lam if problem.constraints else None),
        iterations=iterations,
        converged=converged,
        gradient_norm=res.gnorm,
        warnings=tuple(warnings),
        history=tuple(res.history),
    )


def _regularity_warnings(problem: ProblemSpec, path: SampledPath, lam: MultiplierSet) -> list[str]:
    # directions: gradients of the active constraints restricted to decision nodes
    layout = _Layout(problem)
    jet = cell_jet(problem, path)
    values = [
        _integrand_value(p, problem, jet) for p in problem.constraint_partials
    ]
    active = [
        j
        for j, c in enumerate(problem.constraints)
        if c.kind == "equality" or values[j] >= c.target - 1e-6 or lam.values[j] > 0.0
    ]
    if not active:
        return []
    directions = [
        SampledPath(
            problem.grid,
            np.where(layout.mask, _integrand_gradient(problem.constraint_partials[j], problem, jet), 0.0),
        )
        for j in active
    ]
    sub = replace(problem, constraints=tuple(problem.constraints[j] for j in active))
    rank = check_regularity(sub, path, directions)
    if rank < len(active):
        return [f"regularity condition fails: rank {rank} < {len(active)} active constraints"]
    return []


def solve(problem: ProblemSpec, options: SolveOptions | None = None) -> SolveReport:
    """Solve any supported problem (fixed, free or capped end, with or without constraints)."""
    return _solve(problem, options or SolveOptions())


def solve_basic(problem: ProblemSpec, options: SolveOptions | None = None) -> SolveReport:
    """Minimize with all endpoints fixed and no integral constraints."""
    if problem.bc.open_index is not None:
        raise ValueError("solve_basic needs fixed boundary conditions")
    if problem.constraints:
        raise ValueError("solve_basic does not handle constraints; use solve_isoperimetric")
    return solve(problem, options)


def solve_free_endpoint(problem: ProblemSpec, options: SolveOptions | None = None) -> SolveReport:
    """Minimize with one free or capped right endpoint (projected for the cap)."""
    if problem.bc.open_index is None:
        raise ValueError("solve_free_endpoint needs a free or capped right endpoint")
    return solve(problem, options)


def solve_isoperimetric(problem: ProblemSpec, options: SolveOptions | None = None) -> SolveReport:
    """Minimize subject to integral equality/inequality constraints."""
    if not problem.constraints:
        raise ValueError("solve_isoperimetric needs at least one constraint")
    return solve(problem, options)


# }}}
