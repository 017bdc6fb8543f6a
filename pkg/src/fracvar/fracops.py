"""Discrete fractional operators on uniformly sampled functions.

All operators act on every node of a :class:`Grid` at once and return a new
:class:`SampledPath`. The discretizations are

* Riemann-Liouville integrals: product-trapezoidal rule (piecewise-linear
  interpolant of ``f`` integrated exactly against the singular kernel);
* Caputo derivatives: the L1 scheme (piecewise-linear interpolant of ``f``
  differentiated inside the kernel integral);
* Riemann-Liouville derivatives: second-order finite differences of the
  discrete integral of order ``1 - alpha``.

Right-sided operators are the node-reversed left operators applied to the
node-reversed input, which makes the reflection identities hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "FractionalParams",
    "Grid",
    "GridMismatchError",
    "SampledPath",
    "check_combined_parts",
    "check_rlfi_parts",
    "combined_caputo",
    "combined_caputo_adjoint",
    "derivative",
    "derivative_adjoint",
    "dual_combined_rl",
    "left_caputo",
    "left_rlfd",
    "left_rlfi",
    "midpoint_combined_caputo",
    "midpoint_combined_caputo_adjoint",
    "right_caputo",
    "right_rlfd",
    "right_rlfi",
]


class GridMismatchError(ValueError):
    """Two sampled paths that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[a, b]`` into ``n`` subintervals."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise ValueError(f"need finite a < b: got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer n >= 2: got {self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = self.a + self.h * np.arange(self.n + 1)
        x[-1] = self.b
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoidal weights."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        """Trapezoidal integral along the last axis."""
        return np.asarray(values) @ self.weights

    def sample(self, *fns) -> SampledPath:
        """Sample callables (vectorized over ``x``) into a path."""
        return SampledPath(self, np.array([np.broadcast_to(f(self.x), self.x.shape) for f in fns]))


@dataclass(frozen=True, eq=False)
class SampledPath:
    """``N``-component function sampled at the ``n + 1`` nodes of a grid.

    *values* has shape ``(N, n + 1)``; a 1D array is taken as one component.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.n + 1:
            raise ValueError(
                f"expected values of shape (N, {self.grid.n + 1}): got {np.shape(self.values)}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> SampledPath:
        return SampledPath(self.grid, self.values[i])

    def reversed(self) -> SampledPath:
        """Path sampled at the reflected nodes ``a + b - x``."""
        return SampledPath(self.grid, self.values[:, ::-1])

    def with_values(self, values: np.ndarray) -> SampledPath:
        return SampledPath(self.grid, values)

    def __add__(self, other: SampledPath) -> SampledPath:
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: SampledPath) -> SampledPath:
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> SampledPath:
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FractionalParams:
    """Orders and mixing weight of the combined Caputo operator."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1): got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1): got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1]: got {self.gamma}")


def _flip(v: np.ndarray) -> np.ndarray:
    # contiguous copy, so a right operator and the reflected left operator
    # hit identical BLAS code paths and agree bit for bit
    return np.ascontiguousarray(v[..., ::-1])


def _check_same_grid(f: SampledPath, g: SampledPath) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"paths live on different grids: {f.grid} != {g.grid}")


def _check_integral_order(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"integral order must lie in (0, 1]: got {alpha}")


def _check_derivative_order(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"derivative order must lie in (0, 1): got {alpha}")


# {{{ weights


@lru_cache(maxsize=16)
def _rlfi_weights(n: int, alpha: float) -> np.ndarray:
    """Unscaled product-trapezoidal matrix; multiply by ``h^alpha / Gamma(alpha + 2)``."""
    k = np.arange(n + 1, dtype=np.float64)[:, None]
    j = np.arange(n + 1, dtype=np.float64)[None, :]
    d = k - j
    p = alpha + 1.0
    with np.errstate(invalid="ignore"):
        inner = np.abs(d + 1.0) ** p - 2.0 * np.abs(d) ** p + np.abs(d - 1.0) ** p
    w = np.where(d > 0, inner, 0.0)
    w[np.arange(n + 1), np.arange(n + 1)] = 1.0
    kk = k[1:, 0]
    w[1:, 0] = (kk - 1.0) ** p - (kk - 1.0 - alpha) * kk**alpha
    w[0, :] = 0.0
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def _l1_weights(n: int, alpha: float) -> np.ndarray:
    """Lower-triangular Toeplitz matrix acting on first differences.

    Entry ``(k, m)`` is ``b_{k-m}`` with ``b_j = (j + 1)^(1-alpha) - j^(1-alpha)``;
    row ``k - 1`` produces the L1 value at node ``k`` (unscaled by
    ``h^-alpha / Gamma(2 - alpha)``).
    """
    j = np.arange(n, dtype=np.float64)
    b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    d = np.arange(n)[:, None] - np.arange(n)[None, :]
    w = np.where(d >= 0, b[np.clip(d, 0, None)], 0.0)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def _l1_midpoint_weights(n: int, alpha: float) -> np.ndarray:
    """L1 weights for the value at the midpoint of each cell.

    Entry ``(k, m)`` weights the difference ``f_{m+1} - f_m`` in the value at
    ``x_k + h/2``: the current cell contributes over half its width only.
    """
    d = np.arange(n, dtype=np.float64)
    b = np.empty(n)
    b[0] = 0.5 ** (1.0 - alpha)
    b[1:] = (d[1:] + 0.5) ** (1.0 - alpha) - (d[1:] - 0.5) ** (1.0 - alpha)
    k = np.arange(n)[:, None] - np.arange(n)[None, :]
    w = np.where(k >= 0, b[np.clip(k, 0, None)], 0.0)
    w.setflags(write=False)
    return w


# }}}


# {{{ classical derivative


def _diff2(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return out


def _diff2_adjoint(g: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(g)
    c = 1.0 / (2.0 * h)
    out[..., 2:] += c * g[..., 1:-1]
    out[..., :-2] -= c * g[..., 1:-1]
    out[..., 0] += -3.0 * c * g[..., 0]
    out[..., 1] += 4.0 * c * g[..., 0]
    out[..., 2] += -c * g[..., 0]
    out[..., -1] += 3.0 * c * g[..., -1]
    out[..., -2] += -4.0 * c * g[..., -1]
    out[..., -3] += c * g[..., -1]
    return out


def derivative(f: SampledPath) -> SampledPath:
    """Second-order finite-difference derivative, one-sided at the endpoints."""
    return f.with_values(_diff2(f.values, f.grid.h))


def derivative_adjoint(g: SampledPath) -> SampledPath:
    """Transpose of :func:`derivative` as a linear map on node values."""
    return g.with_values(_diff2_adjoint(g.values, g.grid.h))


# }}}


# {{{ Riemann-Liouville integrals


def _left_rlfi(v: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    scale = grid.h**alpha / math.gamma(alpha + 2.0)
    return scale * (v @ _rlfi_weights(grid.n, alpha).T)


def left_rlfi(f: SampledPath, alpha: float) -> SampledPath:
    """Left Riemann-Liouville integral of order *alpha* at every node."""
    _check_integral_order(alpha)
    return f.with_values(_left_rlfi(f.values, f.grid, alpha))


def right_rlfi(f: SampledPath, alpha: float) -> SampledPath:
    """Right Riemann-Liouville integral of order *alpha* at every node."""
    _check_integral_order(alpha)
    return f.with_values(_left_rlfi(_flip(f.values), f.grid, alpha)[:, ::-1])


# }}}


# {{{ Caputo derivatives


def _left_caputo(v: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    scale = grid.h ** (-alpha) / math.gamma(2.0 - alpha)
    out = np.zeros_like(v)
    out[:, 1:] = scale * (np.diff(v, axis=-1) @ _l1_weights(grid.n, alpha).T)
    return out


def _left_caputo_adjoint(g: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    scale = grid.h ** (-alpha) / math.gamma(2.0 - alpha)
    t = scale * (g[:, 1:] @ _l1_weights(grid.n, alpha))
    out = np.zeros_like(g)
    out[:, 1:] += t
    out[:, :-1] -= t
    return out


def left_caputo(f: SampledPath, alpha: float) -> SampledPath:
    """Left Caputo derivative by the L1 scheme; the node-0 value is 0."""
    _check_derivative_order(alpha)
    return f.with_values(_left_caputo(f.values, f.grid, alpha))


def right_caputo(f: SampledPath, alpha: float) -> SampledPath:
    """Right Caputo derivative (with its leading minus sign); the node-n value is 0."""
    _check_derivative_order(alpha)
    return f.with_values(_left_caputo(_flip(f.values), f.grid, alpha)[:, ::-1])


def combined_caputo(f: SampledPath, params: FractionalParams) -> SampledPath:
    """``gamma * left_caputo(f, alpha) + (1 - gamma) * right_caputo(f, beta)``."""
    g = params.gamma
    if g == 1.0:
        return left_caputo(f, params.alpha)
    if g == 0.0:
        return right_caputo(f, params.beta)
    left = left_caputo(f, params.alpha).values
    right = right_caputo(f, params.beta).values
    return f.with_values(g * left + (1.0 - g) * right)


def _midpoint_left(v: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    scale = grid.h ** (-alpha) / math.gamma(2.0 - alpha)
    return scale * (np.diff(v, axis=-1) @ _l1_midpoint_weights(grid.n, alpha).T)


def _midpoint_left_adjoint(g: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    scale = grid.h ** (-alpha) / math.gamma(2.0 - alpha)
    t = scale * (g @ _l1_midpoint_weights(grid.n, alpha))
    out = np.zeros(g.shape[:-1] + (g.shape[-1] + 1,))
    out[..., 1:] += t
    out[..., :-1] -= t
    return out


def midpoint_combined_caputo(f: SampledPath, params: FractionalParams) -> np.ndarray:
    """Combined Caputo derivative at the ``n`` cell midpoints, shape ``(N, n)``.

    Same L1 interpolant as :func:`combined_caputo`, evaluated at
    ``x_k + h/2`` instead of at the nodes.
    """
    grid, v = f.grid, f.values
    out = np.zeros((v.shape[0], grid.n))
    if params.gamma > 0.0:
        out += params.gamma * _midpoint_left(v, grid, params.alpha)
    if params.gamma < 1.0:
        right = _midpoint_left(_flip(v), grid, params.beta)[:, ::-1]
        out += (1.0 - params.gamma) * right
    return out


def midpoint_combined_caputo_adjoint(
    g: np.ndarray, grid: Grid, params: FractionalParams
) -> np.ndarray:
    """Transpose of :func:`midpoint_combined_caputo`: ``(N, n)`` -> ``(N, n + 1)``."""
    g = np.atleast_2d(g)
    out = np.zeros((g.shape[0], grid.n + 1))
    if params.gamma > 0.0:
        out += params.gamma * _midpoint_left_adjoint(g, grid, params.alpha)
    if params.gamma < 1.0:
        right = _midpoint_left_adjoint(_flip(g), grid, params.beta)[:, ::-1]
        out += (1.0 - params.gamma) * right
    return out


def combined_caputo_adjoint(g: SampledPath, params: FractionalParams) -> SampledPath:
    """Transpose of :func:`combined_caputo` as a linear map on node values."""
    grid, v = g.grid, g.values
    out = np.zeros_like(v)
    if params.gamma > 0.0:
        out += params.gamma * _left_caputo_adjoint(v, grid, params.alpha)
    if params.gamma < 1.0:
        right = _left_caputo_adjoint(_flip(v), grid, params.beta)[:, ::-1]
        out += (1.0 - params.gamma) * right
    return g.with_values(out)


# }}}


# {{{ Riemann-Liouville derivatives


def left_rlfd(f: SampledPath, alpha: float) -> SampledPath:
    """Left Riemann-Liouville derivative: ``d/dx`` of the ``(1 - alpha)`` integral.

    For ``f(a) != 0`` the exact derivative is singular at ``x = a``; the node-0
    value is a one-sided difference and carries no accuracy guarantee.
    """
    _check_derivative_order(alpha)
    return derivative(left_rlfi(f, 1.0 - alpha))


def right_rlfd(f: SampledPath, alpha: float) -> SampledPath:
    """Right Riemann-Liouville derivative: ``-d/dx`` of the right ``(1 - alpha)`` integral."""
    _check_derivative_order(alpha)
    return left_rlfd(f.reversed(), alpha).reversed()


def dual_combined_rl(g: SampledPath, params: FractionalParams) -> SampledPath:
    """``(1 - gamma) * left_rlfd(g, beta) + gamma * right_rlfd(g, alpha)``.

    This is the operator that acts on the fractional partial of the
    Lagrangian in the Euler-Lagrange equation.
    """
    c = params.gamma
    if c == 1.0:
        return right_rlfd(g, params.alpha)
    if c == 0.0:
        return left_rlfd(g, params.beta)
    left = left_rlfd(g, params.beta).values
    right = right_rlfd(g, params.alpha).values
    return g.with_values((1.0 - c) * left + c * right)


# }}}


# {{{ integration by parts


def _single(f: SampledPath, name: str) -> None:
    if f.n_components != 1:
        raise ValueError(f"'{name}' must have a single component: got {f.n_components}")


def check_rlfi_parts(f: SampledPath, g: SampledPath, alpha: float) -> float:
    """Residual of ``int g * I_left^alpha f = int f * I_right^alpha g``."""
    _check_same_grid(f, g)
    _single(f, "f")
    _single(g, "g")
    grid = f.grid
    lhs = grid.integrate(g.values[0] * left_rlfi(f, alpha).values[0])
    rhs = grid.integrate(f.values[0] * right_rlfi(g, alpha).values[0])
    return abs(float(lhs - rhs))


def check_combined_parts(
    f: SampledPath, g: SampledPath, params: FractionalParams
) -> tuple[float, float]:
    """Residual of the integration-by-parts formula for the combined operator.

    Returns ``(residual, boundary_term)`` where *residual* is
    ``|LHS - RHS_integral - boundary_term|`` and *boundary_term* is the
    bracket ``[gamma f I_right^(1-alpha) g - (1-gamma) f I_left^(1-beta) g]``
    evaluated from ``a`` to ``b``.
    """
    _check_same_grid(f, g)
    _single(f, "f")
    _single(g, "g")
    grid = f.grid
    fv, gv = f.values[0], g.values[0]

    lhs = grid.integrate(gv * combined_caputo(f, params).values[0])
    rhs = grid.integrate(fv * dual_combined_rl(g, params).values[0])

    right_int = right_rlfi(g, 1.0 - params.alpha).values[0]
    left_int = left_rlfi(g, 1.0 - params.beta).values[0]
    bracket = params.gamma * fv * right_int - (1.0 - params.gamma) * fv * left_int
    boundary = float(bracket[-1] - bracket[0])

    return abs(float(lhs - rhs) - boundary), boundary


# }}}
