from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fracvar import fracops
from fracvar.fracops import FractionalParams, Grid, GridMismatchError, SampledPath
from oracles import (
    left_caputo_oracle,
    left_rlfi_oracle,
    observed_orders,
    right_caputo_oracle,
    right_rlfi_oracle,
)

UNIT = Grid(0.0, 1.0, 100)


def path(grid: Grid, fn) -> SampledPath:
    return grid.sample(fn)


# {{{ containers


def test_grid_nodes_and_spacing():
    g = Grid(-1.0, 2.0, 6)
    assert g.h == pytest.approx(0.5)
    assert g.x[0] == -1.0 and g.x[-1] == 2.0
    assert np.all(np.diff(g.x) > 0)
    assert g.integrate(np.ones(7)) == pytest.approx(3.0)


@pytest.mark.parametrize(("a", "b", "n"), [(1.0, 1.0, 4), (2.0, 1.0, 4), (0.0, 1.0, 1), (0.0, 1.0, 2.5)])
def test_grid_rejects_bad_input(a, b, n):
    with pytest.raises(ValueError):
        Grid(a, b, n)


def test_sampled_path_validation():
    g = Grid(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        SampledPath(g, np.zeros(4))
    with pytest.raises(ValueError):
        SampledPath(g, [0.0, 1.0, np.nan, 0.0, 0.0])
    p = SampledPath(g, np.arange(5.0))
    assert p.n_components == 1
    with pytest.raises(ValueError):
        p.values[0] = 3.0


def test_grid_mismatch_is_reported():
    f = path(Grid(0.0, 1.0, 10), np.sin)
    g = path(Grid(0.0, 1.0, 12), np.sin)
    with pytest.raises(GridMismatchError):
        fracops.check_rlfi_parts(f, g, 0.5)
    with pytest.raises(GridMismatchError):
        f + g


@pytest.mark.parametrize(("alpha", "beta", "gamma"), [(0.0, 0.5, 0.5), (1.0, 0.5, 0.5), (0.5, 1.2, 0.5), (0.5, 0.5, 1.1)])
def test_fractional_params_validation(alpha, beta, gamma):
    with pytest.raises(ValueError):
        FractionalParams(alpha, beta, gamma)


@pytest.mark.parametrize("alpha", [0.0, -0.3, 1.5])
def test_integral_order_domain(alpha):
    with pytest.raises(ValueError):
        fracops.left_rlfi(path(UNIT, np.cos), alpha)


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_derivative_order_domain(alpha):
    with pytest.raises(ValueError):
        fracops.left_caputo(path(UNIT, np.cos), alpha)
    with pytest.raises(ValueError):
        fracops.right_rlfd(path(UNIT, np.cos), alpha)


# }}}


# {{{ Riemann-Liouville integrals


def test_left_rlfi_of_one():
    out = fracops.left_rlfi(path(UNIT, lambda x: np.ones_like(x)), 0.5).values[0]
    assert np.allclose(out, UNIT.x**0.5 / math.gamma(1.5), atol=1e-13, rtol=0)
    assert out[0] == 0.0


def test_left_rlfi_order_one_is_running_integral():
    out = fracops.left_rlfi(path(UNIT, lambda x: np.ones_like(x)), 1.0).values[0]
    assert np.allclose(out, UNIT.x, atol=1e-13)


def test_left_rlfi_of_monomial_is_exact_for_linear_data():
    out = fracops.left_rlfi(path(UNIT, lambda x: x), 0.3).values[0]
    assert np.allclose(out, UNIT.x**1.3 / math.gamma(2.3), atol=1e-13)
    # quadrature oracle for the monomial formula itself
    assert out[-1] == pytest.approx(left_rlfi_oracle(lambda t: t, 1.0, 0.3), rel=1e-12)


def test_left_rlfi_second_order_for_smooth_data():
    alpha = 0.4
    exact = left_rlfi_oracle(np.cos, 1.0, alpha)
    errs = [abs(fracops.left_rlfi(path(Grid(0, 1, n), np.cos), alpha).values[0, -1] - exact) for n in (50, 100, 200, 400)]
    assert np.all(observed_orders(errs) > 1.9)


def test_right_rlfi_mirror_cases():
    one = fracops.right_rlfi(path(UNIT, lambda x: np.ones_like(x)), 0.5).values[0]
    assert np.allclose(one, (1.0 - UNIT.x) ** 0.5 / math.gamma(1.5), atol=1e-13)
    assert one[-1] == 0.0
    lin = fracops.right_rlfi(path(UNIT, lambda x: 1.0 - x), 0.3).values[0]
    assert np.allclose(lin, (1.0 - UNIT.x) ** 1.3 / math.gamma(2.3), atol=1e-13)
    assert lin[10] == pytest.approx(right_rlfi_oracle(lambda t: 1.0 - t, UNIT.x[10], 0.3), rel=1e-11)


def test_right_rlfi_is_reflected_left_rlfi():
    f = path(UNIT, lambda x: np.exp(x) * np.sin(3 * x))
    right = fracops.right_rlfi(f, 0.45).values
    left = fracops.left_rlfi(f.reversed(), 0.45).values[:, ::-1]
    assert np.array_equal(right, left)


# }}}


# {{{ Caputo derivatives


@given(st.floats(-1e3, 1e3), st.floats(0.01, 0.99))
def test_caputo_annihilates_constants(c, alpha):
    f = SampledPath(UNIT, np.full(UNIT.n + 1, c))
    assert np.abs(fracops.left_caputo(f, alpha).values).max() <= 1e-13 * max(abs(c), 1.0)
    assert np.abs(fracops.right_caputo(f, alpha).values).max() <= 1e-13 * max(abs(c), 1.0)


def test_left_caputo_of_identity():
    out = fracops.left_caputo(path(UNIT, lambda x: x), 0.5).values[0]
    assert np.allclose(out, UNIT.x**0.5 / math.gamma(1.5), atol=1e-13)
    assert out[0] == 0.0


@pytest.mark.parametrize("x0", [0.25, 0.5, 1.0])
def test_left_caputo_square_order(x0):
    alpha = 0.4
    exact = left_caputo_oracle(lambda t: 2.0 * t, x0, alpha)
    assert exact == pytest.approx(2.0 * x0**1.6 / math.gamma(2.6), rel=1e-12)
    errs = []
    for n in (100, 200, 400, 800):
        g = Grid(0.0, 1.0, n)
        k = round(x0 * n)
        errs.append(abs(fracops.left_caputo(path(g, lambda x: x**2), alpha).values[0, k] - exact))
    assert np.all(observed_orders(errs) >= 1.5)


def test_right_caputo_cases():
    f = path(UNIT, lambda x: 1.0 - x)
    out = fracops.right_caputo(f, 0.5).values[0]
    assert np.allclose(out, (1.0 - UNIT.x) ** 0.5 / math.gamma(1.5), atol=1e-13)
    assert out[-1] == 0.0
    x0 = UNIT.x[30]
    assert out[30] == pytest.approx(right_caputo_oracle(lambda t: -1.0, x0, 0.5), rel=1e-11)


def test_right_caputo_is_reflected_left_caputo():
    f = path(UNIT, lambda x: np.cos(2 * x) + x**3)
    for alpha in (0.2, 0.7):
        right = fracops.right_caputo(f, alpha).values
        left = fracops.left_caputo(f.reversed(), alpha).values[:, ::-1]
        assert np.abs(right - left).max() <= 1e-13


# }}}


# {{{ Riemann-Liouville derivatives


def test_rlfd_equals_caputo_when_function_vanishes_at_left_end():
    g = Grid(0.0, 1.0, 400)
    f = path(g, lambda x: x)
    mask = g.x >= 0.1
    rl = fracops.left_rlfd(f, 0.5).values[0, mask]
    cap = fracops.left_caputo(f, 0.5).values[0, mask]
    assert np.abs(rl - cap).max() <= 1e-4


def test_left_rlfd_of_one_away_from_singularity():
    g = Grid(0.0, 1.0, 400)
    out = fracops.left_rlfd(path(g, lambda x: np.ones_like(x)), 0.5).values[0]
    mask = g.x >= 0.1
    exact = g.x[mask] ** -0.5 / math.gamma(0.5)
    assert np.abs(out[mask] - exact).max() <= 2e-3


def test_right_rlfd_of_one_away_from_singularity():
    g = Grid(0.0, 1.0, 400)
    out = fracops.right_rlfd(path(g, lambda x: np.ones_like(x)), 0.5).values[0]
    mask = g.x <= 0.9
    exact = (1.0 - g.x[mask]) ** -0.5 / math.gamma(0.5)
    assert np.abs(out[mask] - exact).max() <= 2e-3


def test_right_rlfd_is_reflected_left_rlfd():
    f = path(UNIT, lambda x: np.exp(-x) + x**2)
    right = fracops.right_rlfd(f, 0.35).values
    left = fracops.left_rlfd(f.reversed(), 0.35).values[:, ::-1]
    assert np.abs(right - left).max() <= 1e-13


def test_rlfd_inverts_rlfi():
    g = Grid(0.0, 1.0, 200)
    f = path(g, np.sin)
    back = fracops.left_rlfd(fracops.left_rlfi(f, 0.5), 0.5).values[0, 1:-1]
    assert np.abs(back - f.values[0, 1:-1]).max() <= 10 * g.h


# }}}


# {{{ combined operator and its dual


def test_combined_endpoint_degeneracy():
    f = path(UNIT, lambda x: np.sin(4 * x) + x)
    left = fracops.combined_caputo(f, FractionalParams(0.3, 0.6, 1.0)).values
    right = fracops.combined_caputo(f, FractionalParams(0.3, 0.6, 0.0)).values
    assert np.abs(left - fracops.left_caputo(f, 0.3).values).max() <= 1e-15
    assert np.abs(right - fracops.right_caputo(f, 0.6).values).max() <= 1e-15


def test_combined_is_mean_at_half():
    f = path(UNIT, lambda x: np.exp(x))
    mid = fracops.combined_caputo(f, FractionalParams(0.4, 0.4, 0.5)).values
    mean = 0.5 * (fracops.left_caputo(f, 0.4).values + fracops.right_caputo(f, 0.4).values)
    assert np.abs(mid - mean).max() <= 1e-14


def test_combined_is_componentwise():
    g = UNIT
    f = SampledPath(g, np.array([np.sin(g.x), g.x**2]))
    p = FractionalParams(0.3, 0.7, 0.25)
    both = fracops.combined_caputo(f, p).values
    for i in range(2):
        single = fracops.combined_caputo(f.component(i), p).values[0]
        assert np.abs(both[i] - single).max() <= 1e-14


def test_dual_endpoint_cases():
    g = path(UNIT, lambda x: np.cos(x) + 2.0)
    assert np.array_equal(
        fracops.dual_combined_rl(g, FractionalParams(0.3, 0.6, 1.0)).values,
        fracops.right_rlfd(g, 0.3).values,
    )
    assert np.array_equal(
        fracops.dual_combined_rl(g, FractionalParams(0.3, 0.6, 0.0)).values,
        fracops.left_rlfd(g, 0.6).values,
    )


def test_dual_of_one():
    grid = Grid(0.0, 1.0, 400)
    out = fracops.dual_combined_rl(path(grid, lambda x: np.ones_like(x)), FractionalParams(0.5, 0.5, 0.5)).values[0]
    mask = (grid.x >= 0.1) & (grid.x <= 0.9)
    x = grid.x[mask]
    exact = 0.5 * (x**-0.5 + (1.0 - x) ** -0.5) / math.gamma(0.5)
    assert np.abs(out[mask] - exact).max() <= 2e-3


# }}}


# {{{ linear-algebra properties


OPERATORS = {
    "left_rlfi": lambda f: fracops.left_rlfi(f, 0.4),
    "right_rlfi": lambda f: fracops.right_rlfi(f, 0.4),
    "left_caputo": lambda f: fracops.left_caputo(f, 0.6),
    "right_caputo": lambda f: fracops.right_caputo(f, 0.6),
    "left_rlfd": lambda f: fracops.left_rlfd(f, 0.3),
    "right_rlfd": lambda f: fracops.right_rlfd(f, 0.3),
    "combined": lambda f: fracops.combined_caputo(f, FractionalParams(0.3, 0.8, 0.6)),
    "dual": lambda f: fracops.dual_combined_rl(f, FractionalParams(0.3, 0.8, 0.6)),
}

vectors = hnp.arrays(np.float64, UNIT.n + 1, elements=st.floats(-10, 10))


@pytest.mark.parametrize("name", sorted(OPERATORS))
@given(f=vectors, g=vectors, c1=st.floats(-5, 5), c2=st.floats(-5, 5))
def test_operator_linearity(name, f, g, c1, c2):
    op = OPERATORS[name]
    fp, gp = SampledPath(UNIT, f), SampledPath(UNIT, g)
    lhs = op(SampledPath(UNIT, c1 * f + c2 * g)).values
    rhs = c1 * op(fp).values + c2 * op(gp).values
    scale = max(1.0, np.abs(op(fp).values).max(), np.abs(op(gp).values).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale * max(1.0, abs(c1) + abs(c2))


@given(g=hnp.arrays(np.float64, (2, UNIT.n + 1), elements=st.floats(-3, 3)),
       f=hnp.arrays(np.float64, (2, UNIT.n + 1), elements=st.floats(-3, 3)))
def test_adjoints_are_transposes(f, g):
    p = FractionalParams(0.35, 0.65, 0.4)
    fp, gp = SampledPath(UNIT, f), SampledPath(UNIT, g)
    for op, adj in [
        (fracops.derivative, fracops.derivative_adjoint),
        (lambda v: fracops.combined_caputo(v, p), lambda v: fracops.combined_caputo_adjoint(v, p)),
    ]:
        lhs = np.sum(op(fp).values * g)
        rhs = np.sum(f * adj(gp).values)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)


@given(f=hnp.arrays(np.float64, (1, UNIT.n + 1), elements=st.floats(-3, 3)),
       g=hnp.arrays(np.float64, (1, UNIT.n), elements=st.floats(-3, 3)),
       gamma=st.sampled_from([0.0, 0.3, 1.0]))
def test_midpoint_adjoint_is_transpose(f, g, gamma):
    p = FractionalParams(0.45, 0.25, gamma)
    lhs = np.sum(fracops.midpoint_combined_caputo(SampledPath(UNIT, f), p) * g)
    rhs = np.sum(f * fracops.midpoint_combined_caputo_adjoint(g, UNIT, p))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)


def test_midpoint_caputo_accuracy():
    alpha = 0.5
    errs = []
    for n in (100, 200, 400):
        g = Grid(0.0, 1.0, n)
        mids = g.x[:-1] + 0.5 * g.h
        out = fracops.midpoint_combined_caputo(path(g, lambda x: x**2), FractionalParams(alpha, alpha, 1.0))[0]
        exact = 2.0 * mids**1.5 / math.gamma(2.5)
        errs.append(np.abs(out - exact).max())
    assert errs[-1] <= 1e-3
    assert np.all(observed_orders(errs) >= 1.4)
    const = fracops.midpoint_combined_caputo(SampledPath(UNIT, np.full(UNIT.n + 1, 3.0)), FractionalParams(0.3, 0.6, 0.4))
    assert np.abs(const).max() <= 1e-13


# }}}


# {{{ integration by parts


def test_rlfi_parts_symmetric_function():
    g = Grid(0.0, 1.0, 200)
    f = path(g, lambda x: np.sin(np.pi * x))
    assert fracops.check_rlfi_parts(f, f, 0.5) <= 1e-10


def test_rlfi_parts_zero_function():
    g = Grid(0.0, 1.0, 50)
    zero = SampledPath(g, np.zeros(51))
    assert fracops.check_rlfi_parts(zero, path(g, np.exp), 0.3) == 0.0


def test_rlfi_parts_mirrored_pair():
    # t and 1 - t are reflections of each other, so both sides agree to roundoff
    res = {}
    for n in (200, 400):
        g = Grid(0.0, 1.0, n)
        res[n] = fracops.check_rlfi_parts(path(g, lambda x: x), path(g, lambda x: 1.0 - x), 0.5)
    assert res[400] <= 5e-4
    assert res[400] <= 0.25 * res[200] or res[400] <= 1e-14


@pytest.mark.parametrize(
    ("f", "g"),
    [(lambda x: x, np.exp), (lambda x: x**2, np.cos), (np.exp, lambda x: 1.0 - x)],
)
def test_rlfi_parts_converges(f, g):
    res = []
    for n in (100, 200, 400, 800):
        grid = Grid(0.0, 1.0, n)
        res.append(fracops.check_rlfi_parts(path(grid, f), path(grid, g), 0.5))
    assert np.all(np.asarray(res[:-1]) / np.asarray(res[1:]) >= 2.0)
    assert res[-1] <= 5e-4


def test_combined_parts_boundary_term_vanishes():
    g = Grid(0.0, 1.0, 400)
    f = path(g, lambda x: np.sin(np.pi * x))
    res, boundary = fracops.check_combined_parts(f, path(g, np.exp), FractionalParams(0.6, 0.4, 0.3))
    assert abs(boundary) <= 1e-10
    assert res <= 1e-2


def test_combined_parts_zero_function():
    g = Grid(0.0, 1.0, 50)
    zero = SampledPath(g, np.zeros(51))
    assert fracops.check_combined_parts(zero, path(g, np.exp), FractionalParams(0.5, 0.5, 0.5)) == (0.0, 0.0)


def test_combined_parts_converges():
    p = FractionalParams(0.6, 0.4, 0.3)
    res = []
    for n in (200, 400, 800):
        g = Grid(0.0, 1.0, n)
        res.append(fracops.check_combined_parts(path(g, lambda x: x * (1 - x)), path(g, np.exp), p)[0])
    assert res[-1] <= 1e-2
    assert np.all(np.asarray(res[:-1]) / np.asarray(res[1:]) >= 2.0)


def test_combined_parts_with_boundary_contribution():
    p = FractionalParams(0.5, 0.3, 0.7)
    res = []
    for n in (200, 400, 800):
        g = Grid(0.0, 1.0, n)
        r, boundary = fracops.check_combined_parts(path(g, lambda x: 1.0 + x), path(g, np.cos), p)
        assert abs(boundary) > 0.1
        res.append(r)
    # f(a) != 0 makes the dual term singular like (b - x)^(-alpha) at the
    # ends, which caps the rate at h^(1 - alpha) = h^0.5
    assert np.all(np.asarray(res[:-1]) / np.asarray(res[1:]) >= 2.0**0.4)


# }}}
