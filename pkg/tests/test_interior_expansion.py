import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup.acceptance import _manufactured
from blowup.core_profiles import W
from blowup.interior_expansion import (PreconditionError, apply_green, fit_exponent,
                                       fundamental_solutions_interior, scaling_table)


@given(st.floats(0.1, 10), st.floats(-4, 4))
def test_fit_exponent_recovers_power_law(c, p):
    s = 0.05 * 2.0 ** -np.arange(1, 7)
    sl, res = fit_exponent(s, c * s**p)
    assert sl == pytest.approx(p, abs=1e-10) and res < 1e-10


@pytest.mark.parametrize("sign,c", [("+", 5.0), ("-", 1.0)])
def test_green_inverts_operator(ctx, sign, c):
    R = ctx.grid.R
    u, lap = _manufactured(R)
    v = apply_green(ctx.grid, sign, -lap - c * W(R) ** 4 * u)
    m = R <= 50
    assert np.max(np.abs(v - u)[m]) < 1e-6 * np.max(np.abs(u))


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_green_linear(ctx, a, b):
    g = ctx.grid
    R = g.R
    f1, f2 = np.exp(-R) * R**2, R**2 / (1 + R**4)
    lhs = apply_green(g, "+", a * f1 + b * f2)
    rhs = a * apply_green(g, "+", f1) + b * apply_green(g, "+", f2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_green_rejects_nonfinite(ctx):
    f = np.zeros(ctx.grid.n)
    f[3] = np.nan
    with pytest.raises(PreconditionError):
        apply_green(ctx.grid, "+", f)


def test_corrections_vanish_at_origin(ctx):
    for st_ in ctx.interior[1:]:
        for l in st_.eta_star.grades():
            assert abs(st_.eta_star.terms[l][0]) < 1e-12


def test_error_grades_increase(ctx):
    lows = [min(s.error_grades) for s in ctx.interior]
    assert all(b > a for a, b in zip(lows, lows[1:]))


def test_pointwise_slopes(ctx):
    rows = scaling_table(ctx.interior, [1, 2], 0.05 * 2.0 ** -np.arange(1, 7), ctx.p.e1)
    for r in rows:
        assert r["pointwise_slope"] == pytest.approx(r["pointwise_target"], rel=0.1)
