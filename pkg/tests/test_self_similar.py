import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowup.self_similar import (Laurent, SelfSimilarOperatorParams, decompose_far_field,
                                 mu_n, wronskian_coefficients)

coef = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)
series = st.dictionaries(st.integers(-3, 6), coef, min_size=1, max_size=6)


@given(series, series)
def test_laurent_add_commutes(a, b):
    A, B = Laurent(a, 6), Laurent(b, 6)
    s, t = A + B, B + A
    for p in range(-3, 7):
        assert s.coeff(p) == t.coeff(p)


@given(series, st.integers(-3, 3))
def test_laurent_shift_then_deriv(a, k):
    A = Laurent(a, 6)
    y = 1.3
    lhs = sum(v * y**p for p, v in A.shift(k).c.items())
    rhs = y**k * sum(v * y**p for p, v in A.c.items())
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.integers(0, 5), st.floats(1.01, 5), st.floats(-3, 3))
def test_mu_n_lower_half_plane(n, nu, a0):
    assert mu_n(n, nu, a0).imag < 0
    assert SelfSimilarOperatorParams(n, nu, a0).mu == mu_n(n, nu, a0)


def test_hierarchy_residuals(ctx):
    h = ctx.hierarchy
    for key in h.keys:
        if key[0] <= 2:
            assert h.residual(key) < 1e-7


def test_far_field_two_routes_agree(ctx):
    h = ctx.hierarchy
    for key in [(0, 0), (1, 0)]:
        fit = decompose_far_field(h, key)
        wr = wronskian_coefficients(h, key)
        assert fit["residual"] < 1e-4
        assert abs(fit["a+"] - wr["a_plus"]) < 1e-8 * abs(wr["a_plus"]) + 1e-12


def test_leading_far_field_coefficient(ctx):
    # A_00 = a+ phi + a- psi on the far window with a+ from the matched interior data
    a = decompose_far_field(ctx.hierarchy, (0, 0))["a+"]
    assert abs(a - (0.295148 - 0.000519j)) < 1e-5
