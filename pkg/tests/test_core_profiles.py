import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup.core_profiles import (DomainError, RadialGrid, W, W1, cutoff_jet, dW,
                                  fornberg_weights, ground_state_residuals, smooth_cutoff,
                                  stencil_residuals, uniform_derivative)

radii = st.floats(0.0, 1e5, allow_nan=False)


@given(radii)
def test_W_closed_form(R):
    assert W(np.array([R]))[0] == pytest.approx((1 + R * R / 3) ** -0.5, rel=1e-15)


@given(st.lists(radii, min_size=1, max_size=20))
def test_ground_state_equation_pointwise(Rs):
    r = ground_state_residuals(np.array(Rs))
    assert r["ground_state"] < 1e-12
    assert r["L_minus_W"] < 1e-10 and r["L_plus_W1"] < 1e-10


@given(st.floats(0.0, 100.0), st.floats(1e-3, 100.0))
def test_W_decreasing(a, d):
    assert W(np.array([a + d]))[0] < W(np.array([a]))[0]


def test_W1_zero_and_value_at_origin():
    assert abs(W1(np.array([np.sqrt(3.0)]))[0]) < 1e-16
    assert W1(np.array([0.0]))[0] == 0.5


def test_W1_is_scaling_generator():
    R = np.linspace(0, 20, 101)
    assert np.max(np.abs(W1(R) - (0.5 * W(R) + R * dW(R)))) < 1e-15


@pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        W(np.array([bad]))


def test_grid_validation():
    with pytest.raises(DomainError):
        RadialGrid(n=10)
    with pytest.raises(DomainError):
        RadialGrid(kind="spiral")


@given(st.integers(0, 7), st.floats(-1.0, 1.0))
def test_fornberg_exact_on_polynomials(p, z):
    x = np.linspace(-2, 2, 9)
    w = fornberg_weights(z, x, 2)
    assert w[0] @ x**p == pytest.approx(z**p, abs=1e-11)
    d1 = p * z ** (p - 1) if p else 0.0
    assert w[1] @ x**p == pytest.approx(d1, abs=1e-9)


def test_uniform_derivative_sine():
    h = 1e-2
    x = np.arange(0, 3, h)
    d = uniform_derivative(np.sin(x), h, 1)
    assert np.max(np.abs(d - np.cos(x))) < 1e-10


@given(st.floats(-5, 5), st.integers(2, 8))
def test_cutoff_range_and_limits(x, k):
    th = cutoff_jet(np.array([x]), k, 0)[0][0]
    assert -1e-15 <= th <= 1 + 1e-15
    if x <= 1:
        assert th == 1.0
    if x >= 2:
        assert th == 0.0


def test_cutoff_jet_matches_quintic():
    x = np.linspace(0, 3, 301)
    assert np.max(np.abs(cutoff_jet(x, 2, 0)[0] - smooth_cutoff(x))) < 1e-14


def test_stencil_route_agrees():
    r = stencil_residuals(RadialGrid())
    assert max(r.values()) < 1e-6
