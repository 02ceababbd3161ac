import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup.asymptotic_ode import (SectorError, characteristic_exponents, evaluate_with_remainder,
                                   expansion_coefficients, kummer_data, ode_residual,
                                   recursion_step)

avals = st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False)


@given(avals)
def test_kummer_exponents(a):
    (lp, gp), (lm, gm) = characteristic_exponents(kummer_data(a))
    # normal form of z f'' + (3/2 - z) f' - a f = 0: rates 1 and 0
    assert {round(lp.real, 12), round(lm.real, 12)} == {1.0, 0.0}
    assert abs(lp.imag) < 1e-14 and abs(lm.imag) < 1e-14


@given(avals, st.sampled_from("+-"), st.integers(1, 8))
def test_recursion_consistent(a, br, k):
    d = kummer_data(a)
    sol = expansion_coefficients(d, br, 8)
    assert recursion_step(d, sol, k) == pytest.approx(sol.coeffs[k], rel=1e-10, abs=1e-14)


@settings(deadline=None)
@given(avals, st.sampled_from("+-"))
def test_residual_decays(a, br):
    sol = expansion_coefficients(kummer_data(a), br, 8)
    r1 = abs(ode_residual(sol, 50j))
    r2 = abs(ode_residual(sol, 200j))
    v1 = abs(evaluate_with_remainder(sol, 50j, 8)[0])
    v2 = abs(evaluate_with_remainder(sol, 200j, 8)[0])
    # farther out the truncated series is more accurate, down to the roundoff floor
    assert r2 / v2 <= max(r1 / v1, 1e-12)


def test_sector_error():
    sol = expansion_coefficients(kummer_data(0.3), "+", 8)
    with pytest.raises(SectorError):
        evaluate_with_remainder(sol, 0.5j, 8)
