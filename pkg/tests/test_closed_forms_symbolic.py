import numpy as np
import sympy as sp

from blowup.core_profiles import W1
from blowup.interior_expansion import theta_minus, theta_plus

R = sp.symbols("R", positive=True)
Ws = (1 + R**2 / 3) ** sp.Rational(-1, 2)
W1s = Ws**3 * (3 - R**2) / 6
Tp = Ws**3 * (sp.Rational(4, 9) * R**4 - 8 * R**2 + 4) / R
Tm = -2 * Ws * (R / 3 - 1 / R)


def _L(f, power):
    return -(sp.diff(f, R, 2) + 2 * sp.diff(f, R) / R) - power * Ws**4 * f


def test_theta_plus_symbolic():
    assert sp.simplify(_L(Tp, 5)) == 0
    assert sp.simplify(_L(W1s, 5)) == 0
    assert sp.simplify(R**2 * (W1s * sp.diff(Tp, R) - sp.diff(W1s, R) * Tp)) == -2


def test_theta_minus_symbolic():
    assert sp.simplify(_L(Tm, 1)) == 0
    assert sp.simplify(R**2 * (Ws * sp.diff(Tm, R) - sp.diff(Ws, R) * Tm)) == -2


def test_numeric_matches_symbolic():
    x = np.linspace(0.1, 20, 50)
    fp = sp.lambdify(R, Tp, "numpy")
    fm = sp.lambdify(R, Tm, "numpy")
    f1 = sp.lambdify(R, W1s, "numpy")
    assert np.allclose(theta_plus(x), fp(x), rtol=1e-13)
    assert np.allclose(theta_minus(x), fm(x), rtol=1e-13)
    assert np.allclose(W1(x), f1(x), rtol=1e-13)
