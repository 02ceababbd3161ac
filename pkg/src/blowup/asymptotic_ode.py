"""Formal expansions at a rank-1 irregular singular point at infinity.

For  w'' + b(z) w' + c(z) w = 0  with  b = sum b_k z^-k,  c = sum c_k z^-k
there are formal solutions  w = e^{lam z} z^gam sum_k a_k z^-k  where

    lam^2 + b0 lam + c0 = 0,          (b0 + 2 lam) gam + b1 lam + c1 = 0,
    k (b0 + 2 lam) a_k = (gam-k+1)(gam-k) a_{k-1}
                         + sum_{m>=1} b_m (gam-k+m) a_{k-m}
                         + sum_{m>=2} (lam b_m + c_m) a_{k+1-m}.

The partial sums are asymptotic in the sector |arg(+-(lam_+ - lam_-) z)| <= pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.integrate import solve_ivp


class UnsupportedCase(ValueError):
    pass


class SectorError(ValueError):
    pass


@dataclass(frozen=True)
class SingularODEData:
    b: tuple
    c: tuple
    radius: float = 1.0

    def bk(self, k):
        return self.b[k] if k < len(self.b) else 0.0

    def ck(self, k):
        return self.c[k] if k < len(self.c) else 0.0

    def __post_init__(self):
        if abs(self.bk(0) ** 2 - 4 * self.ck(0)) < 1e-14:
            raise UnsupportedCase("exceptional case b0^2 = 4 c0")

    def b_of(self, z):
        return sum(bk * z ** (-k) for k, bk in enumerate(self.b))

    def c_of(self, z):
        return sum(ck * z ** (-k) for k, ck in enumerate(self.c))


@dataclass
class FormalSolution:
    data: SingularODEData
    lam: complex
    gam: complex
    coeffs: np.ndarray
    branch: str = "+"
    extended: bool = False  # coefficients computed at extended precision

    @property
    def n(self):
        return len(self.coeffs) - 1


def kummer_data(a: complex, b: complex = 1.5) -> SingularODEData:
    """z f'' + (b - z) f' - a f = 0 in normal form."""
    return SingularODEData(b=(-1.0, complex(b)), c=(0.0, -complex(a)))


def characteristic_exponents(data: SingularODEData):
    """Return ((lam+, gam+), (lam-, gam-))."""
    b0, c0, b1, c1 = data.bk(0), data.ck(0), data.bk(1), data.ck(1)
    disc = np.sqrt(complex(b0 * b0 / 4 - c0))
    out = []
    for lam in (-b0 / 2 + disc, -b0 / 2 - disc):
        gam = -(b1 * lam + c1) / (b0 + 2 * lam)
        out.append((complex(lam), complex(gam)))
    return tuple(out)


def _recursion(data, lam, gam, n, a0, mul=lambda x: x):
    b0 = data.bk(0)
    a = [mul(a0)]
    for k in range(1, n + 1):
        denom = k * (b0 + 2 * lam)
        if abs(complex(denom)) == 0:
            raise UnsupportedCase(f"degenerate recursion at k={k}")
        s = (gam - k + 1) * (gam - k) * a[k - 1]
        for m in range(1, k + 1):
            bm = data.bk(m)
            if bm != 0:
                s += bm * (gam - k + m) * a[k - m]
        for m in range(2, k + 2):
            t = lam * data.bk(m) + data.ck(m)
            if t != 0:
                s += t * a[k + 1 - m]
        a.append(s / denom)
    return a


def recursion_step(data: SingularODEData, sol: FormalSolution, k: int) -> complex:
    """Recompute a_k from the stored a_0..a_{k-1} (consistency check)."""
    a = list(sol.coeffs[:k])
    b0 = data.bk(0)
    s = (sol.gam - k + 1) * (sol.gam - k) * a[k - 1]
    for m in range(1, k + 1):
        if data.bk(m) != 0:
            s += data.bk(m) * (sol.gam - k + m) * a[k - m]
    for m in range(2, k + 2):
        t = sol.lam * data.bk(m) + data.ck(m)
        if t != 0:
            s += t * a[k + 1 - m]
    return s / (k * (b0 + 2 * sol.lam))


def expansion_coefficients(data: SingularODEData, branch: str = "+", n: int = 8,
                           a0: complex = 1.0) -> FormalSolution:
    (lp, gp), (lm, gm) = characteristic_exponents(data)
    lam, gam = (lp, gp) if branch == "+" else (lm, gm)
    a = np.array(_recursion(data, lam, gam, n, complex(a0)), dtype=complex)
    extended = False
    if np.max(np.abs(a)) > 1e12:
        # factorial growth: redo the recursion with 34 significant digits
        with mpmath.workdps(34):
            mdata = SingularODEData(tuple(mpmath.mpc(x) for x in data.b),
                                    tuple(mpmath.mpc(x) for x in data.c), data.radius)
            am = _recursion(mdata, mpmath.mpc(lam), mpmath.mpc(gam), n, mpmath.mpc(a0))
            a = np.array([complex(x) for x in am])
        extended = True
    return FormalSolution(data, lam, gam, a, branch, extended)


def check_sector(sol: FormalSolution, z) -> bool:
    (lp, _), (lm, _) = characteristic_exponents(sol.data)
    d = (lp - lm) * np.asarray(z, dtype=complex)
    sgn = 1 if sol.branch == "+" else -1
    # with principal arguments the angle bound always holds; |z| > R is the binding part
    far = np.all(np.abs(np.asarray(z, dtype=complex)) > sol.data.radius)
    return bool(far and np.all(np.abs(np.angle(sgn * d)) <= np.pi + 1e-12))


def evaluate(sol: FormalSolution, z, n: int | None = None, deriv: int = 0):
    """Partial sum e^{lam z} z^gam sum_{k<=n} a_k z^-k, or its first/second z-derivative."""
    z = np.asarray(z, dtype=complex)
    n = sol.n if n is None else n
    lam, gam = sol.lam, sol.gam
    pref = np.exp(lam * z)
    out = np.zeros_like(z)
    for k in range(n + 1):
        p = gam - k
        ak = sol.coeffs[k]
        if deriv == 0:
            out = out + ak * z ** p
        elif deriv == 1:
            out = out + ak * (lam * z ** p + p * z ** (p - 1))
        elif deriv == 2:
            out = out + ak * (lam * lam * z ** p + 2 * lam * p * z ** (p - 1)
                              + p * (p - 1) * z ** (p - 2))
        else:
            raise ValueError("deriv must be 0, 1 or 2")
    return pref * out


def evaluate_with_remainder(sol: FormalSolution, z, n: int, safety: float = 3.0):
    """Value of the order-n partial sum and the remainder estimate |a_{n+1} z^{-n-1}|."""
    if not check_sector(sol, z):
        raise SectorError("z outside the validity sector")
    if n + 1 > sol.n:
        sol = expansion_coefficients(sol.data, sol.branch, n + 1, sol.coeffs[0])
    val = evaluate(sol, z, n)
    z = np.asarray(z, dtype=complex)
    rem = safety * np.abs(sol.coeffs[n + 1]) * np.abs(z) ** (-(n + 1))
    rem = rem * np.abs(np.exp(sol.lam * z) * z ** sol.gam)
    return val, rem


def ode_residual(sol: FormalSolution, z, n: int | None = None):
    """w'' + b w' + c w for the partial sum, evaluated analytically."""
    z = np.asarray(z, dtype=complex)
    d = sol.data
    return (evaluate(sol, z, n, 2) + d.b_of(z) * evaluate(sol, z, n, 1)
            + d.c_of(z) * evaluate(sol, z, n))


def optimal_order(sol: FormalSolution, z, n_max: int = 40) -> int:
    """Index of the smallest term |a_k z^-k| (optimal truncation)."""
    s = sol if sol.n >= n_max else expansion_coefficients(sol.data, sol.branch, n_max,
                                                          sol.coeffs[0])
    terms = np.abs(s.coeffs) * abs(z) ** (-np.arange(n_max + 1.0))
    return int(np.argmin(terms[1:]) + 1) - 1


def integrate_oracle(sol: FormalSolution, z_target, length: float = 40.0,
                     rtol=1e-13, atol=1e-300):
    """Independent value (w, w') at z_target.

    Start from an optimally truncated expansion at z_start = z_target - length*d and
    integrate the ODE with DOP853 along the straight segment, where d is the unit
    direction in which this branch grows relative to the other one (so the other
    branch, picked up through rounding, decays along the path).
    """
    d = sol.data
    (lp, _), (lm, _) = characteristic_exponents(d)
    dl = (lp - lm) if sol.branch == "+" else (lm - lp)
    direction = np.conj(dl) / abs(dl)
    z_target = complex(z_target)
    z_start = z_target - length * direction
    if not check_sector(sol, z_start):
        raise SectorError("oracle start point outside the sector")
    nopt = optimal_order(sol, z_start)
    ref = expansion_coefficients(d, sol.branch, max(nopt, 1), sol.coeffs[0])
    w0 = complex(evaluate(ref, z_start, nopt))
    dw0 = complex(evaluate(ref, z_start, nopt, 1))
    dz = z_target - z_start

    def rhs(t, u):
        z = z_start + t * dz
        w, dwdz = u[0] + 1j * u[1], u[2] + 1j * u[3]
        d2 = -(d.b_of(z) * dwdz + d.c_of(z) * w)
        dw_dt, ddw_dt = dwdz * dz, d2 * dz
        return [dw_dt.real, dw_dt.imag, ddw_dt.real, ddw_dt.imag]

    res = solve_ivp(rhs, (0.0, 1.0), [w0.real, w0.imag, dw0.real, dw0.imag],
                    method="DOP853", rtol=rtol, atol=atol)
    if not res.success:
        raise RuntimeError(res.message)
    u = res.y[:, -1]
    return u[0] + 1j * u[1], u[2] + 1j * u[3]
