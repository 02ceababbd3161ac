"""Self-similar region: the hierarchy (L_S + mu_n) A_{n,j} = sources in y = r / sqrt(T-t).

    L_S = d_yy + (2/y) d_y + i (1/4 + y d_y / 2),     mu_n = alpha0 - i nu (n + 1/2),
    w(t, y) = sum_n (T-t)^{nu(n+1/2)} sum_j (log y - nu log(T-t))^j A_{n,j}(y).

Collecting powers of L = log y - nu log(T-t) gives, for every (n, m),

    (L_S + mu_n) A_{n,m} = -(m+1) D_y A_{n,m+1} - (m+2)(m+1) A_{n,m+2} / y^2 - N_{n,m},
    D_y = i(1/2 + nu) + 1/y^2 + (2/y) d_y,

with N_{n,m} the part of |w|^4 w at that order. Near y = 0 everything is a Laurent
series in y with exponents of the parity of n + 1; the resonant exponents of the
recursion are p = -1 (psi0) and p = 0 (phi0).
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .asymptotic_ode import expansion_coefficients, kummer_data
from .core_profiles import DomainError, W, uniform_derivative


class StructuralError(RuntimeError):
    pass


class StiffnessError(RuntimeError):
    pass


def mu_n(n, nu, alpha0):
    return alpha0 - 1j * nu * (n + 0.5)


@dataclass(frozen=True)
class SelfSimilarOperatorParams:
    n: int
    nu: float
    alpha0: float

    @property
    def mu(self):
        return mu_n(self.n, self.nu, self.alpha0)

    def __post_init__(self):
        if not self.mu.imag < 0:
            raise ValueError("Im mu_n must be negative")


# ---------------------------------------------------------------------------
# Laurent series  sum_p c_p y^p,  valid (exact up to truncation) for p <= top


@dataclass
class Laurent:
    c: dict
    top: int

    @property
    def low(self):
        nz = [p for p, v in self.c.items() if v != 0]
        return min(nz) if nz else self.top

    def coeff(self, p):
        return self.c.get(p, 0j)

    def __add__(self, o):
        top = min(self.top, o.top)
        keys = set(self.c) | set(o.c)
        return Laurent({p: self.coeff(p) + o.coeff(p) for p in keys if p <= top}, top)

    def scale(self, a):
        return Laurent({p: a * v for p, v in self.c.items()}, self.top)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, o):
        return self + (-o)

    def conj(self):
        return Laurent({p: np.conj(v) for p, v in self.c.items()}, self.top)

    def __mul__(self, o):
        top = min(self.top + o.low, o.top + self.low)
        out = {}
        for p, a in self.c.items():
            if a == 0:
                continue
            for q, b in o.c.items():
                if b != 0 and p + q <= top:
                    out[p + q] = out.get(p + q, 0j) + a * b
        return Laurent(out, top)

    def shift(self, k):
        """y^k times the series."""
        return Laurent({p + k: v for p, v in self.c.items()}, self.top + k)

    def deriv(self):
        return Laurent({p - 1: p * v for p, v in self.c.items() if p != 0}, self.top - 1)

    def radius(self, tol=1e-17):
        """y below which the last retained terms are negligible."""
        ps = sorted(p for p in self.c if p > 0 and abs(self.c[p]) > 0)
        if not ps:
            return np.inf
        tail = ps[-4:]
        r = min((tol / abs(self.c[p])) ** (1.0 / p) for p in tail)
        return float(r)

    def __call__(self, y, deriv=0, check=True):
        y = np.asarray(y, dtype=float)
        if check and np.any(y > self.radius()):
            raise DomainError("series evaluated beyond its validated radius")
        out = np.zeros(y.shape, dtype=complex)
        for p, v in self.c.items():
            if deriv == 0:
                out = out + v * y**p
            elif deriv == 1:
                out = out + v * p * y ** (p - 1)
            else:
                out = out + v * p * (p - 1) * y ** (p - 2)
        return out

    def exponents(self):
        return sorted(p for p, v in self.c.items() if abs(v) > 0)


def apply_LS(w: Laurent, mu: complex) -> Laurent:
    """(L_S + mu) w term-wise: y^p -> p(p+1) y^{p-2} + (i(1/4 + p/2) + mu) y^p."""
    out = {}
    for p, v in w.c.items():
        out[p - 2] = out.get(p - 2, 0j) + p * (p + 1) * v
        out[p] = out.get(p, 0j) + (1j * (0.25 + p / 2) + mu) * v
    return Laurent(out, w.top)


def apply_Dy(w: Laurent, nu: float) -> Laurent:
    out = {}
    for p, v in w.c.items():
        out[p] = out.get(p, 0j) + 1j * (0.5 + nu) * v
        out[p - 2] = out.get(p - 2, 0j) + (1 + 2 * p) * v
    return Laurent(out, w.top - 2)


def solve_series(F: Laurent, mu: complex, free: dict | None = None):
    """w with (L_S + mu) w = F up to F.top; returns (w, defects at the resonances).

    Coefficient of y^p:  (p+2)(p+3) w_{p+2} + (i(1/4+p/2) + mu) w_p = F_p.
    At p = -3, -2 the first factor vanishes: the defect F_p - c(p) w_p must be zero
    for a pure power solution, and w_{p+2} is the free constant.
    """
    free = free or {}
    w, defects = {}, {}
    if not F.c and not free:
        return Laurent({}, F.top + 2), defects
    lows = [p for p in F.c if abs(F.c[p]) > 0] + [p - 2 for p in free]
    p0 = min(lows) if lows else F.top
    for p in range(p0, F.top + 1):
        rhs = F.coeff(p) - (1j * (0.25 + p / 2) + mu) * w.get(p, 0j)
        den = (p + 2) * (p + 3)
        if den == 0:
            defects[p] = rhs
            w[p + 2] = complex(free.get(p + 2, 0.0))
        else:
            w[p + 2] = rhs / den
    return Laurent({p: v for p, v in w.items()}, F.top + 2), defects


def series_near_zero(params: SelfSimilarOperatorParams, kind: str = "analytic_even",
                     order: int = 60) -> Laurent:
    """phi0 = 1 + O(y^2) (even) or psi0 = 1/y + odd analytic part."""
    if order > 60:
        raise ValueError("truncation order above 60")
    mu = params.mu
    start = 0 if kind == "analytic_even" else -1
    c = {start: 1.0 + 0j}
    p = start
    for _ in range(order):
        c[p + 2] = -c[p] * (1j * (0.25 + p / 2) + mu) / ((p + 2) * (p + 3))
        p += 2
    return Laurent(c, p)


def series_mu_derivative(params: SelfSimilarOperatorParams, kind: str = "analytic_even",
                         order: int = 60) -> Laurent:
    """d/dmu of the series coefficients, by differentiating the recursion."""
    mu = params.mu
    start = 0 if kind == "analytic_even" else -1
    c, dc = {start: 1.0 + 0j}, {start: 0j}
    p = start
    for _ in range(order):
        den = (p + 2) * (p + 3)
        fac = 1j * (0.25 + p / 2) + mu
        c[p + 2] = -c[p] * fac / den
        dc[p + 2] = -(dc[p] * fac + c[p]) / den
        p += 2
    return Laurent(dc, p)


# ---------------------------------------------------------------------------
# far field: Kummer reduction  w = e^{-z} f(z),  z = i y^2 / 4


@dataclass
class FarFieldBasis:
    """phi_inf ~ y^{2i mu - 1/2}(1 + O(y^-2)),  psi_inf ~ e^{-iy^2/4} y^{-2i mu - 5/2}(1 + O(y^-2))."""

    mu: complex
    order: int
    plus: np.ndarray = field(repr=False)    # a_k for the phi branch
    minus: np.ndarray = field(repr=False)   # a_k for the psi branch
    gam_plus: complex = 0j
    gam_minus: complex = 0j

    def _series(self, y, a, gam, osc, deriv, n):
        y = np.asarray(y, dtype=float)
        n = self.order if n is None else n
        val = np.zeros(y.shape, dtype=complex)
        dval = np.zeros(y.shape, dtype=complex)
        for k in range(n + 1):
            p = 2 * gam - 2 * k
            ck = a[k] * (0.25j) ** (-k)
            val = val + ck * y**p
            dval = dval + ck * p * y ** (p - 1)
        if osc:
            ph = np.exp(-0.25j * y**2)
            dval = ph * (dval - 0.5j * y * val)
            val = ph * val
        return dval if deriv else val

    def phi(self, y, deriv=0, n=None):
        return self._series(y, self.plus, self.gam_plus, False, deriv, n)

    def psi(self, y, deriv=0, n=None):
        return self._series(y, self.minus, self.gam_minus, True, deriv, n)

    def remainder(self, y, which="phi"):
        a = self.plus if which == "phi" else self.minus
        if len(a) <= self.order + 1:
            return np.nan
        return 3 * abs(a[self.order + 1]) * (np.asarray(y) ** 2 / 4) ** (-(self.order + 1))


def far_field_basis(params: SelfSimilarOperatorParams, order: int = 8) -> FarFieldBasis:
    mu = params.mu
    data = kummer_data(1.25 + 1j * mu, 1.5)
    if abs(data.bk(0) ** 2 - 4 * data.ck(0)) == 0:
        raise ValueError("exceptional case")
    sp = expansion_coefficients(data, "+", order + 1)
    sm = expansion_coefficients(data, "-", order + 1)
    return FarFieldBasis(mu, order, sp.coeffs, sm.coeffs, sp.gam, sm.gam)


def apply_LS_numeric(y, A, dA, d2A, mu):
    return d2A + (2 / y) * dA + 1j * (0.25 * A + 0.5 * y * dA) + mu * A


def abel_constant(y, f, df, g, dg):
    """y^2 e^{i y^2/4} (f g' - f' g), constant along pairs of solutions."""
    return y**2 * np.exp(0.25j * y**2) * (f * dg - df * g)


# ---------------------------------------------------------------------------
# ODE continuation


@dataclass
class ODESolution:
    y0: float
    y1: float
    sol: object
    nfev: int

    def __call__(self, y):
        return self.sol(np.asarray(y, dtype=float))


def integrate_LS(params: SelfSimilarOperatorParams, y_span, A0, dA0, source=None,
                 rtol=1e-12, atol=1e-14, max_step=np.inf) -> ODESolution:
    """Continue (L_S + mu) A = source(y) from y_span[0] with DOP853 (complex state)."""
    y0, y1 = y_span
    if y0 <= 0:
        raise DomainError("start the continuation away from y = 0")
    mu = params.mu

    def rhs(y, u):
        A, dA = u[0], u[1]
        f = source(y) if source is not None else 0.0
        d2 = f - mu * A - (2 / y) * dA - 1j * (0.25 * A + 0.5 * y * dA)
        return np.array([dA, d2])

    res = solve_ivp(rhs, (y0, y1), np.array([A0, dA0], dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True, max_step=max_step)
    if not res.success:
        raise StiffnessError(res.message)
    return ODESolution(y0, y1, res.sol, res.nfev)


# ---------------------------------------------------------------------------
# the hierarchy


def hierarchy_keys(n_cap):
    return [(n, j) for n in range(n_cap + 1) for j in range(n // 2, -1, -1)]


def nonlinear_combos(keys, n, m):
    """Multiplicities of A_{k1}A_{k2}A_{k3} conj(A_{k4}) conj(A_{k5}) in N_{n,m}."""
    out = Counter()
    if n < 2:
        return out
    for un in itertools.product(keys, repeat=3):
        for cj in itertools.product(keys, repeat=2):
            allk = un + cj
            if sum(k[0] for k in allk) == n - 2 and sum(k[1] for k in allk) == m:
                out[(tuple(sorted(un)), tuple(sorted(cj)))] += 1
    return out


def _nl_value(combos, get, conj):
    total = None
    for (un, cj), mult in combos.items():
        t = get(un[0]) * get(un[1]) * get(un[2]) * conj(get(cj[0])) * conj(get(cj[1]))
        t = t.scale(mult) if isinstance(t, Laurent) else mult * t
        total = t if total is None else total + t
    return total


@dataclass
class SelfSimilarCorrection:
    n: int
    j: int
    mu: complex
    series: Laurent
    beta: complex                    # coefficient of the homogeneous part
    far: dict = field(default_factory=dict)

    def exponents(self):
        return self.series.exponents()


@dataclass
class Hierarchy:
    nu: float
    alpha0: float
    n_cap: int
    corr: dict
    y0: float
    y_max: float
    ode: ODESolution | None
    free: dict
    defects: dict

    @property
    def keys(self):
        return list(self.corr)

    def _index(self, key):
        return self.keys.index(key)

    def __call__(self, key, y, deriv=0):
        """A_{n,j}(y) from the series below y0 and the ODE continuation above."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros(y.shape, dtype=complex)
        lo = y < self.y0
        if np.any(lo):
            out[lo] = self.corr[key].series(y[lo], deriv)
        if np.any(~lo):
            if self.ode is None or np.max(y[~lo]) > self.y_max * (1 + 1e-12):
                raise DomainError("y beyond the continuation range")
            i = self._index(key)
            u = self.ode(y[~lo])
            out[~lo] = u[2 * i + deriv]
        return out

    def source(self, key, y):
        """Right-hand side of the (n, j) equation evaluated from the computed profiles."""
        n, m = key
        y = np.atleast_1d(np.asarray(y, dtype=float))
        vals = {k: self(k, y) for k in self.keys}
        ders = {k: self(k, y, 1) for k in self.keys}
        return _numeric_source(key, y, vals, ders, self.nu, self.keys,
                               _combo_cache(tuple(self.keys), n, m))

    def residual(self, key, y_lo=0.5, y_hi=20.0, h=2e-3):
        """Pointwise relative residual of the (n, j) equation on [y_lo, y_hi], with
        A'' from an 8th order difference of the continued A' (independent of the ODE
        right-hand side)."""
        y = np.arange(y_lo - 4 * h, y_hi + 4 * h + h / 2, h)
        y = y[y >= min(y_lo, self.y0)] if y_lo - 4 * h < self.y0 else y
        A = self(key, y)
        dA = self(key, y, 1)
        d2A = uniform_derivative(dA, h, 1, width=9)
        mu = self.corr[key].mu
        F = self.source(key, y)
        res = apply_LS_numeric(y, A, dA, d2A, mu) - F
        scale = (np.abs(d2A) + np.abs(2 * dA / y) + np.abs(0.25 * A) + np.abs(0.5 * y * dA)
                 + np.abs(mu * A) + np.abs(F))
        m = (y >= y_lo) & (y <= y_hi)
        m[:5] &= y[:5] > y[4]
        m[-5:] = False
        return float(np.max(np.abs(res[m]) / scale[m]))


_COMBO = {}


def _combo_cache(keys, n, m):
    k = (keys, n, m)
    if k not in _COMBO:
        _COMBO[k] = nonlinear_combos(list(keys), n, m)
    return _COMBO[k]


def _numeric_source(key, y, vals, ders, nu, keys, combos):
    n, m = key
    F = np.zeros(np.shape(y), dtype=complex)
    up1, up2 = (n, m + 1), (n, m + 2)
    if up1 in vals:
        A, dA = vals[up1], ders[up1]
        F -= (m + 1) * (1j * (0.5 + nu) * A + A / y**2 + 2 * dA / y)
    if up2 in vals:
        F -= (m + 2) * (m + 1) * vals[up2] / y**2
    if combos:
        F -= _nl_value(combos, lambda k: vals[k], np.conj)
    return F


def _series_source(key, corr, nu, keys):
    n, m = key
    F = None
    up1, up2 = (n, m + 1), (n, m + 2)
    if up1 in corr:
        t = apply_Dy(corr[up1].series, nu).scale(-(m + 1))
        F = t if F is None else F + t
    if up2 in corr:
        t = corr[up2].series.shift(-2).scale(-(m + 2) * (m + 1))
        F = t if F is None else F + t
    combos = _combo_cache(tuple(keys), n, m)
    if combos:
        t = -_nl_value(combos, lambda k: corr[k].series, lambda s: s.conj())
        F = t if F is None else F + t
    return F


def build_hierarchy(nu: float, alpha0: float, n_cap: int = 3, free: dict | None = None,
                    order: int = 60, y0: float = 0.5, y_max: float = 80.0,
                    rtol: float = 1e-12, atol: float = 1e-14, integrate: bool = True) -> Hierarchy:
    """Solve the triangular systems for n <= n_cap.

    free[n] is the coefficient of the resonant power (y^-1 for n even, y^0 for n odd)
    in A_{n,0}; by default it is 1. The top log level of each n is homogeneous and
    its constant is fixed by the solvability condition one level down.
    """
    free = dict(free or {})
    keys = hierarchy_keys(n_cap)
    corr, defects = {}, {}
    for n in range(n_cap + 1):
        mu = mu_n(n, nu, alpha0)
        params = SelfSimilarOperatorParams(n, nu, alpha0)
        kind = "singular" if n % 2 == 0 else "analytic_even"
        basis = series_near_zero(params, kind, order)
        p_res = -3 if n % 2 == 0 else -2
        jt = n // 2
        # part[j]: particular series of level j (resonant coefficient 0); the level is
        # part[j] + beta_j * basis, with beta_jt fixed one level down and beta_0 free.
        part = {jt: Laurent({}, basis.top)}
        for j in range(jt - 1, -1, -1):
            d_of = []
            for b in (0.0, 1.0):
                corr[(n, j + 1)] = SelfSimilarCorrection(n, j + 1, mu,
                                                         part[j + 1] + basis.scale(b), b)
                w, d = solve_series(_series_source((n, j), corr, nu, keys), mu)
                d_of.append(d.get(p_res, 0j))
            if abs(d_of[1] - d_of[0]) < 1e-300:
                raise StructuralError(f"solvability not controllable at n={n}, j={j}")
            b = -d_of[0] / (d_of[1] - d_of[0])
            corr[(n, j + 1)] = SelfSimilarCorrection(n, j + 1, mu, part[j + 1] + basis.scale(b), b)
            w, d = solve_series(_series_source((n, j), corr, nu, keys), mu)
            defects[(n, j)] = d
            part[j] = w
        d_free = complex(free.get(n, 1.0))
        corr[(n, 0)] = SelfSimilarCorrection(n, 0, mu, part[0] + basis.scale(d_free), d_free)
        for j in range(jt + 1):
            ex = corr[(n, j)].exponents()
            if any((p - (n + 1)) % 2 for p in ex):
                raise StructuralError(f"parity violated in A_{n},{j}")
            if ex and min(ex) < -3 - n:
                raise StructuralError(f"A_{n},{j} more singular than y^(-3-n)")
    corr = {k: corr[k] for k in keys}
    h = Hierarchy(nu, alpha0, n_cap, corr, y0, y_max, None, free, defects)
    if integrate:
        h.ode = _continue_hierarchy(h, rtol, atol)
    return h


def _continue_hierarchy(h: Hierarchy, rtol, atol) -> ODESolution:
    keys = h.keys
    mus = np.array([h.corr[k].mu for k in keys])
    combos = {k: _combo_cache(tuple(keys), *k) for k in keys}
    nu = h.nu
    u0 = []
    for k in keys:
        s = h.corr[k].series
        u0 += [complex(s(h.y0)), complex(s(h.y0, 1))]

    def rhs(y, u):
        vals = {k: u[2 * i] for i, k in enumerate(keys)}
        ders = {k: u[2 * i + 1] for i, k in enumerate(keys)}
        out = np.empty_like(u)
        for i, k in enumerate(keys):
            F = _numeric_source(k, y, vals, ders, nu, keys, combos[k])
            A, dA = vals[k], ders[k]
            out[2 * i] = dA
            out[2 * i + 1] = F - mus[i] * A - (2 / y) * dA - 1j * (0.25 * A + 0.5 * y * dA)
        return out

    res = solve_ivp(rhs, (h.y0, h.y_max), np.array(u0, dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if not res.success:
        raise StiffnessError(res.message)
    return ODESolution(h.y0, h.y_max, res.sol, res.nfev)


def matching_free_constants(table: dict, n_cap: int = 3) -> dict:
    """d_n = c^{(l)}_{n,0} with l = ceil(n/2): the resonant coefficient of A_{n,0}."""
    out = {}
    for n in range(n_cap + 1):
        key = ((n + 1) // 2, n, 0)
        if key in table:
            out[n] = table[key]["value"]
    return out


# ---------------------------------------------------------------------------
# far-field decomposition


def _window(y_lo, y_hi, npts):
    return np.linspace(y_lo, y_hi, npts)


def decompose_far_field(h: Hierarchy, key, window=(30.0, 80.0), npts=400, order=8,
                        interaction=False):
    """Fit A_{n,j} on the window against {phi_inf, psi_inf} (and, with interaction=True,
    log-multiplied basis elements plus the k = 0 interaction block)."""
    n, j = key
    if window[1] > h.y_max:
        raise DomainError("window beyond continuation range")
    params = SelfSimilarOperatorParams(n, h.nu, h.alpha0)
    fb = far_field_basis(params, order)
    y = _window(*window, npts)
    A = h(key, y)
    cols = [fb.phi(y), fb.psi(y)]
    names = ["a+", "a-"]
    if interaction:
        ly = np.log(y)
        cols += [ly * fb.phi(y), ly * fb.psi(y), fb.phi(y) / y**2, ly * fb.phi(y) / y**2]
        names += ["log*phi", "log*psi", "phi/y^2", "log*phi/y^2"]
        blk = interaction_block(h, n, y)
        if blk is not None:
            cols.append(blk)
            names.append("k0-block")
    M = np.array(cols).T
    sc = np.linalg.norm(M, axis=0)
    coef, *_ = np.linalg.lstsq(M / sc, A, rcond=None)
    coef = coef / sc
    resid = float(np.linalg.norm(M @ coef - A) / np.linalg.norm(A))
    cond = float(np.linalg.cond(M / sc))
    out = dict(zip(names, coef))
    out.update(residual=resid, cond=cond, window=window)
    return out


def wronskian_coefficients(h: Hierarchy, key, y_w=(10.0, 12.0, 15.0), order=8):
    """Second route for a^{+-}: a+ = W(A, psi)/W(phi, psi), a- = W(A, phi)/W(psi, phi)."""
    n, _ = key
    fb = far_field_basis(SelfSimilarOperatorParams(n, h.nu, h.alpha0), order)
    y = np.asarray(y_w, dtype=float)
    A, dA = h(key, y), h(key, y, 1)
    ph, dph = fb.phi(y), fb.phi(y, 1)
    ps, dps = fb.psi(y), fb.psi(y, 1)
    wpp = ph * dps - dph * ps
    ap = (A * dps - dA * ps) / wpp
    am = (A * dph - dA * ph) / (-wpp)
    return dict(a_plus=complex(np.median(ap.real) + 1j * np.median(ap.imag)),
                a_minus=complex(np.median(am.real) + 1j * np.median(am.imag)),
                spread_plus=float(np.ptp(np.abs(ap))), spread_minus=float(np.ptp(np.abs(am))))


def interaction_block(h: Hierarchy, n: int, y, a_plus=None, order: int = 6):
    """Leading non-oscillatory (k = 0) particular block of level n = 2 driven by
    |a+ phi_inf(mu0)|^4 a+ phi_inf(mu0); None for other levels."""
    if n != 2:
        return None
    fb0 = far_field_basis(SelfSimilarOperatorParams(0, h.nu, h.alpha0), order)
    mu2 = mu_n(2, h.nu, h.alpha0)
    # phi_inf(mu0) = y^{p0} sum_k e_k y^{-2k}
    e = np.array([fb0.plus[k] * (0.25j) ** (-k) for k in range(order + 1)])
    ebar = np.conj(e)
    F = np.convolve(np.convolve(np.convolve(e, e), e), np.convolve(ebar, ebar))[: order + 1]
    q = 2j * mu2 - 2.5   # exponent of the block, = 5 p0 - ... (non-resonant shift by y^-2)
    p = np.zeros(order + 1, dtype=complex)
    for m in range(order + 1):
        acc = -F[m]
        if m >= 1:
            qq = q - 2 * m + 2
            acc -= qq * (qq + 1) * p[m - 1]
        p[m] = acc / (-1j * (1 + m))
    y = np.asarray(y, dtype=float)
    val = sum(p[m] * y ** (q - 2 * m) for m in range(order + 1))
    if a_plus is None:
        return val
    return abs(a_plus) ** 4 * a_plus * val


# ---------------------------------------------------------------------------
# consistency with the interior expansion


def w_selfsimilar(h: Hierarchy, s: float, y, N: int, zero_corrections=False):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    L = np.log(y) - h.nu * np.log(s)
    out = np.zeros(y.shape, dtype=complex)
    for (n, j) in h.keys:
        if n > N or (zero_corrections and n > 0):
            continue
        out += s ** (h.nu * (n + 0.5)) * L**j * h((n, j), y)
    return out


def w_interior(state, s: float, y, k: int | None = None, zero_corrections=False):
    """s^{-nu/2} (W + sum_{l<=k} b^l chi_l)(s^{-nu} y), chi_l spline-interpolated in log R."""
    eta = state.eta_star
    nu = eta.nu
    y = np.atleast_1d(np.asarray(y, dtype=float))
    R = s ** (-nu) * y
    grid = eta.grid
    if np.max(R) > grid.R[-1]:
        raise DomainError("overlap beyond the interior grid")
    out = W(R).astype(complex)
    if not zero_corrections:
        b = s ** (2 * nu)
        pos = grid.R > 0
        lr = np.log(grid.R[pos])
        for l in eta.grades():
            if k is not None and l > k:
                continue
            sp = CubicSpline(lr, eta.terms[l][pos])
            out += b**l * sp(np.log(R))
    return s ** (-nu / 2) * out


def consistency_interior_selfsimilar(state, h: Hierarchy, s_values, N: int, eps1: float,
                                     k: int | None = None, npts: int = 64,
                                     zero_corrections=False):
    """max over y in [s^eps1, 2 s^eps1] of |w_S - w_In| for each s, plus the fitted exponent."""
    from .interior_expansion import fit_exponent
    rows = []
    for s in s_values:
        y = np.linspace(s**eps1, 2 * s**eps1, npts)
        d = np.abs(w_selfsimilar(h, s, y, N, zero_corrections)
                   - w_interior(state, s, y, k, zero_corrections))
        rows.append(dict(s=float(s), deviation=float(np.max(d))))
    if not s_values or any(r["deviation"] == 0 for r in rows):
        return rows, float("nan"), float("nan")
    slope, resid = fit_exponent([r["s"] for r in rows], [r["deviation"] for r in rows])
    return rows, slope, resid
