"""Remote region: the radiation profile f0 and the recurrent system for g_{q,j,k,l}.

The remote ansatz is

    u_Re~(t, r) = f0(r) + sum (T-t)^{nu q + j} e^{i k Phi} (log r - log(T-t))^l g_{q,j,k,l}(r),
    Phi = -2 alpha0 log(T-t) + r^2 / (4 (T-t)).

One recurrence, two realizations of the radial functions:
  formal : f0 without cutoff; every g is an exact finite sum of c log^l(r) r^p (PowerLog);
  cut    : f0 = Theta(r/delta) * (formal sum); every g is a jet (values and r-derivatives
           up to some order) on a logarithmic grid.  Near r = 0 both coincide.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .core_profiles import DomainError, cumulative_integral, cutoff_jet


class StructuralError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact power-log sums;  key (a, b, c) stands for the exponent a/2 + nu b + 2 i alpha0 c


class PowerLog:
    __slots__ = ("terms", "nu", "alpha0")

    def __init__(self, terms: dict, nu: float, alpha0: float):
        self.terms = {k: np.asarray(v, dtype=complex) for k, v in terms.items()}
        self.nu, self.alpha0 = nu, alpha0

    @classmethod
    def monomial(cls, key, coeff, nu, alpha0, logpow=0):
        c = np.zeros(logpow + 1, dtype=complex)
        c[logpow] = coeff
        return cls({tuple(key): c}, nu, alpha0)

    def _new(self, terms):
        return PowerLog(terms, self.nu, self.alpha0)

    def p(self, key):
        return key[0] / 2 + self.nu * key[1] + 2j * self.alpha0 * key[2]

    @property
    def is_zero(self):
        return all(not np.any(v) for v in self.terms.values())

    def __add__(self, o):
        if o is None:
            return self
        t = dict(self.terms)
        for k, v in o.terms.items():
            if k in t:
                a, b = t[k], v
                n = max(len(a), len(b))
                t[k] = np.pad(a, (0, n - len(a))) + np.pad(b, (0, n - len(b)))
            else:
                t[k] = v
        return self._new(t)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -v for k, v in self.terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o):
        if np.isscalar(o):
            return self._new({k: o * v for k, v in self.terms.items()})
        t = {}
        for ka, va in self.terms.items():
            for kb, vb in o.terms.items():
                k = (ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2])
                v = np.convolve(va, vb)
                if k in t:
                    n = max(len(t[k]), len(v))
                    t[k] = np.pad(t[k], (0, n - len(t[k]))) + np.pad(v, (0, n - len(v)))
                else:
                    t[k] = v
        return self._new(t)

    __rmul__ = __mul__

    def conj(self):
        return self._new({(k[0], k[1], -k[2]): np.conj(v) for k, v in self.terms.items()})

    def rpow(self, m: int):
        """Multiply by r^m."""
        return self._new({(k[0] + 2 * m, k[1], k[2]): v for k, v in self.terms.items()})

    def div_r2(self):
        return self.rpow(-2)

    def rdr(self):
        t = {}
        for k, c in self.terms.items():
            p = self.p(k)
            n = len(c)
            d = p * c
            d[: n - 1] += np.arange(1, n) * c[1:]
            t[k] = d
        return self._new(t)

    def deriv(self):
        return self.rdr().rpow(-1)

    def lap(self):
        t = {}
        for k, c in self.terms.items():
            p = self.p(k)
            n = len(c)
            d = p * (p + 1) * c
            l = np.arange(n)
            d[: n - 1] += (2 * p + 1) * l[1:] * c[1:]
            d[: n - 2] += l[2:] * (l[2:] - 1) * c[2:]
            t[(k[0] - 4, k[1], k[2])] = d
        return self._new(t)

    def __call__(self, r, deriv: int = 0):
        f = self
        for _ in range(deriv):
            f = f.deriv()
        r = np.asarray(r, dtype=float)
        lr = np.log(r)
        out = np.zeros(r.shape, dtype=complex)
        for k, c in f.terms.items():
            rp = r ** f.p(k)
            out += rp * np.polynomial.polynomial.polyval(lr, c)
        return out

    def jet(self, r, K: int) -> "Jet":
        rows, f = [], self
        for i in range(K + 1):
            rows.append(f(r))
            if i < K:
                f = f.deriv()
        return Jet(np.array(rows), np.asarray(r, dtype=float))

    def transport(self, a_key, nu, alpha0):
        """Particular solution of r g' + a g = self, power by power, no homogeneous part;
        a = a_key exponent.  Equals the primitive from 0 where Re(p+a) > 0 and from
        infinity where Re(p+a) < 0."""
        t = {}
        for k, c in self.terms.items():
            kk = (k[0] + a_key[0], k[1] + a_key[1], k[2] + a_key[2])
            pa = self.p(kk)
            n = len(c)
            if kk == (0, 0, 0) or abs(pa) < 1e-12:
                d = np.zeros(n + 1, dtype=complex)
                d[1:] = c / np.arange(1, n + 1)
            else:
                d = np.zeros(n, dtype=complex)
                for l in range(n - 1, -1, -1):
                    nxt = (l + 1) * d[l + 1] if l + 1 < n else 0.0
                    d[l] = (c[l] - nxt) / pa
            t[k] = d
        return self._new(t)

    def prune(self, tol=0.0):
        return self._new({k: v for k, v in self.terms.items() if np.max(np.abs(v)) > tol})


# ---------------------------------------------------------------------------
# jets: rows f, f', ..., f^(K) on a grid


def _rpow_jet(r, m, K):
    rows = []
    c = 1.0
    for i in range(K + 1):
        rows.append(c * r ** (m - i))
        c *= m - i
    return np.array(rows)


@dataclass
class Jet:
    d: np.ndarray
    r: np.ndarray

    @property
    def K(self):
        return self.d.shape[0] - 1

    @property
    def is_zero(self):
        return not np.any(self.d[0])

    def value(self):
        return self.d[0]

    def _cut(self, o):
        K = min(self.K, o.K)
        return self.d[: K + 1], o.d[: K + 1], K

    def __add__(self, o):
        if o is None:
            return self
        a, b, _ = self._cut(o)
        return Jet(a + b, self.r)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.d, self.r)

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o):
        if np.isscalar(o):
            return Jet(o * self.d, self.r)
        a, b, K = self._cut(o)
        out = np.zeros((K + 1, a.shape[1]), dtype=complex)
        for n in range(K + 1):
            for i in range(n + 1):
                out[n] += comb(n, i) * a[i] * b[n - i]
        return Jet(out, self.r)

    __rmul__ = __mul__

    def conj(self):
        return Jet(np.conj(self.d), self.r)

    def deriv(self):
        if self.K < 1:
            raise StructuralError("jet order exhausted")
        return Jet(self.d[1:], self.r)

    def rpow(self, m):
        return self * Jet(_rpow_jet(self.r, m, self.K).astype(complex), self.r)

    def rdr(self):
        return self.deriv().rpow(1)

    def div_r2(self):
        return self.rpow(-2)

    def lap(self):
        d1 = self.deriv()
        return d1.deriv() + 2 * d1.rpow(-1)


def power_jet(r, key, nu, alpha0, K):
    return PowerLog.monomial(key, 1.0, nu, alpha0).jet(r, K)


# ---------------------------------------------------------------------------
# radiation profile


@dataclass
class RadiationProfile:
    """f0(r) = Theta(r/delta) sum_{n<=N, j<=n/2} beta_{n,j} log^j(r) r^{2i alpha0 + nu(2n+1) - 1/2}."""
    delta: float
    N: int
    beta: dict
    nu: float
    alpha0: float
    smoothness: int = 8      # cutoff is C^smoothness (the recurrence differentiates f0 often)
    cut: bool = True

    def formal(self) -> PowerLog:
        f = PowerLog({}, self.nu, self.alpha0)
        for (n, j), b in self.beta.items():
            if n <= self.N and b != 0:
                f = f + PowerLog.monomial((-1, 2 * n + 1, 1), complex(b), self.nu, self.alpha0, j)
        return f

    def cutoff(self, r, K=0):
        if not self.cut:
            out = np.zeros((K + 1, np.size(r)))
            out[0] = 1.0
            return out
        th = cutoff_jet(np.asarray(r) / self.delta, self.smoothness, K)
        return th / self.delta ** np.arange(K + 1)[:, None]

    def jet(self, r, K):
        th = Jet(self.cutoff(r, K).astype(complex), np.asarray(r, dtype=float))
        return th * self.formal().jet(r, K)

    def __call__(self, r, deriv: int = 0):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return self.jet(r, deriv).d[deriv]

    def fourier(self, k):
        """Radial 3d Fourier transform 4 pi / k int_0^{2 delta} f0(r) r sin(k r) dr."""
        if not self.cut:
            raise DomainError("Fourier transform needs the cut profile")
        out = []
        b = 2 * self.delta
        for kk in np.atleast_1d(k):
            re = integrate.quad(lambda x: (x * self(x)[0]).real, 0, b, weight="sin",
                                wvar=kk, limit=400)[0]
            im = integrate.quad(lambda x: (x * self(x)[0]).imag, 0, b, weight="sin",
                                wvar=kk, limit=400)[0]
            out.append(4 * np.pi * (re + 1j * im) / kk)
        return np.array(out)

    def hs_windowed(self, s: float, k_max: float, k_min: float = 1e-2, n: int = 240):
        """(2 pi)^-3 4 pi int_{k_min}^{k_max} k^{2s+2} |f0^(k)|^2 dk (trapezoid in log k)."""
        k = np.geomspace(k_min, k_max, n)
        fh = self.fourier(k)
        g = k ** (2 * s + 3) * np.abs(fh) ** 2
        return float(4 * np.pi / (2 * np.pi) ** 3 * np.trapezoid(g, np.log(k)))

    def hs_diagnostics(self, s_values=(1.0,), r_inner=(1e-3, 1e-4)):
        """Windowed Fourier-side integrals with k_max = 1/(r_inner delta)."""
        out = {}
        for s in s_values:
            out[float(s)] = [self.hs_windowed(s, 1.0 / (ri * self.delta)) for ri in r_inner]
        return out


def radiation_profile(delta: float, N: int, beta: dict, nu: float, alpha0: float,
                      smoothness: int = 8, cut: bool = True) -> RadiationProfile:
    if not 0 < delta <= 0.5:
        raise ConfigurationError("delta must lie in (0, 1/2]")
    rows = {n for (n, _) in beta}
    if N > (max(rows) if rows else -1):
        raise ConfigurationError("N exceeds the available beta rows")
    if not all(np.isfinite(complex(v)) for v in beta.values()):
        raise ConfigurationError("beta must be finite")
    return RadiationProfile(delta, N, dict(beta), nu, alpha0, smoothness, cut)


# ---------------------------------------------------------------------------
# index set and class tags


def in_omega(key, m: int) -> bool:
    q, j, k, l = key
    return (j >= 1 and q >= 0 and (q - k) % 2 == 0 and 0 <= l <= m
            and -min(j, q) <= k <= min(max(j - 2, 0), q))


@dataclass(frozen=True)
class FunctionClassTag:
    kind: str          # "A" (support in r <= 2 delta) or "B" (polynomial beyond 2 delta)
    param: int         # m of A_m, k of B_k

    def __str__(self):
        return f"{self.kind}_{self.param}"


def class_tag(key) -> FunctionClassTag:
    q, j, k, l = key
    return FunctionClassTag("B", j) if k == -1 else FunctionClassTag("A", k)


@dataclass
class RemoteCoefficientTable:
    nu: float
    alpha0: float
    m: int
    J_max: int
    mode: str                      # "formal" or "cut"
    profile: RadiationProfile
    g: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)   # C (k in {0,-1}) or B (other k)
    dropped: dict = field(default_factory=dict)   # keys with l > m, by magnitude
    r: np.ndarray | None = None                   # grid (cut mode)
    f0: object = None
    V: tuple = ()

    def insert(self, key, val):
        if not in_omega(key, self.m):
            raise StructuralError(f"{key} outside Omega")
        self.g[key] = val
        self.tags[key] = class_tag(key)

    def keys(self):
        return sorted(self.g)

    def effective_q_cutoff(self):
        """Largest q carrying a nonzero entry, per layer j."""
        out = {}
        for (q, j, k, l), v in self.g.items():
            if not v.is_zero:
                out[j] = max(out.get(j, -1), q)
        return out

    def evaluate(self, key, r, deriv=0):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        v = self.g[key]
        if self.mode == "formal":
            return v(r, deriv)
        lo, hi = self.r[0], self.r[-1]
        if np.min(r) < lo * (1 - 1e-12) or np.max(r) > hi * (1 + 1e-12):
            raise DomainError("r outside the remote grid")
        sp = CubicSpline(np.log(self.r), v.d[0])
        if deriv == 0:
            return sp(np.log(r))
        if deriv == 1:
            return sp(np.log(r), 1) / r
        raise ValueError("cut tables interpolate values and first derivatives only")

    def f0_value(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.mode == "formal":
            return self.f0(r)
        return self.profile(r)

    def to_json(self):
        return {str(k): dict(tag=str(self.tags[k]), zero=bool(self.g[k].is_zero))
                for k in self.keys()}


# ---------------------------------------------------------------------------
# the recurrence


def _acc(a, b):
    return b if a is None else a + b


def _v1(G, q, j, k, l, nu, a0):
    out = None
    g = G.get((q, j - 1, k, l))
    if g is not None:
        out = _acc(out, -1j * (nu * q + j - 1 - 1.5 * k - 2j * k * a0) * g)
        if k != 0:
            out = _acc(out, 1j * k * g.rdr())
    g1 = G.get((q, j - 1, k, l + 1))
    if g1 is not None and k != -1:
        out = _acc(out, 1j * (k + 1) * (l + 1) * g1)
    return out


def _v2(G, q, j, k, l, V1, V2):
    out = None
    g = G.get((q, j - 2, k, l))
    if g is not None:
        out = _acc(out, g.lap() + V1 * g)
    g1 = G.get((q, j - 2, k, l + 1))
    if g1 is not None:
        out = _acc(out, 2 * (l + 1) * g1.rdr().div_r2() + (l + 1) * g1.div_r2())
    g2 = G.get((q, j - 2, k, l + 2))
    if g2 is not None:
        out = _acc(out, (l + 1) * (l + 2) * g2.div_r2())
    gc = G.get((q, j - 2, -k, l))
    if gc is not None:
        out = _acc(out, V2 * gc.conj())
    return out


def _nonlinear_series(f, G, jmax):
    """Terms of |f+eta|^4 (f+eta) with at least two eta factors, keyed (q, J, k, l) with
    J = total j <= jmax (coefficient of (T-t)^{nu q + J})."""
    U = {(0, 0, 0, 0, 0): f}
    for (q, j, k, l), v in G.items():
        if j <= jmax:
            U[(q, j, k, l, 1)] = v
    Ub = {(q, j, -k, l, c): v.conj() for (q, j, k, l, c), v in U.items()}

    def mul(A, B):
        out = {}
        for ka, va in A.items():
            for kb, vb in B.items():
                J = ka[1] + kb[1]
                if J > jmax:
                    continue
                key = (ka[0] + kb[0], J, ka[2] + kb[2], ka[3] + kb[3], min(ka[4] + kb[4], 2))
                out[key] = _acc(out.get(key), va * vb)
        return out

    P = mul(mul(mul(mul(U, U), U), Ub), Ub)
    res = {}
    for (q, J, k, l, c), v in P.items():
        if c >= 2:
            res[(q, J, k, l)] = _acc(res.get((q, J, k, l)), v)
    return res


def _transport_cut(C_cut: Jet, C_formal: PowerLog, a_key, nu, a0, x_h, delta):
    """g = g_formal + r^-a int_0^r rho^{a-1} (C_cut - C_formal) drho; the difference
    vanishes below delta, so the primitive from 0 is regular."""
    r = C_cut.r
    gf = C_formal.transport(a_key, nu, a0)
    a = PowerLog({}, nu, a0).p(a_key)
    x = np.log(r)
    # up to r_s the difference form (exact cancellation below delta) ...
    i_s = min(int(np.searchsorted(r, 2 * delta)) + 8, len(r) - 1)
    lo = slice(0, i_s + 1)
    diff = C_cut.d[0][lo] - C_formal(r[lo])
    I = cumulative_integral(np.exp(a * (x[lo] - x[i_s])) * diff, x_h)
    g0 = np.empty(len(r), dtype=complex)
    g0[lo] = gf(r[lo]) + np.exp(-a * (x[lo] - x[i_s])) * I
    # ... and beyond it the direct primitive (the formal pieces grow there)
    if i_s < len(r) - 1:
        hi = slice(i_s, len(r))
        J = cumulative_integral(np.exp(a * (x[hi] - x[i_s])) * C_cut.d[0][hi], x_h)
        g0[hi] = np.exp(-a * (x[hi] - x[i_s])) * (g0[i_s] + J)
    K = C_cut.K + 1
    rows = [g0]
    for n in range(K):
        rows.append((C_cut.d[n] - (a + n) * rows[n]) / r)
    return Jet(np.array(rows), r), gf


def solve_remote_recurrence(profile: RadiationProfile, beta_tilde: dict, J_max: int = 3,
                            mode: str = "formal", m: int | None = None,
                            r_grid: np.ndarray | None = None, K: int = 8,
                            formal_table: RemoteCoefficientTable | None = None):
    """Layers j = 1..J_max of the remote coefficients.

    j = 1: g_{0,1,0,0} = -i V0, g_{2n+1,1,-1,l} = beta~_{n,l} r^{-2i alpha0 - nu(2n+1) - 5/2}.
    j >= 2: k not in {0,-1} algebraic, k = 0 triangular in l, k = -1 transport.
    """
    if J_max > 3:
        raise ConfigurationError("J_max <= 3 at desk scale")
    nu, a0 = profile.nu, profile.alpha0
    m = profile.N // 2 if m is None else m
    if mode == "formal":
        f = profile.formal()
        prof = RadiationProfile(profile.delta, profile.N, profile.beta, nu, a0,
                                profile.smoothness, cut=False)
        power = lambda key: PowerLog.monomial(key, 1.0, nu, a0)
        r = None
    elif mode == "cut":
        if r_grid is None:
            r_grid = np.geomspace(profile.delta / 100, 40 * profile.delta, 4001)
        r = np.asarray(r_grid, dtype=float)
        f = profile.jet(r, K)
        prof = profile
        power = lambda key: power_jet(r, key, nu, a0, K)
        if formal_table is None:
            formal_table = solve_remote_recurrence(profile, beta_tilde, J_max, "formal", m)
        x_h = float(np.log(r[1] / r[0]))
    else:
        raise ValueError("mode must be 'formal' or 'cut'")

    fb = f.conj()
    ff = f * fb
    V1 = 3 * ff * ff
    V2 = 2 * ff * f * f
    V0 = f.lap() + ff * ff * f
    T = RemoteCoefficientTable(nu, a0, m, J_max, mode, prof, r=r, f0=f, V=(V0, V1, V2))
    G = T.g

    T.insert((0, 1, 0, 0), -1j * V0)
    for (n, l), b in beta_tilde.items():
        if n <= profile.N and l <= m and b != 0:
            T.insert((2 * n + 1, 1, -1, l), complex(b) * power((-5, -(2 * n + 1), -1)))

    for j in range(2, J_max + 1):
        nl = _nonlinear_series(f, {k: v for k, v in G.items() if k[1] <= j - 2}, j - 1)
        # k not in {0,-1}: equation of level j
        cand = {(q, k, l) for (q, jj, k, l) in G if jj in (j - 1, j - 2) and k not in (0, -1)}
        cand |= {(q, k, l) for (q, J, k, l) in nl if J == j - 2 and k not in (0, -1)}
        new = {}
        for (q, k, l) in sorted(cand):
            B = None
            for part in (_v1(G, q, j, k, l, nu, a0), _v2(G, q, j, k, l, V1, V2),
                         nl.get((q, j - 2, k, l))):
                if part is not None:
                    B = _acc(B, -part)
            if B is None or B.is_zero:
                continue
            T.sources[(q, j, k, l)] = B
            new[(q, j, k, l)] = (-4.0 / (k * (k + 1))) * B.div_r2()
        # k in {0,-1}: equation of level j+1 (sources from layers <= j-1)
        cand = {(q, k, l) for (q, jj, k, l) in G if jj == j - 1 and k in (0, -1, 1)}
        cand |= {(q, k, l) for (q, J, k, l) in nl if J == j - 1}
        cand = {(q, k, l) for (q, k, l) in cand if k in (0, -1)}
        srcs = {}
        for (q, k, l) in cand:
            C = None
            for part in (_v2(G, q, j + 1, k, l, V1, V2), nl.get((q, j - 1, k, l))):
                if part is not None:
                    C = _acc(C, -1j * part)
            if C is not None and not C.is_zero:
                srcs[(q, k, l)] = C
        for (q, k, l), C in srcs.items():
            T.sources[(q, j, k, l)] = C
        # k = 0: (nu q + j) g_l - (l+1) g_{l+1} = C_l, from the top log power down
        for q in sorted({q for (q, k, l) in srcs if k == 0}):
            ls = [l for (qq, k, l) in srcs if qq == q and k == 0]
            above = None
            for l in range(max(ls), -1, -1):
                C = srcs.get((q, 0, l))
                rhs = C
                if above is not None:
                    rhs = _acc(rhs, (l + 1) * above)
                if rhs is None:
                    above = None
                    continue
                above = rhs * (1.0 / (nu * q + j))
                new[(q, j, 0, l)] = above
        # k = -1: r g' + (nu q + j + 3/2 + 2 i alpha0) g = C
        for (q, k, l), C in srcs.items():
            if k != -1:
                continue
            a_key = (2 * j + 3, q, 1)
            if mode == "formal":
                new[(q, j, -1, l)] = C.transport(a_key, nu, a0)
            else:
                Cf = formal_table.sources[(q, j, -1, l)]
                new[(q, j, -1, l)], _ = _transport_cut(C, Cf, a_key, nu, a0, x_h, profile.delta)
        for key, val in new.items():
            if key[3] > m:
                T.dropped[key] = _magnitude(val)
                continue
            if not in_omega(key, m):
                if _magnitude(val) > 0:
                    raise StructuralError(f"nonzero source outside Omega at {key}")
                continue
            T.insert(key, val)
    return T


def _magnitude(v):
    if isinstance(v, PowerLog):
        return float(max((np.max(np.abs(c)) for c in v.terms.values()), default=0.0))
    return float(np.max(np.abs(v.d[0])))


# ---------------------------------------------------------------------------
# assembly


def assemble_remote(table: RemoteCoefficientTable, s: float, r, T: float | None = None,
                    with_dt: bool = False, zero_table: bool = False):
    """u_Re~ at s = T - t on r, optionally with its exact time derivative d/dt."""
    if s <= 0 or (T is not None and s > T):
        raise DomainError("t outside (0, T)")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    nu, a0 = table.nu, table.alpha0
    u = table.f0_value(r).astype(complex)
    ut = np.zeros_like(u)
    if zero_table:
        return (u, ut) if with_dt else u
    Phi = -2 * a0 * np.log(s) + r**2 / (4 * s)
    Phit = 2 * a0 / s + r**2 / (4 * s**2)
    L = np.log(r) - np.log(s)
    for key in table.keys():
        q, j, k, l = key
        g = table.evaluate(key, r)
        P = nu * q + j
        base = s**P * np.exp(1j * k * Phi) * g
        u += base * L**l
        if with_dt:
            ut += base * ((-P / s + 1j * k * Phit) * L**l + (l * L ** (l - 1) / s if l else 0))
    return (u, ut) if with_dt else u


def u_remote_y(table, s, y, zero_table=False):
    """u_Re(t, y) = e^{-i alpha0 log s} s^{1/4} u_Re~(t, s^{1/2} y)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return (np.exp(-1j * table.alpha0 * np.log(s)) * s**0.25
            * assemble_remote(table, s, np.sqrt(s) * y, zero_table=zero_table))


def consistency_selfsimilar_remote(h, table, s_values, N2: int, eps2: float,
                                   npts: int = 64, C0: float = 1.0, C1: float = 2.0,
                                   zero: bool = False):
    """max over y in [C0 s^-eps2, C1 s^-eps2] of |w_S - u_Re| per s, plus the fitted exponent."""
    from .interior_expansion import fit_exponent
    from .self_similar import w_selfsimilar
    rows = []
    for s in s_values:
        y = np.linspace(C0 * s**-eps2, C1 * s**-eps2, npts)
        if y[-1] > h.y_max or y[0] < h.y0:
            raise ConfigurationError("empty or out-of-range S/R overlap")
        d = np.abs(w_selfsimilar(h, s, y, N2, zero_corrections=zero)
                   - u_remote_y(table, s, y, zero_table=zero))
        rows.append(dict(s=float(s), deviation=float(np.max(d))))
    if any(r["deviation"] == 0 for r in rows) or len(rows) < 2:
        return rows, float("nan"), float("nan")
    slope, resid = fit_exponent([r["s"] for r in rows], [r["deviation"] for r in rows])
    return rows, slope, resid


# ---------------------------------------------------------------------------
# data from the self-similar far field


def radiation_coefficients(h, N: int = 2, window=(30.0, 80.0)):
    """beta_{n,j} (non-oscillatory) and beta~_{n,j} (oscillatory) coefficients of the
    self-similar far field, converted to the remote log convention, with reliability flags.

    At level n the far field reads y^p [A + B log y + C (log y - nu log s)] phi-part; with
    B = -(1+2nu) C the log s terms cancel and beta_{n,1} = B + C, beta_{n,0} = A."""
    from .self_similar import decompose_far_field, wronskian_coefficients
    if N > 2:
        raise ConfigurationError("far-field rows are available for n <= 2 only")
    beta, beta_t, flags = {}, {}, {}
    for n in range(N + 1):
        keys = sorted(k for k in h.keys if k[0] == n)
        fits = {k: decompose_far_field(h, k, window, interaction=(n == 2 and k[1] == 0))
                for k in keys}
        for (_, j), d in fits.items():
            if j == 0:
                beta[(n, 0)] = complex(d["a+"])
                if n == 0:
                    beta_t[(n, 0)] = complex(d["a-"])
                    flags[(n, 0)] = "fit"
                elif n == 1:
                    beta_t[(n, 0)] = wronskian_coefficients(h, (n, 0))["a_minus"]
                    flags[(n, 0)] = "wronskian"
                else:
                    # the oscillatory part is swamped by the growing one: unit placeholder
                    beta_t[(n, 0)] = 1.0
                    flags[(n, 0)] = "placeholder"
            else:
                B = complex(fits[(n, 0)].get("log*phi", 0.0))
                beta[(n, j)] = B + complex(d["a+"])
                beta_t[(n, j)] = 1.0
                flags[(n, j)] = "placeholder"
    return beta, beta_t, flags
