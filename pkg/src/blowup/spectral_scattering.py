"""Jost solutions, scattering data, discrete spectrum, distorted Fourier transform and
transference kernels of the matrix operator

    H = (-d^2/dx^2 + mu) sigma_3 + V,   V = [[V1, V2], [-V2, -V1]],
    V1 = -3 W^4(|x|),  V2 = -2 W^4(|x|),

acting on odd functions of x.  H f = (lam^2 + mu) f is written f'' = M f with
M = diag(-lam^2, gamma^2) + U, U = sigma_3 V, gamma = sqrt(lam^2 + 2 mu).

Volterra equations are discretized on panels of Chebyshev-Lobatto nodes.  A panel
transform J_beta[g](x) = int_x^inf e^{beta (y - x)} g(y) dy is exact for the local
polynomial interpolant; the panel-to-panel recursion runs through lfilter, and the
part beyond the last panel is a first-order Born tail computed with QUADPACK.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.signal import lfilter

from .core_profiles import DomainError, W, dW, W1, uniform_derivative

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.diag([1.0, -1.0])


# ---------------------------------------------------------------------------
# potential


@dataclass(frozen=True)
class MatrixPotential:
    mu: float = 0.0
    decay: int = 4

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError("mu must be >= 0")

    @staticmethod
    def V1(x):
        return -3.0 * W(np.abs(x)) ** 4

    @staticmethod
    def V2(x):
        return -2.0 * W(np.abs(x)) ** 4

    @staticmethod
    def dV1(x):
        x = np.asarray(x, float)
        return -12.0 * W(np.abs(x)) ** 3 * dW(np.abs(x)) * np.sign(x)

    @staticmethod
    def dV2(x):
        x = np.asarray(x, float)
        return -8.0 * W(np.abs(x)) ** 3 * dW(np.abs(x)) * np.sign(x)

    def matrix(self, x):
        """V(x) with shape (..., 2, 2)."""
        a, b = self.V1(x), self.V2(x)
        return np.stack([np.stack([a, b], -1), np.stack([-b, -a], -1)], -2)

    def structural_defect(self, x):
        V = self.matrix(x)
        return float(np.max(np.abs(SIGMA1 @ V @ SIGMA1 + V)))

    def decay_defect(self, x):
        """max over samples of |d^l V_j| <x>^{4+l} for l = 0, 1 (bounded iff the decay class holds)."""
        x = np.asarray(x, float)
        jx = np.sqrt(1 + x**2)
        vals = [np.abs(self.V1(x)) * jx**4, np.abs(self.V2(x)) * jx**4,
                np.abs(self.dV1(x)) * jx**5, np.abs(self.dV2(x)) * jx**5]
        return float(max(np.max(v) for v in vals))


# ---------------------------------------------------------------------------
# panel machinery

_N = 16
_T = -np.cos(np.pi * np.arange(_N) / (_N - 1))
_BW = np.ones(_N)
_BW[1::2] = -1
_BW[[0, -1]] *= 0.5
_GX, _GW = leggauss(40)


def _lagrange(z, t=_T, w=_BW):
    """Barycentric Lagrange matrix L[q, k] = l_k(z_q) on [-1, 1]."""
    z = np.atleast_1d(np.asarray(z, float))
    d = z[:, None] - t[None, :]
    hit = d == 0
    d[hit] = 1.0
    M = w / d
    M /= M.sum(1, keepdims=True)
    rows = hit.any(1)
    M[rows] = hit[rows]
    return M


_CW = _GW @ _lagrange(_GX)    # Lobatto-node quadrature weights on [-1, 1]


@lru_cache(maxsize=16384)
def _ops(beta: complex, h: float):
    """Ab[j,k] = int_{y_j}^{b} e^{beta(y-y_j)} l_k dy,  Af[j,k] = int_a^{y_j} e^{beta(y_j-y)} l_k dy."""
    t = _T[:, None]
    zb = t + (_GX + 1) * (1 - t) / 2
    wb = _GW * (1 - t) / 2 * h / 2 * np.exp(beta * (zb - t) * h / 2)
    zf = -1 + (_GX + 1) * (t + 1) / 2
    wf = _GW * (t + 1) / 2 * h / 2 * np.exp(beta * (t - zf) * h / 2)
    Lb = _lagrange(zb.ravel()).reshape(_N, len(_GX), _N)
    Lf = _lagrange(zf.ravel()).reshape(_N, len(_GX), _N)
    return np.einsum("jq,jqk->jk", wb, Lb), np.einsum("jq,jqk->jk", wf, Lf)


class PanelGrid:
    """Panels on [0, X]: width h0 on [0, 8], then doubling zones [8 2^(k-1), 8 2^k] with
    width min(h0 2^k, hmax), so the panel count grows only logarithmically with X."""

    def __init__(self, X: float, hmax: float, h0: float = 0.25):
        h0 = min(h0, hmax)
        zones, a, k = [], 0.0, 0
        while a < X - 1e-12:
            b = min(8.0 * 2.0 ** k, X) if k else min(8.0, X)
            target = min(h0 * 2.0 ** k, hmax)
            m = max(1, int(math.ceil((b - a) / target - 1e-9)))
            zones.append((a, (b - a) / m, m))
            a, k = b, k + 1
        self.zones = []
        left, hs, p = [], [], 0
        for a, h, m in zones:
            self.zones.append((p, p + m, h))
            left.append(a + h * np.arange(m))
            hs.append(np.full(m, h))
            p += m
        self.a = np.concatenate(left)
        self.h = np.concatenate(hs)
        self.P = p
        self.X = float(self.a[-1] + self.h[-1])
        self.x = self.a[:, None] + (_T[None, :] + 1) * self.h[:, None] / 2
        self.w = _CW[None, :] * self.h[:, None] / 2

    def back(self, G, beta, tail=0.0):
        """J(x) = int_x^X e^{beta(y-x)} G dy + e^{beta(X-x)} tail."""
        out = np.empty(G.shape, complex)
        Jend = complex(tail)
        for s, e, h in reversed(self.zones):
            A, _ = _ops(complex(beta), h)
            loc = G[s:e] @ A.T
            rho = np.exp(beta * h)
            c = loc[::-1, 0].copy()
            c[0] += rho * Jend
            Ja = lfilter([1.0], [1.0, -rho], c)[::-1]
            Jb = np.append(Ja[1:], Jend)
            out[s:e] = loc + np.exp(beta * (1 - _T) * h / 2)[None, :] * Jb[:, None]
            Jend = Ja[0]
        return out

    def fwd(self, G, beta, p0=0):
        """K(x) = int_{a_p0}^x e^{beta(x-y)} G dy for x >= a_p0 (zero before)."""
        out = np.zeros(G.shape, complex)
        K0 = 0j
        for s, e, h in self.zones:
            if e <= p0:
                continue
            s0 = max(s, p0)
            _, A = _ops(complex(beta), h)
            loc = G[s0:e] @ A.T
            rho = np.exp(beta * h)
            c = loc[:, -1].copy()
            c[0] += rho * K0
            Kb = lfilter([1.0], [1.0, -rho], c)
            Ka = np.concatenate([[K0], Kb[:-1]])
            out[s0:e] = loc + np.exp(beta * (_T + 1) * h / 2)[None, :] * Ka[:, None]
            K0 = Kb[-1]
        return out

    def locate(self, xq):
        xq = np.atleast_1d(np.asarray(xq, float))
        p = np.clip(np.searchsorted(self.a, xq, side="right") - 1, 0, self.P - 1)
        t = 2 * (xq - self.a[p]) / self.h[p] - 1
        return p, _lagrange(t)

    def interp(self, F, xq):
        """Interpolate node values F (P, n, ...) at points xq."""
        p, L = self.locate(xq)
        return np.einsum("qk,qk...->q...", L, F[p])

    def integrate(self, F):
        return np.einsum("pk,pk...->...", self.w, F)


def _tail(beta: complex, phi, X: float) -> complex:
    """int_0^inf e^{beta t} phi(X + t) dt for Re beta <= 0 (QUADPACK, QAWF when oscillatory)."""
    a, w = -beta.real, beta.imag

    def f(t):
        return math.exp(-a * t) * float(phi(X + t))

    kw = dict(epsabs=1e-15, epsrel=1e-12, limit=400)
    if abs(w) < 1e-300:
        return complex(quad(f, 0, np.inf, **kw)[0])
    re = quad(f, 0, np.inf, weight="cos", wvar=w, epsabs=1e-15, limlst=100)[0]
    im = quad(f, 0, np.inf, weight="sin", wvar=w, epsabs=1e-15, limlst=100)[0]
    return complex(re, im)


def _tail_V1(beta, X):
    return _tail(beta, lambda y: MatrixPotential.V1(y), X)


def _tail_V2(beta, X):
    return _tail(beta, lambda y: MatrixPotential.V2(y), X)


# ---------------------------------------------------------------------------
# Jost solutions


@dataclass
class JostSolution:
    """f(x) = e^{sigma x} phi(x), f'(x) = e^{sigma x} (dphi + sigma phi) on grid nodes."""
    kind: str
    lam: float
    gamma: float
    grid: PanelGrid
    sigma: float
    phi: np.ndarray
    dphi: np.ndarray
    norm_residual: float
    x_valid: float
    iterations: int = 0

    def scaled(self, x):
        return self.grid.interp(self.phi, x), self.grid.interp(self.dphi, x)

    def values(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        if np.any(x > self.x_valid + 1e-12) or np.any(x < 0):
            raise DomainError(f"{self.kind} evaluated outside [0, {self.x_valid:g}]")
        p, d = self.scaled(x)
        e = np.exp(self.sigma * x)[:, None]
        return e * p, e * (d + self.sigma * p)

    def conj(self, kind):
        return JostSolution(kind, self.lam, self.gamma, self.grid, self.sigma, self.phi.conj(),
                            self.dphi.conj(), self.norm_residual, self.x_valid, self.iterations)


def _wronsk_scaled(a: JostSolution, b: JostSolution, x):
    """e^{-(sigma_a + sigma_b) x} w(a, b) at x, with w(f, g) = f'.g - f.g'."""
    pa, da = a.scaled(x)
    pb, db = b.scaled(x)
    return np.sum((da + a.sigma * pa) * pb - pa * (db + b.sigma * pb), axis=-1)


def wronskian(a: JostSolution, b: JostSolution, frac=(0.25, 0.75)):
    """Median of w(a, b) over nodes in the middle half of the common range and its max
    deviation.  Exponential factors are removed when sigma_a + sigma_b != 0."""
    xv = min(a.x_valid, b.x_valid)
    g = a.grid
    x = g.x.ravel()
    x = x[(x >= frac[0] * xv) & (x <= frac[1] * xv)]
    w = _wronsk_scaled(a, b, x)
    med = complex(np.median(w.real) + 1j * np.median(w.imag))
    return med, float(np.max(np.abs(w - med)))


def _grid_for(lam, gamma, X=None):
    bmax = max(math.hypot(lam, gamma), 2 * gamma, lam, 1e-300)
    if X is None:
        # first Born size of chi - e2 at X below 2e-7
        Xa = math.sqrt(13.5 / 2e-7)
        Xb = (9.0 / (max(min(lam, gamma), 1e-300) * 2e-7)) ** (1 / 3)
        X = max(60.0, min(Xa, Xb))
    return PanelGrid(X, hmax=min(4.0, 2.0 / bmax))


def _w4(x):
    """W^4 at a scalar point, without argument checks (hot path of the ODE right-hand sides)."""
    return 1.0 / (1.0 + x * x / 3.0) ** 2


def _converged(diff, prev, tol):
    """Picard stop: below tol, or stagnating at roundoff level."""
    return diff < tol or (diff < 1e-11 and diff > 0.5 * prev)


def _rhs_f(lam, gamma):
    def rhs(x, Y):
        q = _w4(x)
        a, b = -3.0 * q, -2.0 * q
        f1, f2 = Y[0], Y[1]
        return np.array([Y[2], Y[3], (-lam**2 + a) * f1 + b * f2, b * f1 + (gamma**2 + a) * f2])
    return rhs


class JostFamily:
    """f1, f2 = conj f1, f3, f4 at one lam > 0."""

    def __init__(self, lam: float, mu: float = 0.0, X: float | None = None, tol: float = 1e-14,
                 maxit: int = 500, x0_threshold: float = 0.5, tilde4: bool = True,
                 gauge: str = "diagonal"):
        if not lam > 0:
            raise DomainError("the Jost family is built for lam > 0; use symmetry for lam < 0")
        self.lam, self.mu = float(lam), float(mu)
        self.gamma = math.sqrt(lam**2 + 2 * mu)
        self.grid = _grid_for(self.lam, self.gamma, X)
        self.tol, self.maxit = tol, maxit
        g = self.grid
        self._a = MatrixPotential.V1(g.x)
        self._b = MatrixPotential.V2(g.x)
        self.f3 = self._build_f3()
        self.f1 = self._build_f1(x0_threshold)
        if gauge == "diagonal":
            self._diagonal_gauge()
        elif gauge != "window":
            raise ValueError("gauge must be 'diagonal' or 'window'")
        self.f2 = self.f1.conj("f2")
        self.f4 = self._build_f4()
        if tilde4:
            self.f4 = self._tilde4()

    # f3 ------------------------------------------------------------------
    def _build_f3(self):
        lam, gam, g = self.lam, self.gamma, self.grid
        a, b, X = self._a, self._b, g.X
        b1, b2 = 1j * lam - gam, -1j * lam - gam
        t1, t2 = _tail_V2(b1, X), _tail_V2(b2, X)
        t3, t4 = _tail_V1(0j, X), _tail_V1(complex(-2 * gam), X)
        c1 = np.zeros(g.x.shape, complex)
        c2 = np.ones(g.x.shape, complex)
        diff = np.inf
        for it in range(1, self.maxit + 1):
            G1, G2 = a * c1 + b * c2, b * c1 + a * c2
            J1, J2 = g.back(G1, b1, t1), g.back(G1, b2, t2)
            J3, J4 = g.back(G2, 0.0, t3), g.back(G2, -2 * gam, t4)
            n1 = (J1 - J2) / (2j * lam)
            n2 = 1 + (J3 - J4) / (2 * gam)
            diff, prev = max(np.max(np.abs(n1 - c1)), np.max(np.abs(n2 - c2))), diff
            c1, c2 = n1, n2
            if _converged(diff, prev, self.tol):
                break
        else:
            raise RuntimeError(f"f3 iteration did not converge at lam={lam:g}")
        d1, d2 = -b1 * c1 - J2, -J4
        phi = np.stack([c1.real, c2.real], -1).astype(complex)
        dphi = np.stack([d1.real, d2.real], -1).astype(complex)
        res = float(np.hypot(abs(c1[-1, -1]), abs(c2[-1, -1] - 1)))
        return JostSolution("f3", lam, gam, g, -gam, phi, dphi, res, g.X, it)

    # f1 ------------------------------------------------------------------
    def _build_f1(self, thr):
        lam, gam, g = self.lam, self.gamma, self.grid
        a, b, X = self._a, self._b, g.X
        chi, dchi = self.f3.phi, self.f3.dphi
        c1, c2, d1, d2 = chi[..., 0], chi[..., 1], dchi[..., 0], dchi[..., 1]
        ok = np.all(c2.real >= thr, axis=1)
        bad = np.nonzero(~ok)[0]
        p0 = 0 if len(bad) == 0 else int(bad[-1]) + 1
        if p0 >= g.P:
            raise RuntimeError("no window with chi_2 bounded below")
        Va = a - b * c1 / c2
        Vb = (d1 - c1 * d2 / c2) / c2**2
        E = np.exp(1j * lam * g.x)
        eX = np.exp(1j * lam * X)
        tp, tm = eX * _tail_V1(2j * lam, X), eX * _tail_V1(0j, X)
        tw = eX * _tail_V2(complex(-gam, lam), X)
        v = E.copy()
        diff = np.inf
        for it in range(1, self.maxit + 1):
            wt = -g.back(c2 * b * v, -gam, tw)
            G = Va * v - 2 * wt * Vb
            Jp, Jm = g.back(G, 1j * lam, tp), g.back(G, -1j * lam, tm)
            vn = E + (Jp - Jm) / (2j * lam)
            diff, prev = np.max(np.abs(vn[p0:] - v[p0:])), diff
            v = vn
            if _converged(diff, prev, self.tol):
                break
        else:
            raise RuntimeError(f"f1 iteration did not converge at lam={lam:g}")
        wt = -g.back(c2 * b * v, -gam, tw)
        dv = 1j * lam * E - (Jp + Jm) / 2
        r = wt / c2**2
        Q = g.fwd(r, -gam, p0)
        f = Q[..., None] * chi
        f[..., 0] += v
        df = r[..., None] * chi + Q[..., None] * (dchi - gam * chi)
        df[..., 0] += dv
        if p0 > 0:
            x0 = g.a[p0]
            xs = np.unique(g.x[:p0].ravel())[::-1]
            Y0 = np.concatenate([f[p0, 0], df[p0, 0]])
            sol = solve_ivp(_rhs_f(lam, gam), [x0, 0.0], Y0, method="DOP853", rtol=1e-13,
                            atol=1e-15, t_eval=xs)
            Ys = sol.y[:, ::-1]
            xs = xs[::-1]
            idx = np.searchsorted(xs, g.x[:p0].ravel())
            f[:p0] = Ys[:2, idx].T.reshape(p0, _N, 2)
            df[:p0] = Ys[2:, idx].T.reshape(p0, _N, 2)
        res = float(np.max(np.abs(f[-1, -1] * np.exp(-1j * lam * X) - [1, 0])))
        self.x0 = float(g.a[p0])
        return JostSolution("f1", lam, gam, g, 0.0, f, df, res, g.X, it)

    def _diagonal_gauge(self):
        """f1 -> f1 + c f3 with W(f1, g3)(0) = 0, i.e. D(lam) diagonal.

        f1 is only determined modulo f3; this choice is smooth in lam and leaves
        s, r and the scattering solution F1 k e unchanged."""
        (a, da), (b, db) = [getattr(self, k).values(0.0) for k in ("f1", "f3")]
        D12 = da[0] @ b[0] + a[0] @ db[0]
        D22 = 2 * db[0] @ b[0]
        c = -D12 / D22
        f1, f3 = self.f1, self.f3
        e = np.exp(-self.gamma * f3.grid.x)[..., None]
        f1.phi = f1.phi + c * e * f3.phi
        f1.dphi = f1.dphi + c * e * (f3.dphi - self.gamma * f3.phi)
        self.gauge_shift = complex(c)

    # f4 ------------------------------------------------------------------
    def _build_f4(self):
        lam, gam, g = self.lam, self.gamma, self.grid
        # first-order tail (1/2gamma) int_X^inf V1 below 1e-4, so the neglected second order is < 1e-8
        X4 = min(g.X, max(35.0 / gam ** (1 / 3), 8.0 / gam))
        p4 = int(np.searchsorted(g.a, X4, side="right"))
        X4 = float(g.a[p4 - 1] + g.h[p4 - 1])

        def rhs(x, Y):
            q = _w4(x)
            a, b = -3.0 * q, -2.0 * q
            c, d = Y[:2], Y[2:]
            return np.array([d[0], d[1],
                             (-lam**2 - gam**2 + a) * c[0] + b * c[1] - 2 * gam * d[0],
                             b * c[0] + a * c[1] - 2 * gam * d[1]])

        xs = np.unique(g.x[:p4].ravel())
        sol = solve_ivp(rhs, [0.0, X4], np.array([0, 1, 0, 0], complex), method="DOP853",
                        rtol=1e-12, atol=1e-14, t_eval=xs)
        c2X, d2X = sol.y[1, -1], sol.y[3, -1]
        N = c2X + d2X / (2 * gam) + c2X / (2 * gam) * _tail_V1(0j, X4).real
        idx = np.searchsorted(xs, g.x[:p4].ravel())
        phi = np.full(g.x.shape + (2,), np.nan, complex)
        dphi = phi.copy()
        phi[:p4] = (sol.y[:2, idx].T / N).reshape(p4, _N, 2)
        dphi[:p4] = (sol.y[2:, idx].T / N).reshape(p4, _N, 2)
        res = float(abs(c2X / N - 1 + (c2X / N) / (2 * gam) * _tail_V1(0j, X4).real
                        + d2X / N / (2 * gam)))
        return JostSolution("f4", lam, gam, g, gam, phi, dphi, res, X4)

    def _tilde4(self):
        """f4 + a f1 + b f2 with w(f1, .) = w(f2, .) = 0."""
        x0 = np.zeros(1)
        f4, f1, f2 = self.f4, self.f1, self.f2
        w14 = _wronsk_scaled(f1, f4, x0)[0]
        w24 = _wronsk_scaled(f2, f4, x0)[0]
        cb = -w14 / (2j * self.lam)
        ca = w24 / (2j * self.lam)
        e = np.exp(-self.gamma * f4.grid.x)[..., None]
        phi = f4.phi + e * (ca * f1.phi + cb * f2.phi)
        dphi = f4.dphi + e * (ca * (f1.dphi - self.gamma * f1.phi)
                              + cb * (f2.dphi - self.gamma * f2.phi))
        return JostSolution("f4", self.lam, self.gamma, f4.grid, f4.sigma, phi, dphi,
                            f4.norm_residual, f4.x_valid)

    # ------------------------------------------------------------------
    def at0(self):
        """Values and derivatives of f1..f4 at x = 0 (each row a 2-vector)."""
        out = {}
        for k in ("f1", "f2", "f3", "f4"):
            f, d = getattr(self, k).values(0.0)
            out[k] = (f[0], d[0])
        return out

    def residual_f(self, kind: str, x):
        """Operator residual |f'' - M f| / |f| at x via the scaled second derivative
        obtained by differentiating the stored derivative on the panel."""
        s = getattr(self, kind)
        g = s.grid
        p, L = g.locate(x)
        # derivative of the interpolant of dphi
        t = _T
        D = _cheb_diff()
        dd = np.einsum("qk,kj,qj...->q...", L, D, s.dphi[p]) * (2 / g.h[p])[:, None]
        ph, dp = s.scaled(x)
        sg = s.sigma
        fpp = dd + 2 * sg * dp + sg**2 * ph
        a, b = MatrixPotential.V1(x), MatrixPotential.V2(x)
        lam, gam = self.lam, self.gamma
        Mf = np.stack([(-lam**2 + a) * ph[:, 0] + b * ph[:, 1],
                       b * ph[:, 0] + (gam**2 + a) * ph[:, 1]], -1)
        return np.linalg.norm(fpp - Mf, axis=-1) / np.linalg.norm(ph, axis=-1)


@lru_cache(maxsize=1)
def _cheb_diff():
    """Differentiation matrix on the Lobatto nodes of [-1, 1]."""
    t, w = _T, _BW
    D = np.zeros((_N, _N))
    for i in range(_N):
        for j in range(_N):
            if i != j:
                D[i, j] = w[j] / w[i] / (t[i] - t[j])
        D[i, i] = -D[i].sum()
    return D


def jost_decaying(lam, mu=0.0, **kw) -> JostSolution:
    return JostFamily(lam, mu, **kw).f3


def jost_oscillatory(lam, mu=0.0, **kw) -> JostSolution:
    return JostFamily(lam, mu, **kw).f1


def jost_growing(lam, mu=0.0, **kw) -> JostSolution:
    return JostFamily(lam, mu, **kw).f4


# ---------------------------------------------------------------------------
# scattering data at x = 0


def _F(fam: JostFamily):
    z = fam.at0()
    F1 = np.column_stack([z["f1"][0], z["f3"][0]])
    F1p = np.column_stack([z["f1"][1], z["f3"][1]])
    F2 = np.column_stack([z["f2"][0], z["f4"][0]])
    F2p = np.column_stack([z["f2"][1], z["f4"][1]])
    return F1, F1p, F2, F2p


def scattering_point(fam: JostFamily, checks: bool = True) -> dict:
    lam, gam = fam.lam, fam.gamma
    F1, F1p, F2, F2p = _F(fam)
    D = F1p.T @ F1 + F1.T @ F1p
    P = np.diag([2j * lam, -2 * gam])
    Pi = np.linalg.inv(P)
    A = Pi @ D.T
    WG1 = F1p.T @ F2 + F1.T @ F2p
    B = -Pi @ WG1.T
    k = 2j * lam * np.linalg.inv(D)
    ke = k[:, 0]
    Bke = B @ ke
    out = dict(lam=lam, gamma=gam, D=D, A=A, B=B, k=k, WG1=WG1, s=ke[0], s_tilde=ke[1],
               r=Bke[0], r_tilde=Bke[1], detD=np.linalg.det(D), detWG1=np.linalg.det(WG1))
    out["unitarity"] = abs(out["s"]) ** 2 + abs(out["r"]) ** 2 - 1
    if checks:
        # (r, r~) from continuity of the global solution through x = 0
        Fv, Fd = F1 @ ke, F1p @ ke
        f1, f1p = F1[:, 0], F1p[:, 0]
        f3, f3p = F1[:, 1], F1p[:, 1]
        f2, f2p = F2[:, 0], F2p[:, 0]
        M = np.vstack([np.column_stack([f1, f3]), np.column_stack([f1p, f3p])])
        rhs = np.concatenate([Fv - f2, -Fd - f2p])
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        out["r_match"] = sol[0]
        out["r_tilde_match"] = sol[1]
        out["match_residual"] = float(np.linalg.norm(M @ sol - rhs) / np.linalg.norm(rhs))
        # Wronskian identities
        w = {}
        for name, (u, v) in dict(w12=("f1", "f2"), w13=("f1", "f3"), w34=("f3", "f4"),
                                 w33=("f3", "f3"), w11=("f1", "f1")).items():
            w[name] = wronskian(getattr(fam, u), getattr(fam, v))
        out["wronskians"] = w
        # D away from 0: symmetric and constant
        xc = min(1.0, 3.0 / gam)
        Fm, Fmp = _continue_negative(fam, xc)
        Fp_, Fpp_ = [], []
        for kname in ("f1", "f3"):
            f, d = getattr(fam, kname).values(xc)
            Fp_.append(f[0])
            Fpp_.append(d[0])
        Fp_, Fpp_ = np.column_stack(Fp_), np.column_stack(Fpp_)
        Dx = Fpp_.T @ Fm + Fp_.T @ Fmp
        nD = np.linalg.norm(D)
        out["D_sym_defect"] = float(np.linalg.norm(Dx - Dx.T) / nD)
        out["D_const_defect"] = float(np.linalg.norm(Dx - D) / nD)
        # first transmission identity with A, B (p = diag(1,0), q = diag(0,1))
        p, q = np.diag([1.0, 0]), np.diag([0, 1.0])
        lhs = A.conj().T @ (2j * lam * p @ A + 2 * gam * q @ B) - 2j * lam * p
        rhs_ = B.conj().T @ (2j * lam * p @ B + 2 * gam * q @ A)
        out["transmi_defect"] = float(np.max(np.abs(lhs - rhs_)) / max(1.0, 2 * lam))
    return out


def _continue_negative(fam: JostFamily, xc: float):
    """F1 = (f1, f3) and F1' at x = -xc by integrating the ODE through 0."""
    rhs = _rhs_f(fam.lam, fam.gamma)
    cols, dcols = [], []
    for k in ("f1", "f3"):
        f, d = getattr(fam, k).values(0.0)
        sol = solve_ivp(rhs, [0.0, -xc], np.concatenate([f[0], d[0]]).astype(complex),
                        method="DOP853", rtol=1e-13, atol=1e-15)
        cols.append(sol.y[:2, -1])
        dcols.append(sol.y[2:, -1])
    return np.column_stack(cols), np.column_stack(dcols)


@dataclass
class ScatteringTable:
    mu: float
    lam: np.ndarray
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray
    k: np.ndarray
    s: np.ndarray
    s_tilde: np.ndarray
    r: np.ndarray
    r_tilde: np.ndarray
    detD: np.ndarray
    detWG1: np.ndarray
    unitarity: np.ndarray
    diag: dict = field(default_factory=dict)

    def conj_at_minus(self):
        """Values at -lam from the reflection symmetry of the Jost family."""
        return dict(lam=-self.lam, s=self.s.conj(), r=self.r.conj(), D=self.D.conj())


def scattering_coefficients(lam_grid, mu: float = 0.0, checks: bool = True,
                            tilde4: bool = True) -> ScatteringTable:
    rows = []
    for lam in lam_grid:
        fam = JostFamily(float(lam), mu, tilde4=tilde4)
        rows.append(scattering_point(fam, checks))
    st = lambda key: np.array([r[key] for r in rows])
    diag = {}
    if checks:
        for key in ("D_sym_defect", "D_const_defect", "transmi_defect", "match_residual"):
            diag[key] = st(key)
        diag["r_match_defect"] = np.abs(st("r") - st("r_match"))
        for w in ("w12", "w13", "w34", "w33", "w11"):
            diag[w] = np.array([r["wronskians"][w][0] for r in rows])
            diag[w + "_dev"] = np.array([r["wronskians"][w][1] for r in rows])
    return ScatteringTable(mu, np.asarray(lam_grid, float), st("D"), st("A"), st("B"), st("k"),
                           st("s"), st("s_tilde"), st("r"), st("r_tilde"), st("detD"),
                           st("detWG1"), st("unitarity"), diag)


def extrapolate_zero(lam, vals):
    """Constant term of a least-squares fit in {1, lam log lam, lam, lam^2} (resonant threshold)."""
    lam = np.asarray(lam, float)
    B = np.column_stack([np.ones_like(lam), lam * np.log(lam), lam, lam**2])
    vals = np.asarray(vals)
    flat = vals.reshape(len(lam), -1)
    c, *_ = np.linalg.lstsq(B, flat, rcond=None)
    return c[0].reshape(vals.shape[1:])


def threshold_limits(mu: float = 0.0, lam=None):
    """s(0+) and k(0+) by extrapolation from small lam."""
    lam = np.geomspace(1e-4, 1e-2, 9) if lam is None else np.asarray(lam)
    fams = [scattering_point(JostFamily(float(l), mu), checks=False) for l in lam]
    k = np.array([f["k"] for f in fams])
    s = np.array([f["s"] for f in fams])
    return dict(lam=lam, s0=complex(extrapolate_zero(lam, s)), k0=extrapolate_zero(lam, k),
                s=s, k=k)


def ode_route(lam: float, mu: float = 0.0, X: float | None = None) -> dict:
    """Independent s, r from backward ODE integration only (no Volterra panels).

    chi3 = e^{gamma x} f3 is integrated from X with first-Born data; f1 is integrated in
    f-variables with Euclidean deflation of the f3 direction every 1/gamma (f1 is only
    defined modulo f3, and s, r are invariant under that freedom); f4 comes from the
    forward integration of the family."""
    gam = math.sqrt(lam**2 + 2 * mu)
    X = (60.0 if lam < 1 else 40.0) if X is None else X
    b1, b2 = 1j * lam - gam, -1j * lam - gam
    t1, t2 = _tail_V2(b1, X), _tail_V2(b2, X)
    t3, t4 = _tail_V1(0j, X), _tail_V1(complex(-2 * gam), X)
    c = np.array([(t1 - t2) / (2j * lam), 1 + (t3 - t4) / (2 * gam)])
    dc = np.array([-b1 * c[0] - t2, -t4])

    def rhs3(x, Y):
        q = _w4(x)
        a, b = -3.0 * q, -2.0 * q
        ch, d = Y[:2], Y[2:]
        U = np.array([a * ch[0] + b * ch[1], b * ch[0] + a * ch[1]])
        return np.concatenate([d, 2 * gam * d - np.array([(lam**2 + gam**2) * ch[0], 0]) + U])

    s3 = solve_ivp(rhs3, [X, 0], np.concatenate([c, dc]), method="DOP853", rtol=1e-13,
                   atol=1e-16, dense_output=True)
    eX = np.exp(1j * lam * X)
    tp, tm = eX * _tail_V1(2j * lam, X), eX * _tail_V1(0j, X)
    tw = eX * _tail_V2(complex(-gam, lam), X)
    v = eX + (tp - tm) / (2j * lam)
    dv = 1j * lam * eX - (tp + tm) / 2
    # first Born for the second component: f1^2 ~ e^{-gamma X} (u chi^2), u' = -w~ e^{gamma x}
    Y = np.array([v, -tw / (2 * gam) * 0, dv, 0], complex)
    rhs = _rhs_f(lam, gam)
    x = X
    step = min(1.0 / gam, 5.0)

    def f3state(x):
        """(f3, f3') e^{gamma x}: the deflation direction without underflow."""
        y = s3.sol(x)
        return np.concatenate([y[:2], y[2:] - gam * y[:2]])

    while x > 0:
        xn = max(0.0, x - step)
        Y = solve_ivp(rhs, [x, xn], Y, method="DOP853", rtol=1e-13, atol=1e-300,
                      first_step=min(1e-2, x - xn)).y[:, -1]
        z = f3state(xn)
        Y = Y - (np.vdot(z, Y) / np.vdot(z, z)) * z
        x = xn
    y3 = f3state(0.0)
    fam = JostFamily(lam, mu)
    z = fam.at0()
    F1 = np.column_stack([Y[:2], y3[:2]])
    F1p = np.column_stack([Y[2:], y3[2:]])
    F2 = np.column_stack([Y[:2].conj(), z["f4"][0]])
    F2p = np.column_stack([Y[2:].conj(), z["f4"][1]])
    D = F1p.T @ F1 + F1.T @ F1p
    P = np.diag([2j * lam, -2 * gam])
    k = 2j * lam * np.linalg.inv(D)
    B = -np.linalg.inv(P) @ (F1p.T @ F2 + F1.T @ F2p).T
    ke = k[:, 0]
    return dict(lam=lam, s=ke[0], r=(B @ ke)[0], f3_0=y3[:2])


# ---------------------------------------------------------------------------
# discrete eigenvalue


def _eig_rhs(x, Y, kap, mu):
    q = _w4(x)
    a, b = -3.0 * q, -2.0 * q
    E = 1j * kap
    f = Y[:2]
    return np.array([Y[2], Y[3], (mu - E + a) * f[0] + b * f[1], b * f[0] + (mu + E + a) * f[1]])


def _shoot(kap, mu, X, dense=False):
    k1 = np.sqrt(mu - 1j * kap)
    k1 = k1 if k1.real > 0 else -k1
    Y0 = np.array([1, 0, -k1, 0], complex)
    return solve_ivp(_eig_rhs, [X, 0], Y0, args=(kap, mu), method="DOP853", rtol=1e-13,
                     atol=1e-30, dense_output=dense, max_step=0.05 if dense else np.inf)


def _det(kap, mu, X):
    a, b = _shoot(kap, mu, X).y[:2, -1]
    return (abs(a) ** 2 - abs(b) ** 2) / (abs(a) ** 2 + abs(b) ** 2)


@dataclass
class DiscreteMode:
    kappa: float
    mu: float
    X: float
    coef: complex
    sol: object
    norm: float
    det_scan: tuple

    def phi_plus(self, x):
        """phi_+(x) and phi_+'(x) for x >= 0 (rows); odd extension for x < 0."""
        x = np.atleast_1d(np.asarray(x, float))
        ax = np.abs(x)
        y = np.where(ax[None, :] <= self.X, self.sol.sol(np.minimum(ax, self.X)), 0)
        f = (y[:2] + self.coef * y[[1, 0]].conj()) / self.norm
        d = (y[2:] + self.coef * y[[3, 2]].conj()) / self.norm
        sg = np.sign(x)
        return (f * sg).T, d.T

    def phi_minus(self, x):
        f, d = self.phi_plus(x)
        return f.conj(), d.conj()


def discrete_eigenvalue(mu: float = 0.0, X: float = 40.0, bracket=(0.02, 3.0), nscan: int = 60):
    ks = np.linspace(*bracket, nscan)
    ds = np.array([_det(k, mu, X) for k in ks])
    idx = np.nonzero(np.sign(ds[:-1]) != np.sign(ds[1:]))[0]
    if len(idx) == 0:
        raise RuntimeError("no sign change of the matching determinant; widen the scan")
    i = idx[0]
    kap = brentq(_det, ks[i], ks[i + 1], args=(mu, X), xtol=1e-15, rtol=1e-15)
    sol = _shoot(kap, mu, X, dense=True)
    a, b = sol.y[:2, -1]
    c = -a / np.conj(b)
    c = c / abs(c)
    # phi = Y1 + c sigma1 conj Y1 = e^{i th}(...) with th fixing sigma1 conj phi = phi
    th = np.angle(np.conj(c)) / 2
    mode = DiscreteMode(kap, mu, X, c, sol, 1.0, (ks, ds))
    xg, wg = _gl_grid(0.0, X, 0.25)
    f, _ = mode.phi_plus(xg)
    mode.norm = math.sqrt(2 * np.sum(wg * np.sum(np.abs(f) ** 2, 1)))
    f = f * np.exp(1j * th)
    j = np.argmax(np.abs(f[:, 0]))
    sgn = 1.0 if f[j, 0].real > 0 else -1.0
    return _PhasedMode(mode, sgn * np.exp(1j * th))


class _PhasedMode:
    """Wraps a DiscreteMode with the global unit factor that enforces phi_+ = sigma_1 conj phi_+."""

    def __init__(self, mode, z):
        self.mode, self.z = mode, z
        self.kappa, self.mu, self.X = mode.kappa, mode.mu, mode.X
        self.det_scan = mode.det_scan

    def phi_plus(self, x):
        f, d = self.mode.phi_plus(x)
        return f * self.z, d * self.z

    def phi_minus(self, x):
        f, d = self.phi_plus(x)
        return f.conj(), d.conj()

    def symmetry_defect(self, x=None):
        x = np.linspace(0, 20, 2001) if x is None else x
        f, _ = self.phi_plus(x)
        return float(np.max(np.abs(f - f[:, ::-1].conj())) / np.max(np.abs(f)))

    def at_zero(self):
        return float(np.max(np.abs(self.mode.sol.y[:2, -1] + self.mode.coef
                                   * self.mode.sol.y[[1, 0], -1].conj()) / self.mode.norm))

    def residual(self, h: float = 0.01, L: float = 30.0) -> float:
        """||H phi - i kappa phi|| / ||phi|| on [-L, L] with 8th-order stencils."""
        x = np.arange(-L, L + h / 2, h)
        f, _ = self.phi_plus(x)
        f2 = np.stack([uniform_derivative(f[:, j], h, 2, 9) for j in range(2)], 1)
        a, b = MatrixPotential.V1(x), MatrixPotential.V2(x)
        mu = self.mu
        Hf = np.stack([-f2[:, 0] + mu * f[:, 0] + a * f[:, 0] + b * f[:, 1],
                       f2[:, 1] - mu * f[:, 1] - b * f[:, 0] - a * f[:, 1]], 1)
        R = Hf - 1j * self.kappa * f
        sl = slice(8, -8)
        return float(np.linalg.norm(R[sl]) / np.linalg.norm(f[sl]))

    def norm(self):
        xg, wg = _gl_grid(0.0, self.X, 0.25)
        f, _ = self.phi_plus(xg)
        return math.sqrt(2 * np.sum(wg * np.sum(np.abs(f) ** 2, 1)))


def _gl_grid(a, b, h, n=16):
    m = max(1, int(math.ceil((b - a) / h)))
    e = np.linspace(a, b, m + 1)
    gx, gw = leggauss(n)
    x = (e[:-1, None] + (gx[None, :] + 1) * np.diff(e)[:, None] / 2).ravel()
    w = (gw[None, :] * np.diff(e)[:, None] / 2).ravel()
    return x, w


def fd_eigenvalues(mu: float = 0.0, L: float = 30.0, h: float = 0.05):
    """Spectrum of a 4th-order finite-difference H on odd grid functions (f(0) = 0)."""
    N = int(round(L / h))
    x = h * np.arange(1, N + 1)
    D2 = np.zeros((N, N))
    c = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]) / h**2
    for i in range(N):
        for k, off in enumerate(range(-2, 3)):
            j = i + off
            if j == -1:
                continue              # f(0) = 0
            if j < -1:
                D2[i, -j - 2] -= c[k]  # odd ghost f(-x) = -f(x)
            elif j < N:
                D2[i, j] += c[k]
    a, b = np.diag(MatrixPotential.V1(x)), np.diag(MatrixPotential.V2(x))
    I = np.eye(N)
    H = np.block([[-D2 + mu * I + a, b], [-b, D2 - mu * I - a]])
    return np.linalg.eigvals(H)


def fd_kappa(mu: float = 0.0, **kw) -> float:
    ev = fd_eigenvalues(mu, **kw)
    return float(np.max(np.abs(ev.imag)))


def kdd_matrix(mode) -> np.ndarray:
    """K_dd[i, j] = <x d_x phi_i, phi_j> over R for phi_0 = phi_+, phi_1 = phi_-."""
    xg, wg = _gl_grid(0.0, mode.X, 0.25)
    fp, dp = mode.phi_plus(xg)
    fm, dm = mode.phi_minus(xg)
    ph, dph = [fp, fm], [dp, dm]
    K = np.zeros((2, 2), complex)
    for i in range(2):
        for j in range(2):
            K[i, j] = 2 * np.sum(wg * xg * np.sum(dph[i] * ph[j].conj(), 1))
    return K


# ---------------------------------------------------------------------------
# distorted Fourier transform on odd functions


def dft_lambda_nodes(lam_min=1e-4, lam_max=10.0, per_decade=12, per_unit=12):
    gx, gw = leggauss(per_decade)
    xs, ws = [], []
    d0 = int(round(math.log10(lam_min)))
    for d in range(d0, 0):
        u0, u1 = d * math.log(10), (d + 1) * math.log(10)
        u = u0 + (gx + 1) * (u1 - u0) / 2
        xs.append(np.exp(u))
        ws.append(gw * (u1 - u0) / 2 * np.exp(u))
    gx, gw = leggauss(per_unit)
    for a in range(1, int(math.ceil(lam_max))):
        xs.append(a + (gx + 1) / 2)
        ws.append(gw / 2)
    lam, w = np.concatenate(xs), np.concatenate(ws)
    return lam, w


@dataclass
class FourierCoefficients:
    x0p: complex
    x0m: complex
    lam: np.ndarray
    xp: np.ndarray
    xm: np.ndarray


def e_plus(fam: JostFamily, coef: dict, x):
    """e_+(x, lam) for x of either sign, lam > 0 (rows of 2-vectors)."""
    x = np.atleast_1d(np.asarray(x, float))
    ax = np.abs(x)
    f1, _ = fam.f1.values(ax)
    f3, _ = fam.f3.values(ax)
    right = coef["s"] * f1 + coef["s_tilde"] * f3
    left = f1.conj() + coef["r"] * f1 + coef["r_tilde"] * f3
    return np.where((x >= 0)[:, None], right, left)


class DistortedFourier:
    """Forward/inverse distorted Fourier transform on odd C^2-valued functions.

    f^+(lam) = <f, sigma_3 e_+>,  f^-(lam) = <f, sigma_3 e_->,  e_- = sigma_1 e_+.
    For odd f only psi = e_+(x) - e_+(-x) enters, and
    f_c = (2 pi)^{-1} int_0^inf [f^+ psi - f^- sigma_1 psi] dlam.
    Discrete part: Riesz coefficients <f, sigma_3 phi_-+> / <phi_+-, sigma_3 phi_-+>.
    """

    def __init__(self, mu: float = 0.0, x_max: float = 12.0, lam_max: float = 10.0,
                 lam_min: float = 1e-4, mode=None):
        self.mu = mu
        self.lam, self.wlam = dft_lambda_nodes(lam_min, lam_max)
        self.lam_min = lam_min
        self.x, self.wx = _gl_grid(0.0, x_max, 0.1)
        self.mode = discrete_eigenvalue(mu) if mode is None else mode
        self.kappa = self.mode.kappa
        psi = np.empty((len(self.lam), len(self.x), 2), complex)
        self.coef = []
        for i, l in enumerate(self.lam):
            fam = JostFamily(float(l), mu)
            c = scattering_point(fam, checks=False)
            self.coef.append(c)
            psi[i] = e_plus(fam, c, self.x) - e_plus(fam, c, -self.x)
        self.psi = psi
        fp, _ = self.mode.phi_plus(self.x)
        self.phi = fp

    def inner(self, f, g):
        """<f, g> over R for odd f, g given on x >= 0 nodes."""
        return 2 * np.sum(self.wx * np.sum(f * g.conj(), 1))

    def discrete(self, f):
        pp, pm = self.phi, self.phi.conj()
        s3 = lambda u: u * np.array([1, -1])
        cp = self.inner(f, s3(pm)) / self.inner(pp, s3(pm))
        cm = self.inner(f, s3(pp)) / self.inner(pm, s3(pp))
        return cp, cm

    def project_c(self, f):
        cp, cm = self.discrete(f)
        return f - cp * self.phi - cm * self.phi.conj()

    def forward(self, f) -> FourierCoefficients:
        f = np.asarray(f, complex)
        cp, cm = self.discrete(f)
        s3psi = self.psi.conj() * np.array([1, -1])
        xp = np.einsum("x,lxc,xc->l", self.wx, s3psi, f)
        s3s1psi = self.psi[..., ::-1].conj() * np.array([1, -1])
        xm = np.einsum("x,lxc,xc->l", self.wx, s3s1psi, f)
        return FourierCoefficients(cp, cm, self.lam, xp, xm)

    def inverse(self, c: FourierCoefficients, discrete: bool = False):
        integrand = c.xp[:, None, None] * self.psi - c.xm[:, None, None] * self.psi[..., ::-1]
        out = np.einsum("l,lxc->xc", self.wlam, integrand)
        # [0, lam_min] with the integrand frozen at lam_min
        out += self.lam_min * integrand[0]
        out /= 2 * np.pi
        if discrete:
            out = out + c.x0p * self.phi + c.x0m * self.phi.conj()
        return out

    def l2(self, f):
        return math.sqrt(self.inner(f, f).real)

    def orthogonality(self, lam_samples=None, L: float = 60.0):
        """max |<phi_+-, sigma_3 e_+-(., lam)>| on sample lam, on a long x grid."""
        lam_samples = np.geomspace(0.01, 10, 9) if lam_samples is None else lam_samples
        x, w = _gl_grid(0.0, L, 0.1)
        fp, _ = self.mode.phi_plus(x)
        worst = 0.0
        for l in lam_samples:
            fam = JostFamily(float(l), self.mu)
            c = scattering_point(fam, checks=False)
            psi = e_plus(fam, c, x) - e_plus(fam, c, -x)
            for phi in (fp, fp.conj()):
                for e in (psi, psi[:, ::-1]):
                    v = 2 * np.sum(w * np.sum(phi * (e.conj() * np.array([1, -1])), 1))
                    worst = max(worst, abs(v))
        return worst


def apply_H(f, d2f, x, mu=0.0):
    """H f from f and f'' given as rows of 2-vectors."""
    a, b = MatrixPotential.V1(x), MatrixPotential.V2(x)
    return np.stack([-d2f[:, 0] + mu * f[:, 0] + a * f[:, 0] + b * f[:, 1],
                     d2f[:, 1] - mu * f[:, 1] - b * f[:, 0] - a * f[:, 1]], 1)


def test_functions(x):
    """Odd test functions with closed-form second derivatives: name -> (f, f'')."""
    g1 = np.exp(-x**2)
    g2 = np.exp(-x**2 / 2)
    p1 = x * g1
    p1pp = (4 * x**3 - 6 * x) * g1
    p2 = x * g2
    p2pp = (x**3 - 3 * x) * g2
    p3 = x**3 * g1
    p3pp = (6 * x - 14 * x**3 + 4 * x**5) * g1
    one, alt, e1 = np.array([1, 1]), np.array([1, -1]), np.array([1, 0])
    return {
        "x exp(-x^2) (1,1)": (p1[:, None] * one, p1pp[:, None] * one),
        "x exp(-x^2/2) (1,-1)": (p2[:, None] * alt, p2pp[:, None] * alt),
        "x^3 exp(-x^2) (1,0)": (p3[:, None] * e1, p3pp[:, None] * e1),
    }


def dft_checks(dft: DistortedFourier) -> dict:
    out = dict(covariance={}, roundtrip={}, amplification={})
    for name, (f, fpp) in test_functions(dft.x).items():
        f = f.astype(complex)
        fc = dft.project_c(f)
        c = dft.forward(f)
        back = dft.inverse(c)
        out["roundtrip"][name] = dft.l2(back - fc) / dft.l2(fc)
        out["amplification"][name] = dft.l2(back) / dft.l2(fc)
        Hf = apply_H(f, fpp, dft.x, dft.mu)
        cH = dft.forward(Hf)
        E = dft.lam**2 + dft.mu
        ep = np.abs(cH.xp - E * c.xp)
        em = np.abs(cH.xm + E * c.xm)
        scale = max(np.max(np.abs(E * c.xp)), np.max(np.abs(E * c.xm)))
        out["covariance"][name] = float(max(ep.max(), em.max()) / scale)
    out["orthogonality"] = dft.orthogonality()
    return out


# ---------------------------------------------------------------------------
# transference kernels


def _U_matrix(x, mu=0.0, form="commutator"):
    """U with [H, x d_x] = 2 H - 2 mu sigma_3 + U.

    form="commutator": U = -2V - x V' (what the commutator gives);
    form="literal":    U = -2V + x V' (sign of the x V' term flipped)."""
    pot = MatrixPotential(mu)
    V = pot.matrix(x)
    a, b = MatrixPotential.dV1(x), MatrixPotential.dV2(x)
    dV = np.stack([np.stack([a, b], -1), np.stack([-b, -a], -1)], -2)
    sg = -1.0 if form == "commutator" else 1.0
    return -2 * V + sg * np.asarray(x)[:, None, None] * dV


class TransferenceData:
    """e_+(., lam) on x in [-L, L] for sample lam, used by the F-kernels."""

    def __init__(self, lam_samples, mu=0.0, L=200.0):
        self.lam = np.asarray(lam_samples, float)
        self.mu = mu
        x1, w1 = _gl_grid(0.0, 10.0, 0.1)
        x2, w2 = _gl_grid(10.0, L, 0.5)
        self.x = np.concatenate([x1, x2])
        self.w = np.concatenate([w1, w2])
        self.coef = []
        ep, em = [], []
        for l in self.lam:
            fam = JostFamily(float(l), mu)
            if fam.grid.X < L:
                fam = JostFamily(float(l), mu, X=L + 1.0)
            c = scattering_point(fam, checks=False)
            self.coef.append(c)
            ep.append(e_plus(fam, c, self.x))
            em.append(e_plus(fam, c, -self.x))
        self.e_right, self.e_left = np.array(ep), np.array(em)

    def F(self, form="commutator"):
        """F[i, j, a, b] = <U e_a(., lam_j), sigma_3 e_b(., lam_i)> with a, b in {+, -}."""
        U = _U_matrix(self.x, self.mu, form)
        n = len(self.lam)
        out = np.zeros((n, n, 2, 2), complex)
        for side in (self.e_right, self.e_left):
            E = [side, side[..., ::-1]]     # e_+, e_- = sigma_1 e_+
            for a in range(2):
                Ue = np.einsum("xij,lxj->lxi", U, E[a])
                for b in range(2):
                    s3e = E[b].conj() * np.array([1, -1])
                    out[:, :, a, b] += np.einsum("x,jxc,ixc->ij", self.w, Ue, s3e)
        return out


def hermitian_defect(F):
    """max |F_{a+}(lam_i, lam_j) - conj F_{+a}(lam_j, lam_i)| / max |F|."""
    d = 0.0
    for a in range(2):
        A = F[:, :, a, 0]
        B = F[:, :, 0, a].conj().T
        d = max(d, float(np.max(np.abs(A - B))))
    return d / float(np.max(np.abs(F)))


def resonance_profile(x):
    """The odd threshold solution Phi = f1(x, 0) (defined modulo f3(x, 0))."""
    x = np.asarray(x, float)
    ax = np.abs(x)
    w, w1 = W(ax), W1(ax)
    r3 = math.sqrt(3)
    return np.stack([x * w / (2 * r3) - x * w1 / r3, -x * w / (2 * r3) - x * w1 / r3], -1)


def F00_oracle(mu=0.0, form="commutator", L=2000.0):
    """F_{+-,+}(0, 0) = <U e(., 0), sigma_3 e(., 0)> with e(., 0) = -Phi."""
    x1, w1 = _gl_grid(0.0, 20.0, 0.1)
    x2, w2 = _gl_grid(20.0, L, 5.0)
    x, w = np.concatenate([x1, x2]), np.concatenate([w1, w2])
    P = resonance_profile(x)
    U = _U_matrix(x, mu, form)
    out = []
    for E in (P, P[:, ::-1]):
        Ue = np.einsum("xij,xj->xi", U, E)
        out.append(2 * np.sum(w * np.sum(Ue * P * np.array([1, -1]), 1)))
    return np.array(out)


def diagonal_a(lam, s, r):
    """a(lam) = 1/2 lam (s' conj s + r' conj r) - 1 with 4th-order differences in log lam."""
    u = np.log(lam)
    du = u[1] - u[0]
    if not np.allclose(np.diff(u), du, rtol=1e-8):
        raise DomainError("diagonal_a needs a log-uniform lam grid")

    def d4(f):
        g = np.full(f.shape, np.nan, complex)
        g[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * du)
        return g

    return 0.5 * (d4(s) * s.conj() + d4(r) * r.conj()) - 1


def transference_kernels(lam_samples=(0.3, 0.7, 1.5, 3.0), mu=0.0, small=None, mode=None):
    td = TransferenceData(lam_samples, mu)
    F = td.F("commutator")
    F_lit = td.F("literal")
    small = np.geomspace(1e-4, 1e-2, 7) if small is None else np.asarray(small)
    ts = TransferenceData(small, mu, L=200.0)
    diag_c = np.einsum("iiab->iab", ts.F("commutator"))
    diag_l = np.einsum("iiab->iab", ts.F("literal"))
    ext_c = extrapolate_zero(small, diag_c[:, :, 0])
    ext_l = extrapolate_zero(small, diag_l[:, :, 0])
    mode = discrete_eigenvalue(mu) if mode is None else mode
    lg = np.geomspace(0.05, 10, 41)
    tab = scattering_coefficients(lg, mu, checks=False)
    return dict(lam=td.lam, F=F, F_literal=F_lit, hermitian_defect=hermitian_defect(F),
                F00_extrapolated=ext_c, F00_literal_extrapolated=ext_l,
                F00_oracle=F00_oracle(mu, "commutator"),
                F00_literal_oracle=F00_oracle(mu, "literal"),
                small_lam=small, F_small=diag_c, Kdd=kdd_matrix(mode),
                a_lam=lg, a=diagonal_a(lg, tab.s, tab.r))


# ---------------------------------------------------------------------------
# propagator kernels of the elliptic-transport system


def propagator_kernel(tau, sigma, xi, sign: int = 1, nu: float = math.sqrt(2)):
    """S = exp(+-i (2 nu tau)^{-1/(2 nu)} xi^2) exp(-+i (2 nu sigma)^{-1/(2 nu)} xi^2)."""
    tau, sigma = np.asarray(tau, float), np.asarray(sigma, float)
    if np.any(tau > sigma):
        raise DomainError("propagator needs tau <= sigma")
    if np.any(tau <= 0):
        raise DomainError("tau must be positive")
    p = -1 / (2 * nu)
    ph = ((2 * nu * tau) ** p - (2 * nu * sigma) ** p) * np.asarray(xi, float) ** 2
    return np.exp(1j * sign * ph)


def lam_of_tau(tau, nu=math.sqrt(2)):
    """lambda(tau) with dot lambda / lambda = (1 + 2 nu) / (4 nu tau), lambda(1/(2 nu)) = 1."""
    return (2 * nu * np.asarray(tau, float)) ** ((1 + 2 * nu) / (4 * nu))


def weighted_ratio_exponent(alpha, nu=math.sqrt(2), taus=None, ratios=None, xis=None):
    """Largest log(ratio)/log(sigma/tau) over a sample grid, where
    ratio = (1 + |xi|/lambda(tau))^alpha / (1 + |xi|/lambda(sigma))^alpha."""
    taus = np.geomspace(1.0, 1e4, 13) if taus is None else taus
    ratios = np.geomspace(1.01, 1e3, 13) if ratios is None else ratios
    xis = np.geomspace(1e-3, 1e6, 28) if xis is None else xis
    T, R, X = np.meshgrid(taus, ratios, xis, indexing="ij")
    S = T * R
    num = (1 + X / lam_of_tau(T, nu)) ** alpha
    den = (1 + X / lam_of_tau(S, nu)) ** alpha
    return float(np.max(np.log(num / den) / np.log(R)))


def ratio_bound_C(alpha, nu=math.sqrt(2)):
    """Configured exponent: lambda ratio power alpha (1 + 2 nu) / (4 nu)."""
    return alpha * (1 + 2 * nu) / (4 * nu)


def scaling_defect(nu=math.sqrt(2), n=200, seed=0):
    """max |S(tau, sigma, xi) - S(xi^{-4 nu} tau, xi^{-4 nu} sigma, 1)| on random samples."""
    rng = np.random.default_rng(seed)
    tau = rng.uniform(1, 50, n)
    sig = tau * rng.uniform(1, 20, n)
    xi = rng.uniform(0.2, 5, n)
    a = propagator_kernel(tau, sig, xi, 1, nu)
    b = propagator_kernel(xi ** (-4 * nu) * tau, xi ** (-4 * nu) * sig, 1.0, 1, nu)
    c = propagator_kernel(xi ** (-4 * nu) * tau, np.maximum(sig, xi ** (-4 * nu) * tau), 1.0, 1, nu)
    return float(np.max(np.abs(a - b))), float(np.max(np.abs(a - c)))


# ---------------------------------------------------------------------------
# embedded eigenvalues and file output


def embedded_eigenvalue_scan(lam_grid, mu=0.0, table: ScatteringTable | None = None):
    tab = scattering_coefficients(lam_grid, mu, checks=False) if table is None else table
    out = {}
    for key, v in (("detD", tab.detD), ("detWG1", tab.detWG1)):
        a = np.abs(v)
        out[key] = dict(min=float(a.min()), median=float(np.median(a)),
                        ratio=float(a.min() / np.median(a)),
                        argmin=float(tab.lam[int(np.argmin(a))]))
    return out


def write_scattering_csv(tab: ScatteringTable, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["lam", "s_re", "s_im", "r_re", "r_im", "detD_re", "detD_im", "unitarity_defect"]
    data = np.column_stack([tab.lam, tab.s.real, tab.s.imag, tab.r.real, tab.r.imag,
                            tab.detD.real, tab.detD.imag, tab.unitarity])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.16e")


def write_eigen_json(mode, path, residual=None, fd_kappa_value=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = dict(kappa=mode.kappa, mu=mode.mu,
             residual=mode.residual() if residual is None else residual,
             symmetry_defect=mode.symmetry_defect(), fd_kappa=fd_kappa_value)
    path.write_text(json.dumps(d, indent=2))


def write_transference_csv(tk: dict, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["lam,lam_tilde,a,b,F_re,F_im"]
    lam = tk["lam"]
    F = tk["F"]
    for i in range(len(lam)):
        for j in range(len(lam)):
            for a in range(2):
                for b in range(2):
                    v = F[i, j, a, b]
                    lines.append(f"{lam[i]:.16e},{lam[j]:.16e},{'+-'[a]},{'+-'[b]},"
                                 f"{v.real:.16e},{v.imag:.16e}")
    path.write_text("\n".join(lines) + "\n")
