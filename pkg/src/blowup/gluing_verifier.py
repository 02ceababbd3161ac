"""Glued approximate solution and its PDE error.

In the self-similar variable y = r s^{-1/2}, s = T - t,

    w_app = Th_I w_In + (1 - Th_I) Th_S w_S + (1 - Th_S) w_Re,
    Th_I = Theta(s^{-eps1} y),   Th_S = Theta(s^{eps2} y),

and u_app(t, r) = e^{i alpha0 log s} s^{-1/4} w_app(t, r / sqrt s).  All time
derivatives are symbolic: each piece is a finite sum of s-powers, log s factors and
phases times functions of one scaled variable.  Spatial derivatives use 8th-order
stencils on a grid x(y) = asinh(a y / b) / a + y / h that is fine near 0 (interior
scale s^nu) and uniform far out (oscillation e^{i r^2 / 4s}).  The grid is staggered
about y = 0, where even extension provides ghost nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import make_interp_spline

from .core_profiles import W, cutoff_jet, fornberg_weights, smooth_cutoff, uniform_derivative
from .interior_expansion import InteriorState, fit_exponent, interior_radius
from .remote_region import RemoteCoefficientTable, assemble_remote
from .self_similar import Hierarchy


class MissingRegion(ValueError):
    pass


class StencilError(RuntimeError):
    pass


@dataclass(frozen=True)
class GlueConfig:
    nu: float = float(np.sqrt(2.0))
    alpha0: float = 1.0
    T: float = 0.05
    eps1: float | None = None       # default nu / 2
    eps2: float = 0.45
    N1: int = 4                     # interior iterate k
    N2: int = 2                     # self-similar levels n <= N2
    N3: int = 2                     # remote layers j <= N3
    r_obs: float = 1.7              # covers 2 s^{1/2-eps2} for every s <= T
    smoothness: int = 4             # cutoff is C^smoothness
    grid_a: float = 0.01            # relative spacing of the geometric part
    grid_b: float = 0.02            # spacing near 0 in units of s^nu (i.e. in R)
    grid_h: float = 0.005           # uniform spacing far out
    phase: float = 0.0              # constant gauge shift added to alpha(t)
    zero: bool = False              # replace every piece by the bare bubble

    @property
    def e1(self):
        return self.nu / 2 if self.eps1 is None else self.eps1

    def t_sweep(self, p=range(1, 7)):
        return [self.T * 2.0**-k for k in p]


@dataclass
class ApproxSolution:
    config: GlueConfig
    interior: InteriorState | None
    selfsim: Hierarchy | None
    remote: RemoteCoefficientTable | None
    _splines: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.config.zero:
            missing = [n for n, v in (("interior", self.interior), ("self-similar", self.selfsim),
                                      ("remote", self.remote)) if v is None]
            if missing:
                raise MissingRegion("missing region piece: " + ", ".join(missing))
        if self.interior is not None:
            eta = self.interior.eta_star
            g = eta.grid
            for l in eta.grades():
                self._splines[l] = make_interp_spline(g.x, eta.terms[l], k=7)
            self._xmap = lambda R: np.arcsinh(R / g.scale)
            self._Rmax = g.R[-1]

    def lam(self, s):
        return s ** (-0.5 - self.config.nu)

    def alpha(self, s):
        return self.config.alpha0 * np.log(s) + self.config.phase

    def interior_corrections(self, s, R):
        """sum_l b^l chi_l(R), its R d_R, and its d_s at fixed R."""
        c = self.config
        C = np.zeros(len(R), complex)
        RC, dC = np.zeros_like(C), np.zeros_like(C)
        if c.zero:
            return C, RC, dC
        if len(R) and np.max(R) > self._Rmax:
            raise MissingRegion("interior piece needed beyond its grid")
        x = self._xmap(R)
        dxdR = 1 / np.sqrt(self.interior.eta_star.grid.scale**2 + R**2)
        b = s ** (2 * c.nu)
        for l, sp in self._splines.items():
            v = b**l * sp(x)
            C += v
            RC += b**l * sp(x, 1) * dxdR * R
            dC += 2 * c.nu * l / s * v
        return C, RC, dC


def y_grid(cfg: GlueConfig, s: float, y_max: float, ghost: int = 4):
    """Staggered grid (y, dx/dy, d2x/dy2) on a uniform unit step in x, with ghost nodes."""
    a, h = cfg.grid_a, cfg.grid_h
    b = cfg.grid_b * s**cfg.nu

    def xf(y):
        return np.arcsinh(a * y / b) / a + y / h

    n = int(np.ceil(xf(y_max) - 0.5)) + 1
    xs = np.arange(-ghost, n) + 0.5
    # invert x(y) by Newton from the uniform-part guess, then bisection-safe polish
    y = np.where(xs > 0, np.minimum(xs * h, y_max * 1.01), 0.0)
    y = np.abs(y)
    xa = np.abs(xs)
    lo, hi = np.zeros_like(xa), np.full_like(xa, y_max * 2 + 1)
    for _ in range(200):
        f = xf(y) - xa
        lo = np.where(f < 0, y, lo)
        hi = np.where(f >= 0, y, hi)
        d1 = 1 / np.sqrt(b * b + a * a * y * y) + 1 / h
        yn = y - f / d1
        bad = (yn <= lo) | (yn >= hi)
        yn = np.where(bad, 0.5 * (lo + hi), yn)
        if np.max(np.abs(yn - y) / np.maximum(yn, 1e-300)) < 1e-15:
            y = yn
            break
        y = yn
    y = np.sign(xs) * y
    q = b * b + a * a * y * y
    dx = 1 / np.sqrt(q) + 1 / h
    d2x = -a * a * y / q**1.5
    return y, dx, d2x


def _dy(f, dx, d2x, width=9):
    fx = uniform_derivative(f, 1.0, 1, width)
    fxx = uniform_derivative(f, 1.0, 2, width)
    return fx * dx, fxx * dx**2 + fx * d2x


@dataclass
class Field:
    """u_app, its symbolic d/ds at fixed r, and bookkeeping on the y grid (ghosts removed)."""
    s: float
    y: np.ndarray
    r: np.ndarray
    dxdy: np.ndarray
    u: np.ndarray
    us: np.ndarray
    lap: np.ndarray       # Delta u_app
    ur: np.ndarray
    th_I: np.ndarray
    th_S: np.ndarray
    ghost: int
    nl: np.ndarray        # |u|^4 u - |u_W|^4 u_W
    lap_v: np.ndarray     # Delta (u_app - u_W) by stencils
    v: np.ndarray         # u_app - u_W


def _pieces(ap: ApproxSolution, s: float, ya: np.ndarray, pieces: str = "glued"):
    """Gauge-free pieces at points ya >= 0: v = u_app - u_W, d_s u_app at fixed r, cutoffs.

    u_W = e^{i alpha0 log s} lambda^{1/2} W(lambda r) is the bare bubble; v is formed
    without subtracting it so that stencils never act on the O(lambda^{1/2}) bubble.
    """
    c = ap.config
    nu, a0, e1, e2 = c.nu, c.alpha0, c.e1, c.eps2
    r = np.sqrt(s) * ya
    P = np.exp(1j * a0 * np.log(s)) * s**-0.25
    pre = P * s ** (-nu / 2)
    n = len(ya)
    V = {k: np.zeros(n, complex) for k in "ISR"}   # piece minus u_W
    Us = {k: np.zeros(n, complex) for k in "ISR"}

    if pieces == "interior" or c.zero:
        thI, dthI = np.ones(n), np.zeros(n)
        thS, dthS = np.ones(n), np.zeros(n)
    else:
        jI = cutoff_jet(s**-e1 * ya, c.smoothness, 1)
        jS = cutoff_jet(s**e2 * ya, c.smoothness, 1)
        thI, thS = jI[0], jS[0]
        dthI = jI[1] * s**-e1 * ya * (-e1 - 0.5) / s
        dthS = jS[1] * s**e2 * ya * (e2 - 0.5) / s

    R = s**-nu * ya
    Wv = W(R)
    uW = pre * Wv
    RWp = -R**2 / 3 * (1 + R**2 / 3) ** -1.5
    uW_s = pre * (Wv * (1j * a0 - 0.25 - nu / 2) / s - (0.5 + nu) / s * RWp)

    mI = thI > 0
    C, RC, dC = ap.interior_corrections(s, R[mI])
    V["I"][mI] = pre * C
    Us["I"][mI] = uW_s[mI] + pre * (C * (1j * a0 - 0.25 - nu / 2) / s + dC - (0.5 + nu) / s * RC)

    mS = (1 - thI > 0) & (thS > 0)
    if np.any(mS):
        h = ap.selfsim
        yy = ya[mS]
        L = np.log(yy) - nu * np.log(s)
        acc, accs = np.zeros(len(yy), complex), np.zeros(len(yy), complex)
        for (k, j) in h.keys:
            if k > c.N2:
                continue
            A, dA = h((k, j), yy), h((k, j), yy, 1)
            w = s ** (nu * (k + 0.5))
            acc += w * L**j * A
            accs += w * (nu * (k + 0.5) / s * L**j * A - yy / (2 * s) * L**j * dA
                         - ((0.5 + nu) / s * j * L ** (j - 1) * A if j else 0))
        V["S"][mS] = P * acc - uW[mS]
        Us["S"][mS] = P * (acc * (1j * a0 - 0.25) / s + accs)

    mR = thS < 1
    if np.any(mR):
        uR, utR = assemble_remote(ap.remote, s, r[mR], with_dt=True)
        V["R"][mR] = uR - uW[mR]
        Us["R"][mR] = -utR

    v = thI * V["I"] + (1 - thI) * thS * V["S"] + (1 - thS) * V["R"]
    # d_s of the blend; the u_W term vanishes when the two transitions are disjoint
    us = (dthI * (V["I"] - thS * V["S"]) + thI * Us["I"]
          + (1 - thI) * (dthS * V["S"] + thS * Us["S"])
          - dthS * V["R"] + (1 - thS) * Us["R"]
          + uW * (dthI * (1 - thS) - thI * dthS))
    return dict(v=v, uW=uW, us=us, thI=thI, thS=thS, pre=pre)


def assemble_u_app(ap: ApproxSolution, s: float, y_max: float | None = None,
                   pieces: str = "glued", ghost: int = 4, gauge: bool = True) -> Field:
    """u_app and d_s u_app (fixed r) on the staggered y grid up to y_max.

    pieces = "glued" (default) or "interior" (interior piece alone, no cutoffs).
    gauge=False omits the constant phase e^{i phase}; norms are computed that way.
    """
    c = ap.config
    if not 0 < s <= c.T:
        raise ValueError("t outside [0, T)")
    y_max = c.r_obs / np.sqrt(s) * 1.05 if y_max is None else y_max
    y, dx, d2x = y_grid(c, s, y_max, ghost)
    ya = np.abs(y)
    pc = _pieces(ap, s, ya, pieces)
    v, uW = pc["v"], pc["uW"]
    vy, vyy = _dy(v, dx, d2x)
    lap_v = (vyy + 2 * vy / y) / s
    u = uW + v
    nW = np.abs(uW) ** 4 * uW
    nl = np.abs(u) ** 4 * u - nW
    ur = (vy + pc["pre"] * _dW_dy(s, c.nu, ya) * np.sign(y)) / np.sqrt(s)
    g = np.exp(1j * c.phase) if gauge else 1.0
    cut = slice(ghost, None)
    return Field(s, y[cut], np.sqrt(s) * ya[cut], dx[cut], g * u[cut], g * pc["us"][cut],
                 g * (lap_v - nW)[cut], g * ur[cut], pc["thI"][cut], pc["thS"][cut], ghost,
                 g * nl[cut], g * lap_v[cut], g * v[cut])


def _dW_dy(s, nu, y):
    R = s**-nu * y
    return -R / 3 * (1 + R**2 / 3) ** -1.5 * s**-nu


def _radial_l2(f, r, dxdy, s, mask, weight=None):
    """sqrt(int |f|^2 r^2 dr) on the masked contiguous range (uniform unit step in x)."""
    idx = np.nonzero(mask)[0]
    if len(idx) < 3:
        return 0.0
    sl = slice(idx[0], idx[-1] + 1)
    w = 1.0 if weight is None else weight[sl]
    drdx = np.sqrt(s) / dxdy[sl]
    return float(np.sqrt(simpson(np.abs(f[sl]) ** 2 * w * r[sl] ** 2 * drdx, dx=1.0)))


@dataclass
class ErrorReport:
    s: float
    norms: dict
    fits: dict = field(default_factory=dict)


def pde_error(fld: Field):
    return -1j * fld.us + fld.lap_v + fld.nl


def compute_pde_error(ap: ApproxSolution, s: float, pieces: str = "glued",
                      refine: int = 1) -> ErrorReport:
    """e^N = i d_t u + Delta u + |u|^4 u with weighted, H^2 and region-restricted norms.

    The window is r <= r_obs; the last stencil half-width is dropped.  If the result
    changes by more than 1% under one grid refinement the computation is retried on the
    finer grid and, failing that, raises StencilError.
    """
    c = ap.config
    rep = _error_norms(ap, s)
    for _ in range(refine):
        fine = ApproxSolution(replace(c, grid_a=c.grid_a / 2, grid_h=c.grid_h / 2),
                              ap.interior, ap.selfsim, ap.remote)
        rep2 = _error_norms(fine, s)
        a, b = rep.norms["weighted_L2"], rep2.norms["weighted_L2"]
        if abs(a - b) <= 0.01 * max(abs(b), 1e-300):
            return rep2
        c = fine.config
        ap, rep = fine, rep2
    raise StencilError(f"PDE error not resolved at s={s:g}")


def _error_norms(ap: ApproxSolution, s: float) -> ErrorReport:
    c = ap.config
    fld = assemble_u_app(ap, s, gauge=False)
    e = pde_error(fld)
    win = fld.r <= c.r_obs
    win[-8:] = False
    lap_e = _lap_of(ap, s, e, fld)
    x2 = 1 + fld.r**2
    reg_I = win & (fld.th_I >= 1)
    reg_S = win & (fld.th_I <= 0) & (fld.th_S >= 1)
    reg_R = win & (fld.th_S <= 0)
    grad = fld.ur
    norms = dict(
        weighted_L2=_radial_l2(e, fld.r, fld.dxdy, s, win, x2),
        L2=_radial_l2(e, fld.r, fld.dxdy, s, win),
        H2=_radial_l2(lap_e, fld.r, fld.dxdy, s, win),
        L2_interior=_radial_l2(e, fld.r, fld.dxdy, s, reg_I),
        L2_selfsimilar=_radial_l2(e, fld.r, fld.dxdy, s, reg_S),
        L2_remote=_radial_l2(e, fld.r, fld.dxdy, s, reg_R),
        H1_u=_radial_l2(grad, fld.r, fld.dxdy, s, win),
    )
    return ErrorReport(s, norms)


def _lap_of(ap, s, f, fld):
    """Delta_r f for a field given on the ghost-free grid (even extension at y = 0)."""
    g = fld.ghost
    c = ap.config
    y, dx, d2x = y_grid(c, s, c.r_obs / np.sqrt(s) * 1.05, g)
    fe = np.concatenate([f[g - 1::-1], f])
    fy, fyy = _dy(fe, dx, d2x)
    return ((fyy + 2 * fy / y) / s)[g:]


def fit_rows(s_values, reports, keys=None):
    """Fitted s-exponent, rms residual and sample count of every norm in the reports."""
    keys = keys or list(reports[0].norms)
    out = {}
    for k in keys:
        v = np.array([r.norms[k] for r in reports])
        if len(v) < 4 or np.any(v <= 0) or not np.all(np.isfinite(v)):
            out[k] = dict(slope=float("nan"), resid=float("nan"), n=len(v))
            continue
        sl, res = fit_exponent(s_values, v)
        out[k] = dict(slope=sl, resid=res, n=len(v))
    return out


def error_scaling(ap: ApproxSolution, s_values, refine: int = 1):
    reps = [compute_pde_error(ap, s, refine=refine) for s in s_values]
    return reps, fit_rows(list(s_values), reps)


# ---------------------------------------------------------------------------
# zeta^N = u~_app - W in the interior variables R = lambda r


def zeta_norms(ap: ApproxSolution, s: float) -> dict:
    c = ap.config
    fld = assemble_u_app(ap, s, gauge=False)
    lam = ap.lam(s)
    R = lam * fld.r
    z = np.exp(-1j * c.alpha0 * np.log(s)) * lam**-0.5 * fld.v
    g = fld.ghost
    y, dx, d2x = y_grid(c, s, c.r_obs / np.sqrt(s) * 1.05, g)
    ze = np.concatenate([z[g - 1::-1], z])
    zy, zyy = _dy(ze, dx, d2x)
    zR, zRR = (s**c.nu * zy)[g:], (s ** (2 * c.nu) * zyy)[g:]
    win = fld.r <= c.r_obs
    win[-8:] = False
    dRdx = s**-c.nu / fld.dxdy

    def l2(f):
        idx = np.nonzero(win)[0]
        sl = slice(idx[0], idx[-1] + 1)
        return float(np.sqrt(simpson(np.abs(f[sl]) ** 2 * R[sl] ** 2 * dRdx[sl], dx=1.0)))

    return {
        "Linf": float(np.max(np.abs(z[win]))),
        "RdR_Linf": float(np.max(np.abs(R * zR)[win])),
        "L2_k0l0": l2(z),
        "L2_k1l0": l2(zR),
        "L2_k0l1": l2(z / R),
        "L2_k2l0": l2(zRR),
        "L2_k1l1": l2(zR / R),
        "L2_k0l2": l2(z / R**2),
    }


ZETA_TARGETS = {"Linf": "a", "RdR_Linf": "a", "L2_k0l0": "a", "L2_k1l0": "a", "L2_k0l1": "a",
                "L2_k2l0": "b", "L2_k1l1": "b", "L2_k0l2": "b"}


def verify_zeta_estimates(ap: ApproxSolution, s_values, tol: float = 0.15,
                          resid_max: float = 0.1):
    """Rows: norm, fitted slope, target (nu/2 + 1/4 or nu), residual, pass flag."""
    c = ap.config
    vals = [zeta_norms(ap, s) for s in s_values]
    target = {"a": c.nu / 2 + 0.25, "b": c.nu}
    rows = []
    for k, kind in ZETA_TARGETS.items():
        v = np.array([d[k] for d in vals])
        row = dict(norm=k, target=target[kind], values=v.tolist(), n=len(v))
        if np.all(v == 0):
            row.update(slope=float("nan"), resid=0.0, ok=False, flagged=False, zero=True)
        else:
            sl, res = fit_exponent(list(s_values), v)
            row.update(slope=sl, resid=res, zero=False, flagged=res > resid_max,
                       ok=abs(sl - target[kind]) <= tol * target[kind])
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# structural checks


def seam_jumps(ap: ApproxSolution, s: float, npts: int = 8, rel_h: float = 5e-3) -> dict:
    """Relative mismatch of u, u_y, u_yy extrapolated to each cutoff edge from either side.

    u_app is evaluated pointwise on uniform points y_e -+ k h, k = 1..npts, h = rel_h l with
    l = min(y_e, 2 / y_e) the local length (cutoff width or far-field wavelength), and
    one-sided Fornberg weights give the three jets at y_e, compared on the scale |u| l^-m.
    """
    c = ap.config
    edges = {"I_inner": s**c.e1, "I_outer": 2 * s**c.e1,
             "S_inner": s**-c.eps2, "S_outer": 2 * s**-c.eps2}
    out = {}
    k = np.arange(1, npts + 1)
    for name, ye in edges.items():
        ell = min(ye, 2 / ye)
        h = rel_h * ell
        yl, yr = ye - k * h, ye + k * h
        pc = _pieces(ap, s, np.concatenate([yl, yr]))
        u = pc["uW"] + pc["v"]
        ul, urt = u[:npts], u[npts:]
        scale = np.max(np.abs(u))
        worst = 0.0
        for m in range(3):
            dl = fornberg_weights(ye, yl, m)[m] @ ul
            dr = fornberg_weights(ye, yr, m)[m] @ urt
            worst = max(worst, abs(dl - dr) / (scale * ell**-m))
        out[name] = float(worst)
    return out


def center_value(ap: ApproxSolution, s: float) -> complex:
    C, _, _ = ap.interior_corrections(s, np.zeros(1))
    return complex(np.exp(1j * ap.alpha(s)) * ap.lam(s) ** 0.5 * (W(np.zeros(1))[0] + C[0]))


def interior_window_norm(ap: ApproxSolution, s: float) -> float:
    """|| Theta(R/Rm) E ||_{L2(R^2 dR)} of the interior piece alone, E = e^{-i alpha}
    lambda^{-5/2} e^N(r = R / lambda), computed with stencils on the glue grid."""
    c = ap.config
    Rm = interior_radius(s, c.nu, c.e1)
    y_max = 2.2 * Rm * s**c.nu
    fld = assemble_u_app(ap, s, y_max=y_max, pieces="interior", gauge=False)
    lam = ap.lam(s)
    E = np.exp(-1j * c.alpha0 * np.log(s)) * lam**-2.5 * pde_error(fld)
    R = lam * fld.r
    wgt = smooth_cutoff(R / Rm) ** 2
    mask = R <= 2 * Rm
    return _radial_l2(E, fld.r, fld.dxdy, s, mask, wgt) * lam**1.5


def ladder(build, configs, s_values, refine: int = 1):
    """Fitted weighted-L2 exponent per truncation triple; build(cfg) -> ApproxSolution."""
    rows = []
    for cfg in configs:
        ap = build(cfg)
        reps, fits = error_scaling(ap, s_values, refine)
        f = fits["weighted_L2"]
        rows.append(dict(N=(cfg.N1, cfg.N2, cfg.N3), slope=f["slope"], resid=f["resid"],
                         n=f["n"], values=[r.norms["weighted_L2"] for r in reps]))
    slopes = [r["slope"] for r in rows]
    increasing = all(b > a for a, b in zip(slopes, slopes[1:]))
    return rows, increasing
