"""Interior region: corrections W + sum_l b^l chi_l(R), b = (T-t)^{2 nu}.

In the variables u = e^{i alpha0 log(T-t)} lam^{1/2} u~(t, lam x), lam = (T-t)^{-1/2-nu},
the equation i u_t + Delta u + |u|^4 u = 0 reads E(u~) = 0 with

    E(u~) = i (T-t)^{1+2nu} d_t u~ + Delta u~ + |u~|^4 u~
            + alpha0 b u~ + i b (1/2 + nu)(1/2 + R d_R) u~.

Linearising at W splits into L+ = -Delta - 5W^4 (real part) and L- = -Delta - W^4
(imaginary part), with kernels W1 and W respectively.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core_profiles import (RadialGrid, W, W1, dW, dW1, smooth_cutoff,
                            WeightedNormSpec, weighted_norm)


class PreconditionError(ValueError):
    pass


class GradeOverflow(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# fundamental solutions


def theta_minus(R):
    """Second solution of L- (decays like 1/R at 0, tends to -2/sqrt(3))."""
    R = np.asarray(R, dtype=float)
    return -2.0 * W(R) * (R / 3.0 - 1.0 / R)


def dtheta_minus(R):
    R = np.asarray(R, dtype=float)
    return -2.0 * (dW(R) * (R / 3.0 - 1.0 / R) + W(R) * (1.0 / 3.0 + 1.0 / R**2))


def theta_plus(R):
    """Second solution of L+: W^3 (4R^4/9 - 8R^2 + 4)/R."""
    R = np.asarray(R, dtype=float)
    return W(R) ** 3 * (4 * R**4 / 9 - 8 * R**2 + 4) / R


def dtheta_plus(R):
    R = np.asarray(R, dtype=float)
    w = W(R)
    P = 4 * R**4 / 9 - 8 * R**2 + 4
    dP = 16 * R**3 / 9 - 16 * R
    return 3 * w**2 * dW(R) * P / R + w**3 * (dP / R - P / R**2)


def reduction_primitive(R, sign: str):
    """Q with Theta = Phi * Q and Q' = -2 / (R^2 Phi^2).

    For L+ the integrand has a double pole at R = sqrt(3) (zero of W1), so the
    primitive is taken in closed partial-fraction form 6P/(R(3 - R^2)).
    """
    R = np.asarray(R, dtype=float)
    if sign == "-":
        return 2.0 / R - 2.0 * R / 3.0
    P = 4 * R**4 / 9 - 8 * R**2 + 4
    return 6.0 * P / (R * (3.0 - R**2))


@dataclass
class FundamentalSolutions:
    R: np.ndarray
    Phi: dict
    dPhi: dict
    Theta: dict
    dTheta: dict

    def wronskian_R2(self, sign):
        """R^2 (Phi Theta' - Phi' Theta), equal to -2."""
        R = self.R
        return R**2 * (self.Phi[sign] * self.dTheta[sign] - self.dPhi[sign] * self.Theta[sign])


def fundamental_solutions_interior(grid: RadialGrid) -> FundamentalSolutions:
    """Phi- = W, Phi+ = W1, Theta-, Theta+ on the grid (Theta set to 0 at R = 0,
    where it is never used because the Green integrand carries s^2)."""
    R = grid.R
    pos = R > 0
    th = {"+": np.zeros_like(R), "-": np.zeros_like(R)}
    dth = {"+": np.zeros_like(R), "-": np.zeros_like(R)}
    th["+"][pos], th["-"][pos] = theta_plus(R[pos]), theta_minus(R[pos])
    dth["+"][pos], dth["-"][pos] = dtheta_plus(R[pos]), dtheta_minus(R[pos])
    return FundamentalSolutions(
        R=R,
        Phi={"+": W1(R), "-": W(R)},
        dPhi={"+": dW1(R), "-": dW(R)},
        Theta=th, dTheta=dth)


def potential(R, sign):
    return (5.0 if sign == "+" else 1.0) * W(R) ** 4


def apply_L(grid: RadialGrid, sign: str, v: np.ndarray) -> np.ndarray:
    """L+- v with grid stencils (used for residuals only)."""
    return -grid.laplacian(v) - potential(grid.R, sign) * v


# ---------------------------------------------------------------------------
# Green operator


def _check_source(grid, f):
    f = np.asarray(f)
    if not np.all(np.isfinite(f)):
        raise PreconditionError("source must be finite")
    R = grid.R
    i = np.nonzero(R > 0)[0][:4]
    a, b = np.abs(f[i[0]]), np.abs(f[i[-1]])
    if a > 0 and b > 0:
        p = np.log(b / a) / np.log(R[i[-1]] / R[i[0]])
        if p <= -2.0 + 1e-6:
            raise PreconditionError("source not integrable against s^2 Theta near 0")


def apply_green(grid: RadialGrid, sign: str, f: np.ndarray, fs=None, with_derivative=False):
    """v = 1/2 int_0^R s^2 [Theta(R) Phi(s) - Theta(s) Phi(R)] f(s) ds, so L v = f,
    v(0) = v'(0) = 0. Works for real or complex f (componentwise)."""
    _check_source(grid, f)
    fs = fs or fundamental_solutions_interior(grid)
    R = grid.R
    Phi, Th = fs.Phi[sign], fs.Theta[sign]
    IPhi = grid.cumint(R**2 * Phi * f)
    ITh = grid.cumint(R**2 * Th * f)
    v = 0.5 * (Th * IPhi - Phi * ITh)
    dv = 0.5 * (fs.dTheta[sign] * IPhi - fs.dPhi[sign] * ITh)
    v[R == 0] = 0.0
    dv[R == 0] = 0.0
    return (v, dv) if with_derivative else v


def green_residual(grid: RadialGrid, sign: str, v, f, frac=0.5) -> float:
    m = (grid.R <= frac * grid.r_max) & (grid.R > 0)
    return float(np.max(np.abs(apply_L(grid, sign, v) - f)[m]))


# ---------------------------------------------------------------------------
# graded expansions


@dataclass
class GradedRadialExpansion:
    """sum_l b^l chi_l(R); dterms hold d_R chi_l, lap holds Delta chi_l."""

    grid: RadialGrid
    nu: float
    alpha0: float
    terms: dict = field(default_factory=dict)
    dterms: dict = field(default_factory=dict)
    lap: dict = field(default_factory=dict)

    def grades(self):
        return sorted(self.terms)

    def check(self):
        g = self.grades()
        if g and g != list(range(g[0], g[-1] + 1)):
            raise ValueError("grades must be contiguous")
        for l in g:
            if not np.all(np.isfinite(self.terms[l])):
                raise ValueError(f"grade {l} not finite")

    def evaluate(self, s: float, deriv: bool = False):
        b = s ** (2 * self.nu)
        src = self.dterms if deriv else self.terms
        out = np.zeros(self.grid.n, dtype=complex)
        for l in self.grades():
            out += b**l * src[l]
        return out


@dataclass
class InteriorState:
    k: int
    eta_star: GradedRadialExpansion
    error: dict  # grade -> complex grid function
    fits: list = field(default_factory=list)
    grade_cap: int = 8
    dropped: dict = field(default_factory=dict)  # round-off left in solved grades

    @property
    def error_grades(self):
        return sorted(self.error)


def _mul(a: dict, b: dict, cap: int) -> dict:
    out = {}
    for i, x in a.items():
        for j, y in b.items():
            if i + j <= cap:
                out[i + j] = out.get(i + j, 0) + x * y
    return out


def interior_error(eta: GradedRadialExpansion, cap: int) -> dict:
    """All grades 1..cap of E(W + eta), time derivative taken exactly on b^l."""
    R = eta.grid.R
    nu, a0 = eta.nu, eta.alpha0
    w = W(R).astype(complex)
    u = {0: w}
    du = {0: dW(R).astype(complex)}
    for l in eta.grades():
        u[l], du[l] = eta.terms[l], eta.dterms[l]
    ub = {l: np.conj(x) for l, x in u.items()}
    u2 = _mul(u, u, cap)
    nl = _mul(_mul(u2, u, cap), _mul(ub, ub, cap), cap)
    E = {}
    for l in range(1, cap + 1):
        e = nl.get(l, 0) + eta.lap.get(l, 0)
        if l - 1 in u:
            p = u[l - 1]
            e = e + a0 * p + 1j * (0.5 + nu) * (0.5 * p + R * du[l - 1])
            e = e - 2j * nu * (l - 1) * p
        E[l] = np.asarray(e, dtype=complex) * np.ones(len(R))
    return E


def _solve_grade(grid, fs, src):
    """chi with L+ Re chi = Re src, L- Im chi = Im src; returns chi, chi', Delta chi."""
    vr, dvr = apply_green(grid, "+", src.real, fs, with_derivative=True)
    vi, dvi = apply_green(grid, "-", src.imag, fs, with_derivative=True)
    chi = vr + 1j * vi
    lap = -potential(grid.R, "+") * vr - src.real + 1j * (-potential(grid.R, "-") * vi - src.imag)
    return chi, dvr + 1j * dvi, lap


def initial_state(grid: RadialGrid, nu: float, alpha0: float, grade_cap: int = 8) -> InteriorState:
    eta = GradedRadialExpansion(grid, nu, alpha0)
    return InteriorState(0, eta, interior_error(eta, 1), grade_cap=grade_cap)


def iterate_correction(state: InteriorState, fs=None) -> InteriorState:
    """One step: solve L_W eta_{k+1} = -e_k^0 grade-wise and rebuild the error."""
    k = state.k
    if k + 1 > state.grade_cap:
        raise GradeOverflow("grade cap reached")
    eta = state.eta_star
    grid = eta.grid
    fs = fs or fundamental_solutions_interior(grid)
    src = state.error[k + 1]
    chi, dchi, lap = _solve_grade(grid, fs, src)
    new = replace(eta, terms=dict(eta.terms), dterms=dict(eta.dterms), lap=dict(eta.lap))
    new.terms[k + 1], new.dterms[k + 1], new.lap[k + 1] = chi, dchi, lap
    top = min(5 * (k + 1), state.grade_cap)
    E = interior_error(new, top)
    dropped = {l: float(np.max(np.abs(E[l]))) for l in E if l <= k + 1}
    err = {l: E[l] for l in E if l > k + 1}
    return InteriorState(k + 1, new, err, list(state.fits), state.grade_cap, dropped)


def first_correction(grid: RadialGrid, alpha0: float, nu: float, fs=None) -> GradedRadialExpansion:
    """chi_1 with L+ Re chi_1 = alpha0 W and L- Im chi_1 = (1/2 + nu) W1."""
    st = iterate_correction(initial_state(grid, nu, alpha0), fs)
    return st.eta_star


def run_interior(grid: RadialGrid, nu: float, alpha0: float, k_max: int = 4,
                 grade_cap: int = 8) -> list:
    fs = fundamental_solutions_interior(grid)
    st = initial_state(grid, nu, alpha0, grade_cap)
    out = [st]
    for _ in range(k_max):
        st = iterate_correction(st, fs)
        out.append(st)
    return out


# ---------------------------------------------------------------------------
# error norms in the interior region R <= (T-t)^{eps1 - nu}


def error_profile(state: InteriorState, s: float) -> np.ndarray:
    b = s ** (2 * state.eta_star.nu)
    out = np.zeros(state.eta_star.grid.n, dtype=complex)
    for l, e in state.error.items():
        out += b**l * e
    return out


def interior_radius(s, nu, eps1):
    return s ** (eps1 - nu)


def pointwise_weighted_error(state: InteriorState, s: float, eps1: float) -> float:
    """max over R <= (T-t)^{eps1-nu} of |e_k| / <R>^{2k-1}."""
    grid = state.eta_star.grid
    R = grid.R
    Rm = interior_radius(s, state.eta_star.nu, eps1)
    if Rm > R[-1]:
        raise ValueError("interior region exceeds the grid")
    e = error_profile(state, s)
    m = R <= Rm
    return float(np.max(np.abs(e[m]) / np.sqrt(1 + R[m] ** 2) ** (2 * state.k - 1)))


def l2_error(state: InteriorState, s: float, eps1: float) -> float:
    """|| chi_In e_k ||_{L2(R^2 dR)} with chi_In = Theta((T-t)^{nu-eps1} R)."""
    grid = state.eta_star.grid
    Rm = interior_radius(s, state.eta_star.nu, eps1)
    if 2 * Rm > grid.R[-1]:
        raise ValueError("interior cutoff exceeds the grid")
    e = error_profile(state, s) * smooth_cutoff(grid.R / Rm)
    return weighted_norm(grid, e, WeightedNormSpec(0, 0, "L2_radial"), df=e)


def fit_exponent(s, vals):
    """Least-squares slope of log vals against log s, with rms residual."""
    ls, lv = np.log(np.asarray(s)), np.log(np.asarray(vals))
    A = np.vstack([ls, np.ones_like(ls)]).T
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    res = lv - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def scaling_table(states, ks, s_values, eps1):
    rows = []
    for k in ks:
        st = states[k]
        pw = [pointwise_weighted_error(st, s, eps1) for s in s_values]
        l2 = [l2_error(st, s, eps1) for s in s_values]
        nu = st.eta_star.nu
        sp, rp = fit_exponent(s_values, pw)
        sl, rl = fit_exponent(s_values, l2)
        rows.append(dict(k=k, pointwise_slope=sp, pointwise_target=2 * nu * (k + 1),
                         pointwise_resid=rp, l2_slope=sl,
                         l2_target=1.5 * nu + 2 * eps1 * k, l2_resid=rl,
                         n_samples=len(s_values)))
    return rows


# ---------------------------------------------------------------------------
# far-field fits


@dataclass
class FarFieldFit:
    window: tuple
    keys: list          # (r, j) pairs
    exponents: list     # power of R for each key
    coeffs: np.ndarray
    cond: float
    residual: float
    usable: bool


def far_field_fit(grid: RadialGrid, f: np.ndarray, l: int, r_max: int = 4, j_max: int = 1,
                  window=None, n_samples: int = 200, cond_limit: float = 1e8) -> FarFieldFit:
    """Least squares of f against R^{2l-1-r-j} log^j R, 0 <= j <= min(r, j_max)."""
    R = grid.R
    lo, hi = window or (0.2 * grid.r_max, 0.8 * grid.r_max)
    idx = np.nonzero((R >= lo) & (R <= hi))[0]
    idx = idx[np.unique(np.linspace(0, len(idx) - 1, min(n_samples, len(idx))).astype(int))]
    x = R[idx]
    keys, ex, cols = [], [], []
    for r in range(r_max + 1):
        for j in range(min(r, j_max) + 1):
            p = 2 * l - 1 - r - j
            keys.append((r, j))
            ex.append(p)
            cols.append(x**p * np.log(x) ** j)
    A = np.array(cols).T
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    y = np.asarray(f)[idx]
    sol, *_ = np.linalg.lstsq(As, y, rcond=None)
    coeffs = sol / scale
    cond = float(np.linalg.cond(As))
    resid = float(np.linalg.norm(As @ sol - y) / max(np.linalg.norm(y), 1e-300))
    return FarFieldFit((lo, hi), keys, ex, coeffs, cond, resid, cond < cond_limit)


def extract_matching_coefficients(state: InteriorState, n_max: int = 3, j_max: int = 1,
                                  window=None) -> dict:
    """c^{(l)}_{r,j} for l = 0..k; the l = 0 row is the expansion of W itself."""
    grid = state.eta_star.grid
    table = {}
    rows = [(0, W(grid.R).astype(complex))]
    rows += [(l, state.eta_star.terms[l]) for l in state.eta_star.grades()]
    for l, f in rows:
        fit = far_field_fit(grid, f, l, r_max=n_max, j_max=j_max, window=window)
        for key, c in zip(fit.keys, fit.coeffs):
            table[(l,) + key] = dict(value=complex(c), usable=fit.usable,
                                     cond=fit.cond, residual=fit.residual)
        state.fits.append(fit)
    return table


def chi1_linear_coefficient(nu, alpha0):
    """Closed-form large-R slope of chi_1: -sqrt3 alpha0/2 + i sqrt3 (1/2+nu)/4."""
    return -np.sqrt(3) * alpha0 / 2 + 1j * np.sqrt(3) * (0.5 + nu) / 4
