"""Ground state W of the 3d energy-critical NLS, radial grids and weighted norms.

W(R) = (1 + R^2/3)^(-1/2) solves  W'' + (2/R) W' + W^5 = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# finite difference / quadrature weights on uniform nodes


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights c[k, j] for the k-th derivative at z from nodes x (Fornberg 1988)."""
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=32)
def _stencils(npts: int, width: int, order: int):
    """Per-node stencil offsets and weights (unit spacing) for derivative `order`."""
    half = width // 2
    offs = np.empty((npts, width), dtype=int)
    wts = np.empty((npts, width))
    for i in range(npts):
        lo = min(max(i - half, 0), npts - width)
        nodes = np.arange(lo, lo + width)
        offs[i] = nodes
        wts[i] = fornberg_weights(0.0, (nodes - i).astype(float), order)[order]
    return offs, wts


def uniform_derivative(f: np.ndarray, h: float, order: int = 1, width: int = 9) -> np.ndarray:
    """Derivative on a uniform grid, central in the bulk, one-sided near the ends."""
    n = len(f)
    width = min(width, n)
    offs, wts = _stencils(n, width, order)
    return np.einsum("ij,ij->i", f[offs], wts) / h**order


@lru_cache(maxsize=8)
def _interval_weights(npts: int, width: int = 6):
    """Weights so that int_{x_i}^{x_{i+1}} f dx ~ sum_j w[i, j] f[offs[i, j]] (unit spacing)."""
    offs = np.empty((npts - 1, width), dtype=int)
    wts = np.empty((npts - 1, width))
    half = width // 2 - 1
    for i in range(npts - 1):
        lo = min(max(i - half, 0), npts - width)
        nodes = np.arange(lo, lo + width, dtype=float) - i
        offs[i] = np.arange(lo, lo + width)
        for j in range(width):
            others = np.delete(nodes, j)
            poly = np.poly1d(others, r=True) / np.prod(nodes[j] - others)
            ip = np.polyint(poly)
            wts[i, j] = ip(1.0) - ip(0.0)
    return offs, wts


def cumulative_integral(f: np.ndarray, h: float) -> np.ndarray:
    """F[i] = int_{x_0}^{x_i} f dx on a uniform grid, sixth order accurate."""
    n = len(f)
    if n < 6:
        raise ValueError("need at least 6 nodes")
    offs, wts = _interval_weights(n)
    pieces = np.einsum("ij,ij->i", f[offs], wts) * h
    out = np.zeros(n, dtype=np.result_type(f, float))
    out[1:] = np.cumsum(pieces)
    return out


# ---------------------------------------------------------------------------
# radial grid


@dataclass
class RadialGrid:
    """Radial nodes R(x) on a uniform computational variable x.

    hybrid : R = c sinh(x)   (uniform near 0, geometric far out), includes R=0
    log    : R = R_min e^x
    uniform: R = x
    """

    kind: str = "hybrid"
    n: int = 2048
    r_max: float = 1000.0
    scale: float = 1.0
    r_min: float = 1e-3
    x: np.ndarray = field(init=False, repr=False)
    R: np.ndarray = field(init=False, repr=False)
    dR: np.ndarray = field(init=False, repr=False)
    d2R: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 64:
            raise DomainError("grid needs at least 64 nodes")
        if not (np.isfinite(self.r_max) and self.r_max > 0):
            raise DomainError("r_max must be positive and finite")
        if self.kind == "hybrid":
            self.x = np.linspace(0.0, np.arcsinh(self.r_max / self.scale), self.n)
            self.R = self.scale * np.sinh(self.x)
            self.dR = self.scale * np.cosh(self.x)
            self.d2R = self.R.copy()
        elif self.kind == "log":
            self.x = np.linspace(0.0, np.log(self.r_max / self.r_min), self.n)
            self.R = self.r_min * np.exp(self.x)
            self.dR = self.R.copy()
            self.d2R = self.R.copy()
        elif self.kind == "uniform":
            self.x = np.linspace(0.0, self.r_max, self.n)
            self.R = self.x.copy()
            self.dR = np.ones(self.n)
            self.d2R = np.zeros(self.n)
        else:
            raise DomainError(f"unknown grid kind {self.kind!r}")
        self.R[-1] = self.r_max

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def deriv(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """d^order f / dR^order, order <= 2, via stencils in x and the chain rule."""
        fx = uniform_derivative(f, self.h, 1)
        fR = fx / self.dR
        if order == 1:
            return fR
        if order == 2:
            fxx = uniform_derivative(f, self.h, 2)
            return (fxx - fR * self.d2R) / self.dR**2
        if order == 0:
            return f
        raise ValueError("order must be 0, 1 or 2")

    def cumint(self, f: np.ndarray) -> np.ndarray:
        """int_0^R f(s) ds at every node."""
        return cumulative_integral(f * self.dR, self.h)

    def integrate(self, f: np.ndarray) -> float:
        return simpson(f * self.dR, x=self.x)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Radial 3d Laplacian; at R=0 uses 3 f''(0)."""
        f1 = self.deriv(f, 1)
        f2 = self.deriv(f, 2)
        out = np.empty_like(f2)
        pos = self.R > 0
        out[pos] = f2[pos] + 2.0 * f1[pos] / self.R[pos]
        out[~pos] = 3.0 * f2[~pos]
        return out


# ---------------------------------------------------------------------------
# ground state


def _check_R(R):
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise DomainError("R must be finite")
    if np.any(R < 0):
        raise DomainError("R must be non-negative")
    return R


def W(R):
    R = _check_R(R)
    return 1.0 / np.sqrt(1.0 + R**2 / 3.0)


def dW(R):
    R = _check_R(R)
    return -(R / 3.0) * W(R) ** 3


def d2W(R):
    R = _check_R(R)
    w = W(R)
    return -(w**3) / 3.0 + (R**2 / 3.0) * w**5


def W1(R):
    """(1/2 + R d/dR) W, the scaling generator; vanishes at R = sqrt(3)."""
    R = _check_R(R)
    return W(R) ** 3 * (3.0 - R**2) / 6.0


def dW1(R):
    R = _check_R(R)
    w = W(R)
    # d/dR [ (3 - R^2)/6 * w^3 ]
    return -R / 3.0 * w**3 + (3.0 - R**2) / 6.0 * 3.0 * w**2 * dW(R)


def d2W1(R):
    R = _check_R(R)
    w = W(R)
    wp = dW(R)
    wpp = d2W(R)
    return (-(w**3) / 3.0 - 2.0 * R * w**2 * wp
            + (3.0 - R**2) / 2.0 * (2.0 * w * wp**2 + w**2 * wpp))


def V1(R):
    """Diagonal potential of the matrix operator; L+ = -Delta + V1 + V2, L- = -Delta + V1 - V2."""
    return -3.0 * W(R) ** 4


def V2(R):
    return -2.0 * W(R) ** 4


@dataclass(frozen=True)
class GroundState:
    """Closed-form evaluators of W and its companions on an array of radii."""

    R: np.ndarray

    @classmethod
    def on(cls, grid: RadialGrid) -> "GroundState":
        return cls(grid.R)

    @property
    def W(self):
        return W(self.R)

    @property
    def dW(self):
        return dW(self.R)

    @property
    def d2W(self):
        return d2W(self.R)

    @property
    def W1(self):
        return W1(self.R)

    @property
    def V1(self):
        return V1(self.R)

    @property
    def V2(self):
        return V2(self.R)


def eval_ground_state(R):
    """Return (W, W', W1, V1, V2) at R; raises DomainError on bad input."""
    R = _check_R(R)
    return W(R), dW(R), W1(R), V1(R), V2(R)


def eval_W1(R):
    return W1(R)


def _radial_lap_closed(f, fp, fpp, R):
    out = np.array(fpp, dtype=float, copy=True)
    # below 1e-8 the limit 3 f''(0) is exact to O(R^2); 2 f'/R loses digits for tiny R
    pos = R > 1e-8
    out[pos] += 2.0 * fp[pos] / R[pos]
    out[~pos] = 3.0 * fpp[~pos]
    return out


def ground_state_residuals(R) -> dict:
    """Max residuals of Delta W + W^5, L- W and L+ W1 from the closed forms."""
    R = _check_R(R)
    w, wp, wpp = W(R), dW(R), d2W(R)
    lapW = _radial_lap_closed(w, wp, wpp, R)
    u, up, upp = W1(R), dW1(R), d2W1(R)
    lapW1 = _radial_lap_closed(u, up, upp, R)
    return {
        "ground_state": float(np.max(np.abs(lapW + w**5))),
        "L_minus_W": float(np.max(np.abs(-lapW - w**4 * w))),
        "L_plus_W1": float(np.max(np.abs(-lapW1 - 5.0 * w**4 * u))),
    }


def stencil_residuals(grid: RadialGrid, frac: float = 0.5) -> dict:
    """Same residuals with derivatives taken by grid stencils (independent route)."""
    R = grid.R
    w = W(R)
    u = W1(R)
    m = R <= frac * grid.r_max
    return {
        "ground_state": float(np.max(np.abs(grid.laplacian(w) + w**5)[m])),
        "L_minus_W": float(np.max(np.abs(-grid.laplacian(w) - w**5)[m])),
        "L_plus_W1": float(np.max(np.abs(-grid.laplacian(u) - 5 * w**4 * u)[m])),
    }


# ---------------------------------------------------------------------------
# weighted norms


@dataclass(frozen=True)
class WeightedNormSpec:
    """|| R^{-j} d^i f ||  in L2(R^2 dR) or L^inf, optionally on a window [a, b]."""

    deriv_order: int = 0
    weight_power: int = 0
    norm_kind: str = "L2_radial"
    window: tuple | None = None

    def __post_init__(self):
        if self.deriv_order not in (0, 1, 2):
            raise ValueError("deriv_order must be 0, 1 or 2")
        if self.norm_kind not in ("L2_radial", "Linf"):
            raise ValueError("norm_kind must be 'L2_radial' or 'Linf'")


def weighted_norm(grid: RadialGrid, f: np.ndarray, spec: WeightedNormSpec,
                  df: np.ndarray | None = None) -> float:
    """Composite Simpson in the grid variable; R=0 excluded when a weight is singular."""
    R = grid.R
    if spec.window is not None:
        a, b = spec.window
        if a > b or a < R[0] or b > R[-1] * (1 + 1e-12):
            raise DomainError("norm window outside the grid")
    if spec.deriv_order > 2:
        raise DomainError("derivative order exceeds stencil support")
    g = df if df is not None else grid.deriv(f, spec.deriv_order)
    mask = np.ones_like(R, dtype=bool)
    if spec.window is not None:
        a, b = spec.window
        mask &= (R >= a) & (R <= b)
    if spec.weight_power > 0:
        mask &= R > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        gw = np.abs(g) * np.where(R > 0, R, 1.0) ** (-spec.weight_power)
    if spec.norm_kind == "Linf":
        return float(np.max(gw[mask])) if np.any(mask) else 0.0
    idx = np.nonzero(mask)[0]
    if len(idx) < 3:
        return 0.0
    sl = slice(idx[0], idx[-1] + 1)
    integrand = gw[sl] ** 2 * R[sl] ** 2 * grid.dR[sl]
    return float(np.sqrt(simpson(integrand, x=grid.x[sl])))


def smooth_cutoff(x):
    """Quintic smoothstep: 1 on [0,1], 0 on [2,inf), C^2 in between."""
    t = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smooth_cutoff_derivs(x):
    """(Theta, Theta', Theta'') of smooth_cutoff."""
    x = np.asarray(x, dtype=float)
    t = np.clip(x - 1.0, 0.0, 1.0)
    inside = (x > 1.0) & (x < 2.0)
    th = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    d1 = np.where(inside, -30.0 * t**2 * (1.0 - t) ** 2, 0.0)
    d2 = np.where(inside, -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)
    return th, d1, d2


def cutoff_jet(x, smoothness: int = 2, nderiv: int = 2):
    """Rows Theta^{(i)}(x), i = 0..nderiv, for the C^smoothness polynomial smoothstep
    cutoff (1 on [0,1], 0 on [2,inf)); smoothness=2 is the quintic one."""
    from math import comb
    K = smoothness
    c = np.zeros(2 * K + 2)
    for n in range(K + 1):
        c[K + 1 + n] = comb(K + n, n) * comb(2 * K + 1, K - n) * (-1) ** n
    S = np.polynomial.Polynomial(c)
    x = np.asarray(x, dtype=float)
    t = np.clip(x - 1.0, 0.0, 1.0)
    inside = (x > 1.0) & (x < 2.0)
    # S(1-t) = 1 - S(t): evaluate near the end it is flat at to avoid cancellation
    hi = t > 0.5
    u = np.where(hi, 1.0 - t, t)
    out = np.empty((nderiv + 1,) + x.shape)
    out[0] = np.where(hi, S(u), 1.0 - S(u))
    for i in range(1, nderiv + 1):
        d = S.deriv(i)(u)
        out[i] = np.where(inside, np.where(hi, (-1) ** i * d, -d), 0.0)
    return out
