"""The heat semigroup e^{tΔ} and its t-derivatives on grids (Fourier multiplier) and on analytic
fields (Gauss-Weierstrass convolution)."""
import itertools
import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from scipy import special

from .errors import DomainError, TailBoundError, require
from .fields import GridField, as_points
from .numerics import panel_nodes, uniform_edges

logger = logging.getLogger(__name__)

TAIL_LOG = math.log(1e14)
PANEL_BUDGET = {1: 4000, 2: 120, 3: 32}


class HeatEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    k: int = 0
    route: Literal["kernel_convolution", "spectral_multiplier"] = "spectral_multiplier"

    @model_validator(mode="after")
    def admissible_time(self):
        if self.k < 0:
            raise ValueError("Validation: derivative order must be >= 0")
        if self.t < 0 or (self.k >= 1 and self.t == 0):
            raise ValueError("Validation: t must be > 0 (t = 0 allowed only for k = 0)")
        return self

    @classmethod
    def checked(cls, t, k, route):
        try:
            return cls(t=float(t), k=int(k), route=route)
        except ValidationError as err:
            raise DomainError(str(err.errors()[0]["msg"])) from err


def gauss_weierstrass(x, t, n=None):
    """(4πt)^{-n/2} e^{-|x|²/(4t)} for points x of shape (..., n)"""
    require(t > 0, "Validation: t must be positive")
    if n is None:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1] if x.ndim else 1
    x = as_points(x, n)
    return (4 * math.pi * t) ** (-n / 2) * np.exp(-np.sum(x * x, axis=-1) / (4 * t))


def _even_derivative_1d(z, t, m):
    """∂_z^{2m} of the 1-D kernel, through the physicists' Hermite polynomial H_{2m}"""
    g = np.exp(-(z * z) / (4 * t)) / math.sqrt(4 * math.pi * t)
    if m == 0:
        return g
    return g * (4 * t) ** (-m) * special.eval_hermite(2 * m, z / (2 * math.sqrt(t)))


def kernel_time_derivative(z, t, k):
    """∂_t^k G_t(z) = Δ^k G_t(z), expanded over multi-indices of the product kernel"""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    total = np.zeros(z.shape[:-1])
    for beta in itertools.product(range(k + 1), repeat=n):
        if sum(beta) != k:
            continue
        coefficient = math.factorial(k) / math.prod(math.factorial(b) for b in beta)
        term = np.full(z.shape[:-1], coefficient)
        for axis, m in enumerate(beta):
            term = term * _even_derivative_1d(z[..., axis], t, m)
        total += term
    return total


def heat_multiplier(g, t, k=0):
    xi2 = g.xi_squared()
    return (-xi2) ** k * np.exp(-t * xi2)


def heat_apply(u: GridField, t, k=0):
    """∂_t^k e^{tΔ}u on the periodic grid"""
    HeatEvaluation.checked(t, k, "spectral_multiplier")
    if k == 0 and t == 0:
        return u
    return u.apply_multiplier(heat_multiplier(u, t, k), source=f"heat({u.source}, t={t:g}, k={k})")


def cutoff_radius(t, k=0):
    """Distance beyond which the (derivative) kernel carries less than 1e-14 of its mass"""
    return math.sqrt(4 * t * (TAIL_LOG + 4 * k))


def _panel_width(u, t):
    return 0.5 * min(math.sqrt(t), u.scale)


def _mode_sum(u, x, t, k):
    total = 0.0
    for amplitude, wavevector in u.modes:
        kv = np.array(wavevector)
        k2 = float(kv @ kv)
        total += amplitude * (-k2) ** k * math.exp(-t * k2) * math.cos(float(kv @ x))
    return total


def _radial_weights(n, rho, r, t):
    """Angular integral of G_t(x − z) over the sphere |z| = r, times r^{n-1}"""
    if n == 1:
        return (np.exp(-((rho - r) ** 2) / (4 * t)) + np.exp(-((rho + r) ** 2) / (4 * t))) / math.sqrt(
            4 * math.pi * t
        )
    gaussian = np.exp(-((rho - r) ** 2) / (4 * t))
    if n == 2:
        return gaussian * special.i0e(rho * r / (2 * t)) * r / (2 * t)
    b = rho * r / t
    safe = np.where(b > 1e-12, b, 1.0)
    phi = np.where(b > 1e-12, -np.expm1(-safe) / safe, 1.0)
    return (4 * math.pi * t) ** (-1.5) * 4 * math.pi * gaussian * phi * r * r


def _clip(lo, hi, extent):
    if math.isfinite(extent):
        return max(lo, -extent), min(hi, extent)
    return lo, hi


def _edges(lo, hi, width, budget):
    if hi <= lo:
        return None
    if (hi - lo) / width > budget:
        return False
    return uniform_edges(lo, hi, width)


def _radial_convolution(u, x, t, difference):
    rho = float(np.linalg.norm(x))
    ux = float(u.eval(x)) if difference else 0.0
    reach = cutoff_radius(t)
    width = _panel_width(u, t)
    budget = PANEL_BUDGET[1]
    lo, hi = max(0.0, rho - reach), rho + reach
    edges = _edges(lo, hi, width, budget) if difference else False
    shift = ux
    if edges is False:
        shift = 0.0
        lo, hi = _clip(lo, hi, u.extent)
        edges = _edges(max(lo, 0.0), hi, width, budget)
        if edges is False:
            raise TailBoundError(f"Heat convolution of {u.name} at t={t:g} exceeds the panel budget")
    if edges is None:
        return -ux if difference else 0.0
    r, w = panel_nodes(edges)
    value = float(np.sum(w * _radial_weights(u.n, rho, r, t) * (u.profile(r) - shift)))
    return value - (ux - shift)


def _tensor_convolution(u, x, t, k, difference):
    n = u.n
    ux = float(u.eval(x)) if difference else 0.0
    reach = cutoff_radius(t, k)
    width = _panel_width(u, t)
    budget = PANEL_BUDGET[n]
    axes = [_edges(xi - reach, xi + reach, width, budget) for xi in x] if difference else [False]
    shift = ux
    if any(e is False for e in axes):
        shift = 0.0
        axes = [_edges(*_clip(xi - reach, xi + reach, u.extent), width, budget) for xi in x]
        if any(e is False for e in axes):
            raise TailBoundError(f"Heat convolution of {u.name} at t={t:g} exceeds the panel budget")
    if any(e is None for e in axes):
        return -ux if difference else 0.0
    nodes = [panel_nodes(e) for e in axes]
    mesh = np.meshgrid(*[z for z, _ in nodes], indexing="ij")
    weights = math.prod(np.meshgrid(*[w for _, w in nodes], indexing="ij"))
    z = np.stack(mesh, axis=-1)
    kernel = kernel_time_derivative(x - z, t, k)
    value = float(np.sum(weights * kernel * (u.eval(z) - shift)))
    return value - (ux - shift) if k == 0 else value


def heat_values(u, x, ts, k=0, difference=False):
    """∂_t^k e^{tΔ}u(x) for every t in ts; difference=True returns e^{tΔ}u(x) − u(x) (k = 0)
    computed as ∫G_t(x − z)(u(z) − u(x))dz while the kernel ball is resolvable."""
    x = as_points(x, u.n).reshape(u.n)
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        if u.modes:
            out[i] = _mode_sum(u, x, t, k) - (float(u.eval(x)) if difference and k == 0 else 0.0)
        elif u.radial and k == 0:
            out[i] = _radial_convolution(u, x, t, difference)
        else:
            out[i] = _tensor_convolution(u, x, t, k, difference and k == 0)
    return out


def heat_apply_analytic(u, x, t, k=0):
    """∂_t^k (G_t ∗ u)(x) by quadrature against the k-th t-derivative of the kernel"""
    HeatEvaluation.checked(t, k, "kernel_convolution")
    require(t > 0, "Validation: analytic heat evaluation requires t > 0")
    if u.decay.kind == "tail_power" and u.decay.power < 0 and not u.modes:
        raise TailBoundError(f"{u.name} grows at infinity; the heat convolution is not bounded")
    return float(heat_values(u, x, [float(t)], k=k)[0])
