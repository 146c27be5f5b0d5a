"""The extension problem: U(x, y) on (x-grid) × (y-nodes) from the semigroup, subordination and
Poisson-kernel formulas, its Dirichlet-to-Neumann limits, the Neumann extension for negative
powers, H^s seminorms and the weighted energy.

Every route is evaluated as a y-dependent Fourier multiplier on the periodic x-grid, over the
distinct values λ = |ξ|² only.
"""
import logging
import math
import struct
import warnings
from collections import namedtuple
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, special

from .errors import ExtrapolationError, FieldFormatError, FracsemWarning, require
from .fields import (
    HEADER,
    MAGIC,
    FORMAT_VERSION,
    RULE_EXTENSION,
    RULE_EXTENSION_NEUMANN,
    GridField,
    export_csv,
    read_header,
    read_values,
    sample,
)
from .numerics import (
    FracOrder,
    QuadratureSpec,
    c_ns,
    cs_neumann,
    cs_quotient,
    gamma,
    graded_edges,
    integrate_mellin,
    lattice_zeta,
    panel_nodes,
    sphere_area,
    sphere_nodes,
    uniform_edges,
)
from .operator import EXP_CUTOFF, frac_apply_spectral
from .utils import atomic_write, thread_map

logger = logging.getLogger(__name__)

Y_MIN = 1e-3
Y_MAX = 20.0
Y_COUNT = 48
TAIL_LOG = -math.log(1e-16)
RICHARDSON_TOLERANCE = 0.1
COARSE_GRID_TOLERANCE = 0.01
RESIDUAL_WINDOW = (0.05, 5.0)
BOX_TOLERANCE = 1e-8

ROUTE_CODES = {"semigroup_dirichlet": 0, "subordination": 1, "semigroup_frac": 2, "poisson_kernel": 3, "neumann": 4}
Y_BLOCK = struct.Struct("<IB3x")

NeumannLimit = namedtuple("NeumannLimit", ["measured", "target", "constant_ratio"])
Contraction = namedtuple("Contraction", ["ok", "sup_excess", "l2_excess"])
Vanishing = namedtuple("Vanishing", ["ratio", "ok"])


class ExtensionRoute(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["semigroup_dirichlet", "subordination", "semigroup_frac", "poisson_kernel"] = (
        "semigroup_dirichlet"
    )


def default_y_nodes():
    return np.geomspace(Y_MIN, Y_MAX, Y_COUNT)


class ExtensionField:
    """U(x, y) on the x-grid of base and positive, strictly increasing y nodes.

    U has shape (len(y),) + base.values.shape; Uy holds y^a ∂_y U on the same nodes.
    kind is "dirichlet" (U(·, 0) = u) or "neumann" (−y^a U_y(·, 0) = f).
    """

    def __init__(self, base, y, U, Uy, s, route, kind="dirichlet", meta=None):
        y = np.array(y, dtype=float)
        require(y.ndim == 1 and len(y) >= 3, "Validation: at least three y nodes are needed")
        require(np.all(y > 0) and np.all(np.diff(y) > 0), "Validation: y nodes must be positive and increasing")
        shape = (len(y),) + base.values.shape
        U = np.array(U, dtype=float)
        Uy = np.array(Uy, dtype=float)
        require(U.shape == shape and Uy.shape == shape, "Validation: U does not match the (y, x) grid")
        for array in (y, U, Uy):
            array.setflags(write=False)
        self.base = base
        self.y = y
        self.U = U
        self.Uy = Uy
        self.s = FracOrder.coerce(s).s
        self.route = route
        self.kind = kind
        self.meta = dict(meta or {})

    def __repr__(self):
        return f"ExtensionField({self.kind}, route={self.route}, s={self.s:g}, ny={len(self.y)}, base={self.base})"

    @property
    def a(self):
        return 1.0 - 2.0 * self.s

    def slice(self, index):
        return self.base.with_values(self.U[index], source=f"{self.base.source}@y={self.y[index]:g}")


# y-dependent multipliers over distinct λ > 0


def _deficit_window(lam, y, spec):
    t_lo = y * y / 4
    T = max(EXP_CUTOFF / float(np.min(lam)), y * y)
    return spec.with_window(math.log(t_lo / TAIL_LOG) - 1.0, math.log(T)), T


def dirichlet_deficit(lam, y, s, spec=None):
    """U − u multiplier of the first semigroup formula:
    (y^{2s}/(4^sΓ(s))) ∫ e^{−y²/4t}(e^{−tλ} − 1) dt/t^{1+s}; beyond T the −1 part is closed form."""
    spec = spec or QuadratureSpec()
    window, T = _deficit_window(lam, y, spec)

    def integrand(t):
        return np.exp(-y * y / (4 * t))[:, None] * np.expm1(-t[:, None] * lam[None, :])

    quad = integrate_mellin(integrand, s, window, check_right=False).value
    return y ** (2 * s) / (4**s * gamma(s)) * quad - special.gammainc(s, y * y / (4 * T))


def dirichlet_derivative(lam, y, s, spec=None):
    """y^a ∂_y U multiplier: (1/(4^sΓ(s))) ∫ (2s − y²/(2t)) e^{−y²/4t}(e^{−tλ} − 1) dt/t^{1+s}"""
    spec = spec or QuadratureSpec()
    window, T = _deficit_window(lam, y, spec)

    def integrand(t):
        weight = (2 * s - y * y / (2 * t)) * np.exp(-y * y / (4 * t))
        return weight[:, None] * np.expm1(-t[:, None] * lam[None, :])

    quad = integrate_mellin(integrand, s, window, check_right=False).value
    tail = -2 * T ** (-s) * math.exp(-y * y / (4 * T))
    return (quad + tail) / (4**s * gamma(s))


def subordination_multiplier(lam, y, s, spec=None):
    """(1/Γ(s)) ∫ e^{−t} e^{−y²λ/(4t)} dt/t^{1−s}"""
    spec = spec or QuadratureSpec()
    c = y * y * lam / 4
    window = QuadratureSpec.for_tails(
        None, None, t_lo=float(np.min(c)), t_hi=max(1.0, math.sqrt(float(np.max(c)))),
        nodes_per_decade=spec.nodes_per_decade, rule=spec.rule,
    )

    def integrand(t):
        return np.exp(-t[:, None] - c[None, :] / t[:, None])

    return integrate_mellin(integrand, -s, window).value / gamma(s)


def semigroup_frac_integral(lam, y, s, spec=None):
    """(1/Γ(s)) ∫ e^{−y²/(4t)} e^{−tλ} dt/t^{1−s}, the multiplier applied to (−Δ)^s u"""
    spec = spec or QuadratureSpec()
    window = QuadratureSpec.for_tails(
        None, None, t_lo=y * y / 4, t_hi=1.0 / float(np.min(lam)),
        nodes_per_decade=spec.nodes_per_decade, rule=spec.rule,
    )

    def integrand(t):
        return np.exp(-y * y / (4 * t))[:, None] * np.exp(-t[:, None] * lam[None, :])

    return integrate_mellin(integrand, -s, window).value / gamma(s)


def semigroup_frac_multiplier(lam, y, s, spec=None):
    return lam**s * semigroup_frac_integral(lam, y, s, spec)


def poisson_multiplier(lam, y, s):
    """Fourier transform of the Poisson kernel: (2^{1−s}/Γ(s)) z^s K_s(z), z = y|ξ|"""
    z = y * np.sqrt(lam)
    return 2 ** (1 - s) / gamma(s) * z**s * special.kve(s, z) * np.exp(-z)


def route_multiplier(route, lam, y, s, spec=None):
    if route == "semigroup_dirichlet":
        return 1.0 + dirichlet_deficit(lam, y, s, spec)
    if route == "subordination":
        return subordination_multiplier(lam, y, s, spec)
    if route == "semigroup_frac":
        return semigroup_frac_multiplier(lam, y, s, spec)
    if route == "poisson_kernel":
        return poisson_multiplier(lam, y, s)
    raise ValueError(f"Validation: unknown extension route {route!r}")


def neumann_multiplier(lam, y, s, spec=None):
    """(1/cs_neumann)(1/Γ(s)) ∫ e^{−y²/4t} e^{−tλ} dt/t^{1−s}"""
    spec = spec or QuadratureSpec()
    window = QuadratureSpec.for_tails(
        None, None, t_lo=y * y / 4, t_hi=1.0 / float(np.min(lam)),
        nodes_per_decade=spec.nodes_per_decade, rule=spec.rule,
    )

    def integrand(t):
        return np.exp(-y * y / (4 * t))[:, None] * np.exp(-t[:, None] * lam[None, :])

    return integrate_mellin(integrand, -s, window).value / (gamma(s) * cs_neumann(s))


def neumann_derivative(lam, y, s, spec=None):
    """y^a ∂_y U of the Neumann extension: −(y^{2−2s}/(2Γ(s) cs_neumann)) ∫ e^{−y²/4t}e^{−tλ} dt/t^{2−s}"""
    spec = spec or QuadratureSpec()
    window = QuadratureSpec.for_tails(
        None, None, t_lo=y * y / 4, t_hi=1.0 / float(np.min(lam)),
        nodes_per_decade=spec.nodes_per_decade, rule=spec.rule,
    )

    def integrand(t):
        return np.exp(-y * y / (4 * t))[:, None] * np.exp(-t[:, None] * lam[None, :])

    quad = integrate_mellin(integrand, 1 - s, window).value
    return -(y ** (2 - 2 * s)) * quad / (2 * gamma(s) * cs_neumann(s))


# Assembly


class _Spectrum:
    """Fourier coefficients of the base grid grouped by distinct λ = |ξ|²"""

    def __init__(self, g):
        xi2 = g.xi_squared()
        self.lam, self.inverse = np.unique(xi2, return_inverse=True)
        self.inverse = self.inverse.reshape(xi2.shape)
        self.positive = self.lam > 0
        self.coefficients = g.fourier()

    def apply(self, values_positive, zero_value):
        multiplier = np.empty_like(self.lam)
        multiplier[~self.positive] = zero_value
        multiplier[self.positive] = values_positive
        return np.fft.ifftn(self.coefficients * multiplier[self.inverse]).real


def _check_y(y_nodes):
    y = default_y_nodes() if y_nodes is None else np.asarray(y_nodes, dtype=float)
    require(np.all(y > 0), "Validation: y nodes must be positive")
    return y


def _as_grid(u, grid):
    if isinstance(u, GridField):
        return u
    require(grid is not None, "Validation: analytic inputs need a grid (L, M) to be sampled on")
    return sample(u, float(grid[0]), int(grid[1]))


def extend(u, s, y_nodes=None, route="semigroup_dirichlet", spec=None, grid=None):
    """Extension U(x, y) of u by one of the four equivalent formulas.

    semigroup_frac applies its multiplier to (−Δ)^s u from the operator module; the other routes
    act on u directly. y^a U_y is always taken from the differentiated first semigroup formula.
    """
    s = FracOrder.coerce(s).s
    require(s < 1, "Validation: the extension problem requires 0 < s < 1")
    route = ExtensionRoute(kind=route).kind if isinstance(route, str) else route.kind
    g = _as_grid(u, grid)
    y = _check_y(y_nodes)
    spectrum = _Spectrum(g)
    image = _Spectrum(frac_apply_spectral(g, s)) if route == "semigroup_frac" else None
    lam = spectrum.lam[spectrum.positive]

    def build(yk):
        if route == "semigroup_frac":
            U = image.apply(semigroup_frac_integral(lam, yk, s, spec), 0.0) + g.mean
        else:
            U = spectrum.apply(route_multiplier(route, lam, yk, s, spec), 1.0)
        return U, spectrum.apply(dirichlet_derivative(lam, yk, s, spec), 0.0)

    slices = thread_map(build, y)
    U = np.stack([item[0] for item in slices])
    Uy = np.stack([item[1] for item in slices])
    tol_boundary = float(np.max(np.abs(U[0] - g.values)))
    logger.info("extend %s s=%g route=%s: %d slices, boundary gap %.3e", g.source, s, route, len(y), tol_boundary)
    return ExtensionField(g, y, U, Uy, s, route, meta={"tol_boundary": tol_boundary})


def extend_neumann(f, s, y_nodes=None, spec=None, grid=None):
    """Neumann extension of the zero-mean part of f: −y^a U_y → f and U(·, 0) = (−Δ)^{−s}f / cs_neumann"""
    s = FracOrder.coerce(s).s
    require(s < 1, "Validation: the extension problem requires 0 < s < 1")
    g = _as_grid(f, grid)
    mean = g.mean
    projected = g.with_values(g.values - mean, source=f"{g.source}-mean")
    y = _check_y(y_nodes)
    spectrum = _Spectrum(projected)
    lam = spectrum.lam[spectrum.positive]

    def build(yk):
        return (
            spectrum.apply(neumann_multiplier(lam, yk, s, spec), 0.0),
            spectrum.apply(neumann_derivative(lam, yk, s, spec), 0.0),
        )

    slices = thread_map(build, y)
    U = np.stack([item[0] for item in slices])
    Uy = np.stack([item[1] for item in slices])
    logger.info("extend_neumann %s s=%g: projected mean %.3e", g.source, s, mean)
    return ExtensionField(
        projected, y, U, Uy, s, "neumann", kind="neumann", meta={"projected_mean": mean}
    )


# Limits at y → 0


def richardson(y, values, exponent):
    """Extrapolates values(y) to y = 0 in the variable v = y^exponent over the three smallest nodes.

    Returns (limit, residual) where residual is the gap between the quadratic and the linear
    extrapolant; ExtrapolationError when it exceeds 10% of the limit magnitude.
    """
    order = np.argsort(y)[:3]
    v = np.asarray(y, dtype=float)[order] ** exponent
    g = [np.asarray(values[i], dtype=float) for i in order]
    limit = sum(
        g[i] * math.prod(-v[j] / (v[i] - v[j]) for j in range(3) if j != i) for i in range(3)
    )
    linear = (g[0] * v[1] - g[1] * v[0]) / (v[1] - v[0])
    residual = float(np.max(np.abs(limit - linear)))
    magnitude = float(np.max(np.abs(limit)))
    if residual > RICHARDSON_TOLERANCE * magnitude:
        raise ExtrapolationError(
            f"Richardson residual {residual:.3e} exceeds 10% of the limit magnitude {magnitude:.3e}"
        )
    return limit, residual


def neumann_trace(ext):
    """−y^a ∂_y U extrapolated to y = 0 (in y^{2−2s})"""
    limit, _ = richardson(ext.y, -ext.Uy, 2 - 2 * ext.s)
    return ext.base.with_values(limit, source=f"neumann_trace({ext.base.source})")


def boundary_value(ext):
    """U(·, y) extrapolated to y = 0 in the variable y^{2s}"""
    limit, _ = richardson(ext.y, ext.U, 2 * ext.s)
    return ext.base.with_values(limit, source=f"boundary({ext.base.source})")


def _interior_ratio(measured, reference):
    peak = float(np.max(np.abs(reference)))
    if peak == 0:
        return math.nan
    mask = np.abs(reference) >= 1e-2 * peak
    return float(np.median(measured[mask] / reference[mask]))


def neumann_limit(ext, u=None, s=None):
    """Measured −lim y^a U_y, its target cs_neumann·(−Δ)^s u and the measured constant"""
    s = ext.s if s is None else FracOrder.coerce(s).s
    u = ext.base if u is None else u
    measured = neumann_trace(ext)
    image = frac_apply_spectral(u, s)
    target = image.with_values(cs_neumann(s) * image.values, source="cs_neumann*frac")
    ratio = _interior_ratio(measured.values, image.values)
    logger.info("neumann limit s=%g: constant ratio %.8g vs cs_neumann %.8g", s, ratio, cs_neumann(s))
    return NeumannLimit(measured, target, ratio)


def quotient_limit(ext, u=None, s=None):
    """−lim (U(·, y) − u)/y^{2s}, which equals cs_quotient·(−Δ)^s u"""
    s = ext.s if s is None else FracOrder.coerce(s).s
    u = ext.base if u is None else u
    quotients = -(ext.U - u.values[None]) / (ext.y ** (2 * s)).reshape((-1,) + (1,) * u.n)
    limit, _ = richardson(ext.y, quotients, 2 - 2 * s)
    return u.with_values(limit, source=f"quotient_limit({u.source})")


def quotient_constant(ext):
    image = frac_apply_spectral(ext.base, ext.s)
    return _interior_ratio(quotient_limit(ext).values, image.values), cs_quotient(ext.s)


def kernel_normalization(y, s, spec=None):
    """(y^{2s}/(4^sΓ(s))) ∫ e^{−y²/(4t)} dt/t^{1+s}, which is 1 for every y > 0"""
    s = FracOrder.coerce(s).s
    require(y > 0, "Validation: y must be positive")
    nodes = spec.nodes_per_decade if spec is not None else 16
    window = QuadratureSpec.for_tails(None, s, t_lo=y * y / 4, t_hi=y * y / 4, nodes_per_decade=nodes)
    value = integrate_mellin(lambda t: np.exp(-y * y / (4 * t)), s, window).value
    return y ** (2 * s) / (4**s * gamma(s)) * value


def bessel_k_identity(s, z, spec=None):
    """Returns (lhs, rhs): ½(z/2)^s ∫ e^{−t} e^{−z²/(4t)} dt/t^{1+s} and K_s(z)"""
    s = float(s)
    require(0 < s < 1, "Validation: bessel_k_identity requires 0 < s < 1")
    require(z > 0, "Validation: z must be positive")
    nodes = spec.nodes_per_decade if spec is not None else 16
    window = QuadratureSpec.for_tails(None, None, t_lo=z * z / 4, t_hi=max(1.0, z / 2), nodes_per_decade=nodes)
    integral = integrate_mellin(lambda t: np.exp(-t - z * z / (4 * t)), s, window).value
    lhs = 0.5 * (z / 2) ** s * integral
    if s == 0.5:
        rhs = math.sqrt(math.pi / (2 * z)) * math.exp(-z)
    else:
        rhs = float(special.kv(s, z))
    return lhs, rhs


# Seminorm and energy


class HsSeminorm(BaseModel):
    spectral: float
    gagliardo: float
    footing: Literal["rn", "torus"] = "torus"

    @property
    def relative_gap(self):
        if self.spectral == 0:
            return abs(self.gagliardo)
        return abs(self.gagliardo - self.spectral) / abs(self.spectral)


def _parseval(g):
    return (2 * g.L) ** g.n / g.M ** (2 * g.n)


def _gagliardo(g, s):
    coefficients = _parseval(g) * np.abs(g.fourier()) ** 2
    xi2 = g.xi_squared()
    keep = (coefficients > 1e-30 * float(np.max(coefficients))) & (xi2 > 0)
    if not np.any(keep):
        return 0.0
    k = g.wavenumbers
    wavevectors = np.stack(np.meshgrid(*([k] * g.n), indexing="ij"), axis=-1)[keep]
    weights = coefficients[keep]
    xi_max = float(np.sqrt(np.max(xi2[keep])))
    n = g.n
    directions, dir_weights = sphere_nodes(n, 32 if n == 1 else 16)
    projections = directions @ wavevectors.T

    rho_min = 1e-6 / xi_max
    R = g.L
    edges = list(graded_edges(rho_min, 1.0 / xi_max)) + list(
        uniform_edges(1.0 / xi_max, R, 0.5 * math.pi / xi_max)[1:]
    )
    rho, w = panel_nodes(np.array(edges))

    def shell(radii):
        out = np.empty(len(radii))
        chunk = max(1, int(2e6 // max(1, projections.size)))
        for start in range(0, len(radii), chunk):
            r = radii[start : start + chunk]
            phase = np.cos(r[:, None, None] * projections[None, :, :])
            out[start : start + chunk] = 2 * ((1 - phase) @ weights) @ dir_weights
        return out

    body = float(np.sum(w * shell(rho) * rho ** (-1 - 2 * s)))
    area = sphere_area(n)
    inner = area / n * float(np.sum(weights * xi2[keep])) * rho_min ** (2 - 2 * s) / (2 - 2 * s)
    tail = float(shell(np.array([R]))[0]) * R ** (-2 * s) / (2 * s)
    return c_ns(n, s) / 2 * (inner + body + tail)


def lattice_correction(g, s):
    """Wavenumber-lattice sum minus the R^n integral of |ξ|^{2s}|û|²/(2π)^n.

    |ξ|^{2s} is not smooth at ξ = 0, which leaves a Δξ^{n+2s} term the grid cannot resolve. The two
    leading terms come from |û(0)|² and Δ|û|²(0), both moments of u.
    """
    n = g.n
    step = math.pi / g.L
    cell = g.h**n
    points = g.points().reshape(-1, n)
    values = g.values.ravel()
    m0 = cell * float(np.sum(values))
    m1 = cell * (points.T @ values)
    m2 = cell * ((points**2).T @ values)
    laplacian = 2 * float(np.sum(m1**2 - m0 * m2))
    total = lattice_zeta(n, -s) * step ** (n + 2 * s) * m0**2
    total += lattice_zeta(n, -s - 1) * step ** (n + 2 * s + 2) * laplacian / (2 * n)
    return total / (2 * math.pi) ** n


def hs_seminorm(u, s, footing="auto"):
    """‖(−Δ)^{s/2}u‖² by the wavenumber sum and by the Gagliardo double integral.

    footing="rn" moves the wavenumber sum to its R^n value with lattice_correction, "torus" keeps
    the periodic value; "auto" picks "rn" when u vanishes on the box faces.
    """
    s = FracOrder.coerce(s).s
    require(s < 1, "Validation: hs_seminorm requires 0 < s < 1")
    require(footing in ("auto", "rn", "torus"), f"Validation: unknown footing {footing!r}")
    spectral = _parseval(u) * float(np.sum(u.xi_squared() ** s * np.abs(u.fourier()) ** 2))
    if footing == "auto":
        footing = "rn" if u.boundary_magnitude() <= BOX_TOLERANCE * u.sup else "torus"
    if footing == "rn":
        spectral -= lattice_correction(u, s)
    return HsSeminorm(spectral=spectral, gagliardo=_gagliardo(u, s), footing=footing)


def energy_functional(base, y, U, Uy, s):
    """∬ y^a (|∇_x U|² + U_y²) dx dy with Uy = y^a U_y given on the nodes.

    Spectral in x, trapezoid in log y, and a closed-form panel on (0, y_min) holding the first
    slice's x-integrals constant.
    """
    y = np.asarray(y, dtype=float)
    a = 1 - 2 * s
    axes = tuple(range(1, base.n + 1))
    gradient = _parseval(base) * np.sum(
        base.xi_squared()[None] * np.abs(np.fft.fftn(U, axes=axes)) ** 2, axis=axes
    )
    normal = np.sum(np.asarray(Uy) ** 2, axis=axes) * base.h**base.n
    density = y**a * gradient + y ** (-a) * normal
    body = float(integrate.trapezoid(density * y, np.log(y)))
    head = gradient[0] * y[0] ** (2 - 2 * s) / (2 - 2 * s) + normal[0] * y[0] ** (2 * s) / (2 * s)
    return body + float(head)


def extension_energy(ext):
    """Energy of the extension; warns when dropping every other y node moves it by more than 1%"""
    value = energy_functional(ext.base, ext.y, ext.U, ext.Uy, ext.s)
    coarse = energy_functional(ext.base, ext.y[::2], ext.U[::2], ext.Uy[::2], ext.s)
    if value and abs(coarse - value) > COARSE_GRID_TOLERANCE * abs(value):
        message = f"y grid too coarse: energy {value:.6g} vs {coarse:.6g} on every other node"
        logger.warning(message)
        warnings.warn(message, FracsemWarning)
    return value


# Checks behind the extension properties


class PdeResidual(BaseModel):
    step: float
    y: List[float]
    relative: List[float]

    @property
    def worst(self):
        return max(self.relative) if self.relative else 0.0


def slice_at(ext, y, spec=None):
    """Recomputes U(·, y) at an arbitrary y > 0 by the extension's own route"""
    spectrum = _Spectrum(ext.base)
    lam = spectrum.lam[spectrum.positive]
    if ext.kind == "neumann":
        return spectrum.apply(neumann_multiplier(lam, y, ext.s, spec), 0.0)
    if ext.route == "semigroup_frac":
        image = _Spectrum(frac_apply_spectral(ext.base, ext.s))
        return image.apply(semigroup_frac_integral(lam, y, ext.s, spec), 0.0) + ext.base.mean
    return spectrum.apply(route_multiplier(ext.route, lam, y, ext.s, spec), 1.0)


def pde_residual(ext, step=1e-3, window=RESIDUAL_WINDOW, spec=None):
    """Δ_x U + (a/y) U_y + U_yy on the nodes with y in window, relative to sup|U(·, y)|.

    y-derivatives use the centered stencil y(1 ± step) evaluated by the same route.
    """
    nodes = [float(v) for v in ext.y if window[0] <= v <= window[1]]
    xi2 = ext.base.xi_squared()

    def residual(yk):
        dy = step * yk
        lower, middle, upper = (slice_at(ext, yk + d, spec) for d in (-dy, 0.0, dy))
        laplacian = np.fft.ifftn(-xi2 * np.fft.fftn(middle)).real
        first = (upper - lower) / (2 * dy)
        second = (upper - 2 * middle + lower) / dy**2
        total = laplacian + ext.a / yk * first + second
        scale = float(np.max(np.abs(middle))) or 1.0
        return float(np.max(np.abs(total))) / scale

    relative = thread_map(residual, nodes)
    return PdeResidual(step=step, y=nodes, relative=relative)


def contraction_check(ext, tolerance=1e-10):
    """sup and L² norms of every slice against those of the boundary datum"""
    u = ext.base
    axes = tuple(range(1, u.n + 1))
    sups = np.max(np.abs(ext.U), axis=axes)
    l2 = np.sqrt(np.sum(ext.U**2, axis=axes) * u.h**u.n)
    sup_excess = float(np.max(sups - u.sup))
    l2_excess = float(np.max(l2 - math.sqrt(u.l2_norm_squared())))
    scale = max(u.sup, 1.0)
    ok = sup_excess <= tolerance * scale and l2_excess <= tolerance * max(math.sqrt(u.l2_norm_squared()), 1.0)
    return Contraction(ok, sup_excess, l2_excess)


def vanishes_at_infinity(ext, tolerance=1e-8):
    """‖U(·, y_max)‖_∞ ≤ tolerance·‖u‖_∞, the surrogate for weak vanishing as y → ∞"""
    peak = ext.base.sup
    ratio = float(np.max(np.abs(ext.U[-1]))) / peak if peak else 0.0
    return Vanishing(ratio, ratio <= tolerance)


# Persistence


def save_extension(ext, path):
    """GridField format with the base values, followed by the y block, U and y^a U_y"""
    rule = RULE_EXTENSION_NEUMANN if ext.kind == "neumann" else RULE_EXTENSION
    base = ext.base
    header = HEADER.pack(MAGIC, FORMAT_VERSION, base.n, rule, base.M, base.L, ext.s)
    payload = [
        header,
        np.ascontiguousarray(base.values, dtype="<f8").tobytes(),
        Y_BLOCK.pack(len(ext.y), ROUTE_CODES[ext.route]),
        np.ascontiguousarray(ext.y, dtype="<f8").tobytes(),
        np.ascontiguousarray(ext.U, dtype="<f8").tobytes(),
        np.ascontiguousarray(ext.Uy, dtype="<f8").tobytes(),
    ]
    return atomic_write(path, b"".join(payload), mode="wb")


def load_extension(path):
    with open(path, "rb") as f:
        data = f.read()
    n, rule, M, L, s = read_header(data)
    if rule not in (RULE_EXTENSION, RULE_EXTENSION_NEUMANN):
        raise FieldFormatError(f"Header mismatch: rule {rule} is not an extension field")
    shape = (M,) * n
    values, offset = read_values(data, HEADER.size, M**n, shape)
    if len(data) < offset + Y_BLOCK.size:
        raise FieldFormatError("Header mismatch: missing y descriptor block")
    count, code = Y_BLOCK.unpack_from(data, offset)
    routes = {v: k for k, v in ROUTE_CODES.items()}
    if code not in routes:
        raise FieldFormatError(f"Header mismatch: unknown route code {code}")
    y, offset = read_values(data, offset + Y_BLOCK.size, count, (count,))
    U, offset = read_values(data, offset, count * M**n, (count,) + shape)
    Uy, offset = read_values(data, offset, count * M**n, (count,) + shape)
    if offset != len(data):
        raise FieldFormatError("Header mismatch: trailing bytes after the payload")
    base = GridField(values, L, source=str(path), s=s)
    kind = "neumann" if rule == RULE_EXTENSION_NEUMANN else "dirichlet"
    return ExtensionField(base, y, U, Uy, s, routes[code], kind=kind)


def export_slice_csv(ext, index, path=None):
    return export_csv(ext.slice(index), path)


__all__ = [
    "ExtensionField",
    "ExtensionRoute",
    "bessel_k_identity",
    "contraction_check",
    "energy_functional",
    "export_slice_csv",
    "extend",
    "extend_neumann",
    "extension_energy",
    "hs_seminorm",
    "kernel_normalization",
    "lattice_correction",
    "load_extension",
    "neumann_limit",
    "neumann_trace",
    "pde_residual",
    "quotient_limit",
    "save_extension",
    "vanishes_at_infinity",
]
