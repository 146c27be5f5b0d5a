"""Special functions, the constants of the fractional calculus and the log-substituted t-quadrature.

Every semigroup formula in the package reduces to an improper integral

    ∫₀^∞ f(t) dt / t^{1+σ}

with σ = ±s. ``integrate_mellin`` evaluates it after the substitution τ = log t, on composite
Gauss-Legendre panels (one panel per decade of t) or on a uniform trapezoid grid.
"""
import logging
import math
from collections import namedtuple
from functools import lru_cache
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import special

from .errors import ConvergenceError, DomainError, PoleError, require

logger = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)
LN10 = math.log(10.0)
BOUNDARY_TOLERANCE = 1e-10

MellinResult = namedtuple("MellinResult", ["value", "error", "nodes"])


class FracOrder(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float

    @field_validator("s")
    @classmethod
    def positive(cls, value):
        if not value > 0 or not math.isfinite(value):
            raise ValueError("Validation: fractional order must be positive")
        return value

    @property
    def a(self):
        return 1.0 - 2.0 * self.s

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(s=float(value))
        except ValueError as err:
            raise DomainError(f"Validation: invalid fractional order {value!r}") from err

    def __float__(self):
        return self.s


def order_value(s):
    """Returns the float exponent from a FracOrder or a number"""
    return FracOrder.coerce(s).s


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_min: float = -30.0
    tau_max: float = 30.0
    nodes_per_decade: int = 16
    rule: Literal["gauss-legendre-panels", "trapezoid"] = "gauss-legendre-panels"

    @field_validator("nodes_per_decade")
    @classmethod
    def enough_nodes(cls, value):
        if value < 4:
            raise ValueError("Validation: nodes_per_decade must be >= 4")
        return value

    @model_validator(mode="after")
    def ordered_window(self):
        if not self.tau_min < self.tau_max:
            raise ValueError("Validation: tau_min must be < tau_max")
        return self

    def doubled(self):
        return self.model_copy(update={"nodes_per_decade": 2 * self.nodes_per_decade})

    def with_window(self, tau_min, tau_max):
        return QuadratureSpec(
            tau_min=float(tau_min),
            tau_max=float(tau_max),
            nodes_per_decade=self.nodes_per_decade,
            rule=self.rule,
        )

    @classmethod
    def for_tails(
        cls, left_rate, right_rate, t_lo=1.0, t_hi=1.0, tol=1e-16, nodes_per_decade=16, rule=None
    ):
        """Window that makes a power-law (or exponential) tail fall below tol.

        left_rate: exponent r of the substituted integrand ~ t^r as t → 0 (None when the
            integrand decays like e^{-c/t}, with t_lo the scale c).
        right_rate: exponent r of the substituted integrand ~ t^{-r} as t → ∞ (None when it
            decays like e^{-t/t_hi}).
        """
        log_tol = math.log(tol)
        if left_rate is None:
            tau_min = math.log(t_lo / -log_tol) - 1.0
        else:
            require(left_rate > 0, "Validation: left tail rate must be positive")
            tau_min = math.log(t_lo) + log_tol / left_rate
        if right_rate is None:
            tau_max = math.log(t_hi * -log_tol) + 1.0
        else:
            require(right_rate > 0, "Validation: right tail rate must be positive")
            tau_max = math.log(t_hi) - log_tol / right_rate
        kwargs = {"nodes_per_decade": nodes_per_decade}
        if rule is not None:
            kwargs["rule"] = rule
        return cls(tau_min=tau_min, tau_max=tau_max, **kwargs)


class OrderConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    s: float
    c_pos: Optional[float] = None
    c_neg: Optional[float] = None
    cs_neumann: Optional[float] = None
    cs_quotient: Optional[float] = None
    euler_gamma: float = EULER_GAMMA

    @classmethod
    def for_order(cls, n, s):
        s = order_value(s)
        values = {"n": n, "s": s}
        if s < 1:
            values["c_pos"] = c_ns(n, s)
            values["cs_neumann"] = cs_neumann(s)
            values["cs_quotient"] = cs_quotient(s)
        if s < n / 2:
            values["c_neg"] = c_n_negs(n, s)
        return cls(**values)


def gamma(x):
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Validation: Gamma has a pole at {x}")
    return float(special.gamma(x))


def c_ns(n, s):
    """Normalization constant of the singular integral form of (−Δ)^s"""
    s = order_value(s)
    require(s < 1, "Validation: c_ns requires 0 < s < 1")
    return 4**s * gamma(n / 2 + s) / (abs(gamma(-s)) * math.pi ** (n / 2))


def c_ns_gamma2(n, s):
    """Same constant written through Γ(2−s), which makes c_{n,s} ~ s(1−s) visible"""
    s = order_value(s)
    require(s < 1, "Validation: c_ns requires 0 < s < 1")
    return s * (1 - s) * 4**s * gamma(n / 2 + s) / (abs(gamma(2 - s)) * math.pi ** (n / 2))


def c_n_negs(n, s):
    """Constant of the Riesz potential kernel c_{n,-s} |x|^{-(n-2s)}"""
    s = order_value(s)
    require(s < n / 2, "Validation: c_n_negs requires s < n/2 (use the log kernel at s = n/2)")
    return gamma(n / 2 - s) / (4**s * gamma(s) * math.pi ** (n / 2))


def cs_neumann(s):
    s = order_value(s)
    require(s < 1, "Validation: extension constants require 0 < s < 1")
    return gamma(1 - s) / (4 ** (s - 0.5) * gamma(s))


def cs_quotient(s):
    s = order_value(s)
    require(s < 1, "Validation: extension constants require 0 < s < 1")
    return gamma(1 - s) / (4**s * gamma(1 + s))


def sphere_area(n):
    """Surface measure ω_{n-1} of the unit sphere in R^n (2 points for n = 1)"""
    return 2 * math.pi ** (n / 2) / gamma(n / 2)


@lru_cache(maxsize=128)
def lattice_zeta(n, z):
    """Epstein zeta Σ_{m ∈ Z^n, m ≠ 0} |m|^{−2z} of the square lattice, continued to every z ≠ n/2.

    Uses the theta-function splitting at t = 1: with θ(t) = Σ_k e^{−πk²t},
    π^{−z}Γ(z)Z(z) = ∫₁^∞ (t^{z−1} + t^{n/2−z−1})(θ(t)^n − 1) dt − 1/z − 1/(n/2 − z).
    For n = 1 this is 2ζ(2z).
    """
    z = float(z)
    require(z != n / 2, f"Validation: lattice zeta has a pole at z = {n / 2}")
    require(not (z <= 0 and z == math.floor(z)), "Validation: lattice zeta needs z not a nonpositive integer")
    t, w = panel_nodes(uniform_edges(1.0, 40.0, 1.0))
    k = np.arange(1, 7)
    theta = 1.0 + 2.0 * np.sum(np.exp(-math.pi * np.outer(t, k * k)), axis=1)
    integral = float(np.sum(w * (t ** (z - 1) + t ** (n / 2 - z - 1)) * (theta**n - 1.0)))
    completed = integral - 1.0 / z - 1.0 / (n / 2 - z)
    return math.pi**z * completed / gamma(z)


@lru_cache(maxsize=64)
def _legendre(order):
    nodes, weights = special.roots_legendre(order)
    return nodes, weights


@lru_cache(maxsize=256)
def _tau_nodes(tau_min, tau_max, nodes_per_decade, rule):
    width = tau_max - tau_min
    if rule == "trapezoid":
        count = int(math.ceil(width / LN10 * nodes_per_decade)) + 1
        tau = np.linspace(tau_min, tau_max, count)
        weights = np.full(count, width / (count - 1))
        weights[0] *= 0.5
        weights[-1] *= 0.5
        return tau, weights
    panels = max(1, int(math.ceil(width / LN10)))
    return panel_nodes(np.linspace(tau_min, tau_max, panels + 1), nodes_per_decade)


def mellin_nodes(spec):
    """Returns (t, τ, w) such that Σ w_i f(t_i) e^{-στ_i} ≈ ∫ f(t) dt/t^{1+σ} over the window"""
    tau, weights = _tau_nodes(spec.tau_min, spec.tau_max, spec.nodes_per_decade, spec.rule)
    return np.exp(tau), tau, weights


def _expand(weights, values):
    return weights.reshape(weights.shape + (1,) * (values.ndim - 1))


def _mellin_sum(f, exponent, spec):
    t, tau, weights = mellin_nodes(spec)
    values = np.asarray(f(t), dtype=float)
    scaled = _expand(weights * np.exp(-exponent * tau), values)
    return np.sum(scaled * values, axis=0), len(t)


def integrate_mellin(f, exponent, spec=None, check_left=True, check_right=True):
    """Computes ∫₀^∞ f(t) dt/t^{1+exponent} on the τ = log t window of spec.

    f receives a 1-D array of t values and returns an array whose first axis matches it; any
    trailing axes are integrated independently (multipliers for many wavenumbers at once).
    The integral is computed with N and 2N nodes; the 2N value is returned with the absolute
    difference as error estimate. check_left / check_right control the non-convergence test on
    the substituted integrand at the window ends; disable them when an end is a deliberate split
    point whose remainder the caller accounts for.
    """
    spec = spec or QuadratureSpec()
    exponent = float(exponent)
    coarse, _ = _mellin_sum(f, exponent, spec)
    value, nodes = _mellin_sum(f, exponent, spec.doubled())
    error = np.abs(value - coarse)

    scale = float(np.max(np.abs(value))) if np.size(value) else 0.0
    ends = []
    if check_left:
        ends.append(spec.tau_min)
    if check_right:
        ends.append(spec.tau_max)
    if ends:
        tau_ends = np.array(ends)
        boundary = np.asarray(f(np.exp(tau_ends)), dtype=float)
        boundary = boundary * _expand(np.exp(-exponent * tau_ends), boundary)
        worst = float(np.max(np.abs(boundary)))
        if worst > BOUNDARY_TOLERANCE * scale:
            raise ConvergenceError(
                f"Quadrature window [{spec.tau_min:.3g}, {spec.tau_max:.3g}] too narrow: boundary "
                f"integrand {worst:.3e} vs estimate {scale:.3e}"
            )
    logger.debug(
        "integrate_mellin exponent=%s window=[%.2f, %.2f] nodes=%d error=%.2e",
        exponent,
        spec.tau_min,
        spec.tau_max,
        nodes,
        float(np.max(error)) if np.size(error) else 0.0,
    )
    if np.ndim(value) == 0:
        return MellinResult(float(value), float(error), nodes)
    return MellinResult(value, error, nodes)


def panel_nodes(edges, order=16):
    """Composite Gauss-Legendre nodes and weights on consecutive panels [edges[i], edges[i+1]]"""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def graded_edges(start, stop, ratio=2.0):
    """Geometric breakpoints from start to stop (both > 0)"""
    count = max(1, int(math.ceil(math.log(stop / start) / math.log(ratio))))
    return np.geomspace(start, stop, count + 1)


def uniform_edges(start, stop, width):
    count = max(1, int(math.ceil((stop - start) / width)))
    return np.linspace(start, stop, count + 1)


@lru_cache(maxsize=16)
def sphere_nodes(n, resolution=32):
    """Directions on the unit sphere of R^n with weights summing to its surface measure.

    The node set is symmetric under ω → −ω, so odd integrands integrate to zero exactly.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        count = 2 * resolution
        theta = 2 * math.pi * np.arange(count) / count
        directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return directions, np.full(count, 2 * math.pi / count)
    require(n == 3, f"Validation: unsupported dimension {n}")
    mu, w_mu = _legendre(resolution)
    count = 2 * resolution
    phi = 2 * math.pi * np.arange(count) / count
    sin_theta = np.sqrt(1 - mu**2)
    directions = np.stack(
        [
            (sin_theta[:, None] * np.cos(phi)[None, :]).ravel(),
            (sin_theta[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(mu, count),
        ],
        axis=-1,
    )
    weights = np.repeat(w_mu, count) * (2 * math.pi / count)
    return directions, weights
