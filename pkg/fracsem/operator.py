"""(−Δ)^s and (−Δ)^{−s} by four equivalent routes: Fourier multiplier, heat-semigroup quadrature,
pointwise singular integral and Riesz potential convolution."""
import logging
import math
import warnings
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import special

from .errors import (
    DivergenceError,
    FracsemWarning,
    RemainderTooLargeError,
    TailBoundError,
    ZeroMeanViolation,
    require,
)
from .fields import AnalyticField, GridField, as_points, ls_norm, pinned_gaussian, sample
from .heat import PANEL_BUDGET, heat_values
from .numerics import (
    EULER_GAMMA,
    FracOrder,
    QuadratureSpec,
    c_n_negs,
    c_ns,
    gamma,
    graded_edges,
    integrate_mellin,
    panel_nodes,
    sphere_area,
    sphere_nodes,
    uniform_edges,
)
from .utils import thread_map

logger = logging.getLogger(__name__)

SERIES_TERMS = 40
EXP_CUTOFF = 45.0
LIMIT_MARGIN = 1e-3
ZERO_MEAN_TOLERANCE = 1e-10


class FracRoute(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["spectral", "semigroup", "pointwise_integral", "potential_kernel"]
    spec: QuadratureSpec = QuadratureSpec()
    eps: Optional[float] = None
    R: Optional[float] = None

    @model_validator(mode="after")
    def ordered_radii(self):
        if self.kind == "pointwise_integral" and self.eps is not None and self.R is not None:
            if not 0 < self.eps < self.R:
                raise ValueError("Validation: pointwise route requires 0 < eps < R")
        return self


def _operator_order(s):
    s = FracOrder.coerce(s).s
    require(s < 1, "Validation: (−Δ)^s requires 0 < s < 1")
    return s


# Multipliers on the torus


def frac_multiplier(g, s):
    return g.xi_squared() ** s


def frac_apply_spectral(u: GridField, s):
    """Multiplies the Fourier coefficients by |ξ|^{2s}; the zero mode maps to 0"""
    s = _operator_order(s)
    return u.apply_multiplier(frac_multiplier(u, s), source=f"frac_spectral({u.source}, s={s:g})")


def _small_t_series(lam, t0, sigma, with_one):
    """∫₀^{t0} (e^{−tλ} − [with_one]) t^{−1−σ} dt by termwise integration, λt0 ≤ 1"""
    total = np.zeros_like(lam)
    term = np.ones_like(lam)
    for j in range(SERIES_TERMS + 1):
        if j:
            term = term * (-lam * t0) / j
        if j == 0 and with_one:
            continue
        total += term * t0 ** (-sigma) / (j - sigma)
    return total


def semigroup_multiplier(lam, sigma, spec=None):
    """Quadrature of ∫₀^∞ (e^{−tλ} − 1) dt/t^{1+σ} (σ > 0) or ∫₀^∞ e^{−tλ} dt/t^{1+σ} (σ < 0)
    for an array of λ > 0. The t-axis is split at 1/max λ (power series) and at 45/min λ (closed
    form tail of the −1 term); the middle is the log-substituted quadrature."""
    spec = spec or QuadratureSpec()
    lam = np.asarray(lam, dtype=float)
    require(np.all(lam > 0), "Validation: semigroup multiplier needs λ > 0")
    t0 = 1.0 / float(np.max(lam))
    T = EXP_CUTOFF / float(np.min(lam))
    positive = sigma > 0
    window = spec.with_window(math.log(t0), math.log(T))

    def integrand(t):
        e = -t[:, None] * lam[None, :]
        return np.expm1(e) if positive else np.exp(e)

    result = integrate_mellin(integrand, sigma, window, check_left=False, check_right=False)
    value = result.value + _small_t_series(lam, t0, sigma, positive)
    if positive:
        value = value - T ** (-sigma) / sigma
    return value, result.error


def _apply_semigroup_grid(u, s, spec):
    xi2 = u.xi_squared()
    lam, inverse = np.unique(xi2, return_inverse=True)
    nonzero = lam > 0
    chunks = np.array_split(lam[nonzero], max(1, min(8, int(nonzero.sum()) // 16)))
    parts = thread_map(lambda chunk: semigroup_multiplier(chunk, s, spec)[0], chunks)
    values = np.zeros_like(lam)
    values[nonzero] = np.concatenate(parts) / gamma(-s)
    multiplier = values[inverse].reshape(xi2.shape)
    logger.debug("semigroup multiplier over %d distinct wavenumbers", int(nonzero.sum()))
    return u.apply_multiplier(multiplier, source=f"frac_semigroup({u.source}, s={s:g})")


# Analytic fields: split t-axis


def field_moments(u: AnalyticField, x=None):
    """Returns (M0, M1, B) with M0 = ∫u, M1 = ∫z u(z) dz and B = −¼∫|x − z|² u(z) dz"""
    require(math.isfinite(u.extent), f"Validation: {u.name} has no finite support radius")
    n = u.n
    x = np.zeros(n) if x is None else as_points(x, n).reshape(n)
    if u.radial:
        r, w = panel_nodes(uniform_edges(0.0, u.extent, u.scale / 2))
        shell = sphere_area(n) * w * u.profile(r) * r ** (n - 1)
        m0 = float(np.sum(shell))
        m2 = float(np.sum(shell * r * r))
        return m0, np.zeros(n), -0.25 * (m2 + m0 * float(x @ x))
    panels = min(PANEL_BUDGET[n] // 2, max(4, int(math.ceil(4 * u.extent / u.scale))))
    z1, w1 = panel_nodes(np.linspace(-u.extent, u.extent, panels + 1))
    mesh = np.stack(np.meshgrid(*([z1] * n), indexing="ij"), axis=-1)
    weights = math.prod(np.meshgrid(*([w1] * n), indexing="ij"))
    values = weights * u.eval(mesh)
    m0 = float(np.sum(values))
    m1 = np.array([float(np.sum(values * mesh[..., i])) for i in range(n)])
    d2 = np.sum((mesh - x) ** 2, axis=-1)
    return m0, m1, -0.25 * float(np.sum(values * d2))


def _far_time(u, x):
    reach = u.extent + float(np.linalg.norm(x))
    return 1e4 * max(reach, u.scale) ** 2


def _mode_far_time(u):
    k2 = [sum(k * k for k in kv) for _, kv in u.modes if any(kv)]
    return EXP_CUTOFF / min(k2) if k2 else 1.0


def _constant_part(u):
    return sum(a for a, kv in u.modes if not any(kv))


def _check_admissible(u, s):
    norm = ls_norm(u, s)
    require(math.isfinite(norm), f"Validation: {u.name} is not in L_s for s={s:g} (ls_norm diverges)")


def frac_apply_semigroup(u, s, x=None, spec=None):
    """(1/Γ(−s)) ∫₀^∞ (e^{tΔ}u(x) − u(x)) dt/t^{1+s}.

    Grid fields return a GridField (aggregated multiplier, zero mode to 0). Analytic fields return
    the value at x: [0, t_s] by the Taylor term tΔu(x), [t_s, T] by quadrature of the difference
    form, [T, ∞) by the far-field heat asymptotics (mass or constant mode).
    """
    s = _operator_order(s)
    spec = spec or QuadratureSpec()
    if isinstance(u, GridField):
        return _apply_semigroup_grid(u, s, spec)
    require(x is not None, "Validation: analytic semigroup route needs a point x")
    _check_admissible(u, s)
    x = as_points(x, u.n).reshape(u.n)
    ux = float(u.eval(x))
    t_s = (1e-3 * u.scale) ** 2
    taylor = float(u.laplacian_at(x)) * t_s ** (1 - s) / (1 - s)
    if u.modes:
        T = _mode_far_time(u)
        tail = (_constant_part(u) - ux) * T ** (-s) / s
    elif u.decay.decaying and math.isfinite(u.extent):
        T = _far_time(u, x)
        m0, _, b = field_moments(u, x)
        half = u.n / 2
        far = (4 * math.pi) ** (-half) * (
            m0 * T ** (-half - s) / (half + s) + b * T ** (-half - s - 1) / (half + s + 1)
        )
        tail = far - ux * T ** (-s) / s
    else:
        raise TailBoundError(f"No far-field asymptotics for {u.name} ({u.decay}); use a grid route")
    window = spec.with_window(math.log(t_s), math.log(T))
    middle = integrate_mellin(
        lambda t: heat_values(u, x, t, difference=True), s, window, check_left=False, check_right=False
    )
    logger.debug("semigroup %s at %s: taylor=%.3e middle=%.3e tail=%.3e", u.name, x, taylor, middle.value, tail)
    return (taylor + middle.value + tail) / gamma(-s)


# Pointwise singular integral


class PointwiseEvaluation(BaseModel):
    value: float
    inner_bound: float
    outer_remainder: float
    form: str


def _default_eps(u):
    return 1e-3 * min(u.extent, u.scale)


def _radial_edges(u, x_norm, eps, R, delta):
    scale = min(u.scale, R)
    breaks = [eps, scale, R, delta]
    if math.isfinite(u.extent):
        breaks += [abs(u.extent - x_norm), u.extent + x_norm]
    near = graded_edges(eps, max(scale, eps * 2))
    far_end = min(R, u.extent + x_norm) if math.isfinite(u.extent) else min(R, 40.0 * max(1.0, u.scale))
    edges = list(near)
    if far_end > edges[-1]:
        edges += list(uniform_edges(edges[-1], far_end, u.scale / 2)[1:])
    if R > edges[-1]:
        edges += list(graded_edges(edges[-1], R)[1:])
    edges = np.array(sorted(set(edges + [R] + [b for b in breaks if eps < b < R])))
    return edges[(edges >= eps) & (edges <= R)]


def frac_apply_pointwise(u, x, s, eps=None, R=None, delta=1.0, form="compensated", tol=None, full=False):
    """c_{n,s} ∫ (u(x) − u(z)) / |x − z|^{n+2s} dz in polar coordinates around x.

    form="compensated" subtracts ∇u(x)·(z − x) inside |z − x| < delta (needed for s ≥ 1/2);
    form="symmetric" integrates the second difference (2u(x) − u(x+z) − u(x−z))/2.
    The ball |z − x| < eps uses the Taylor term of u; beyond R the exact u(x) part is added and the
    u(z) part is bounded from the decay class. RemainderTooLargeError when the reported bounds
    exceed tol.
    """
    s = _operator_order(s)
    require(form in ("compensated", "symmetric"), f"Validation: unknown pointwise form {form!r}")
    require(delta > 0, "Validation: delta must be positive")
    _check_admissible(u, s)
    n = u.n
    x = as_points(x, n).reshape(n)
    x_norm = float(np.linalg.norm(x))
    eps = eps if eps is not None else _default_eps(u)
    if R is None:
        R = u.extent + x_norm if math.isfinite(u.extent) else max(1e3 * u.scale, 100.0)
    require(0 < eps < R, "Validation: pointwise route requires 0 < eps < R")
    c = c_ns(n, s)
    area = sphere_area(n)
    ux = float(u.eval(x))
    lap = float(u.laplacian_at(x))

    directions, weights = sphere_nodes(n, 32 if n < 3 else 16)
    rho, w = panel_nodes(_radial_edges(u, x_norm, eps, R, delta))
    z = x[None, None, :] + rho[:, None, None] * directions[None, :, :]
    if form == "symmetric":
        mirrored = x[None, None, :] - rho[:, None, None] * directions[None, :, :]
        shell = (2 * ux - u.eval(z) - u.eval(mirrored)) / 2
    else:
        shell = ux - u.eval(z)
        if s >= 0.5:
            grad = u.gradient_at(x).reshape(n)
            inside = (rho < delta)[:, None]
            shell = shell + inside * (rho[:, None] * (directions @ grad)[None, :])
    radial = shell @ weights
    middle = c * float(np.sum(w * radial * rho ** (-1 - 2 * s)))

    inner = -c * lap * area * eps ** (2 - 2 * s) / (2 * n * (2 - 2 * s))
    # fourth-order Taylor term with |D⁴u| <= 12|Δu|/scale²
    inner_bound = abs(inner) * (eps / u.scale) ** 2 * n * (2 - 2 * s) / (4 - 2 * s)
    outer = c * ux * area * R ** (-2 * s) / (2 * s)
    if math.isfinite(u.extent) and R >= u.extent + x_norm:
        remainder = 0.0
    else:
        edge = float(np.max(np.abs(u.eval(x + R * directions))))
        q = u.decay.power if u.decay.kind == "tail_power" else 0.0
        remainder = 0.0 if edge == 0 else c * area * edge * R ** (-2 * s) / (q + 2 * s)
    value = middle + inner + outer
    tol = tol if tol is not None else 1e-6 * max(1.0, abs(value))
    if inner_bound + remainder > tol:
        raise RemainderTooLargeError(
            f"Pointwise remainder {inner_bound + remainder:.3e} exceeds tolerance {tol:.3e} "
            f"(eps={eps:g}, R={R:g})"
        )
    logger.debug("pointwise %s at %s: value=%.12g inner=%.3e remainder=%.3e", u.name, x, value, inner, remainder)
    if full:
        return PointwiseEvaluation(value=value, inner_bound=inner_bound, outer_remainder=remainder, form=form)
    return value


def kernel_identity_check(n, s, r, spec=None):
    """Returns (lhs, rhs): (1/|Γ(−s)|)∫₀^∞ G_t(r e₁) dt/t^{1+s} and c_{n,s}/r^{n+2s}"""
    s = _operator_order(s)
    require(r > 0, "Validation: r must be positive")
    nodes = spec.nodes_per_decade if spec is not None else 16
    window = QuadratureSpec.for_tails(None, n / 2 + s, t_lo=r * r / 4, t_hi=r * r / 4, nodes_per_decade=nodes)

    def kernel(t):
        return (4 * math.pi * t) ** (-n / 2) * np.exp(-r * r / (4 * t))

    lhs = integrate_mellin(kernel, s, window).value / abs(gamma(-s))
    return lhs, c_ns(n, s) / r ** (n + 2 * s)


# Inverse powers


def _inverse_order(s, n):
    s = FracOrder.coerce(s).s
    require(s <= n / 2 + 1e-14, f"Validation: inverse kernels need 0 < s <= n/2 (n={n})")
    return s


def frac_inverse_semigroup(f, s, x=None, spec=None):
    """(1/Γ(s)) ∫₀^∞ e^{tΔ}f dt/t^{1−s}.

    Grid fields: the zero Fourier mode is projected out before integration; the removed mean is
    recorded in meta["projected_mean"]. Analytic fields are evaluated at x with the small-t part
    f(x)t_s^s/s and the far-field moments tail; s ≥ n/2 needs zero mass (DivergenceError).
    """
    spec = spec or QuadratureSpec()
    if isinstance(f, GridField):
        s = FracOrder.coerce(s).s
        mean = f.mean
        if s >= f.n / 2 and abs(mean) > ZERO_MEAN_TOLERANCE * max(f.sup, 1e-300):
            message = f"t → ∞ tail diverges for s={s:g} >= n/2 with mean {mean:.3e}; zero mode projected"
            logger.warning(message)
            warnings.warn(message, FracsemWarning)
        xi2 = f.xi_squared()
        lam, inverse = np.unique(xi2, return_inverse=True)
        values = np.zeros_like(lam)
        values[lam > 0] = semigroup_multiplier(lam[lam > 0], -s, spec)[0] / gamma(s)
        return f.apply_multiplier(
            values[inverse].reshape(xi2.shape),
            source=f"frac_inverse({f.source}, s={s:g})",
            meta={"projected_mean": mean, "zero_mean_projection": True},
        )

    s = _inverse_order(s, f.n)
    require(x is not None, "Validation: analytic inverse route needs a point x")
    x = as_points(x, f.n).reshape(f.n)
    half = f.n / 2
    if f.modes:
        if abs(_constant_part(f)) > 0:
            raise DivergenceError(f"{f.name} has a constant mode; (−Δ)^{{−s}} is not defined")
        T = _mode_far_time(f)
        tail = 0.0
    else:
        require(math.isfinite(f.extent), f"Validation: {f.name} must be compactly supported")
        m0, _, b = field_moments(f, x)
        mass_scale = ls_norm(f, 0.5) or 1.0
        if s >= half and abs(m0) > ZERO_MEAN_TOLERANCE * mass_scale:
            raise DivergenceError(f"∫f = {m0:.3e} ≠ 0 and s={s:g} >= n/2: the t → ∞ tail is not integrable")
        T = _far_time(f, x)
        tail = 0.0 if s >= half else m0 * T ** (s - half) / (half - s)
        tail = (4 * math.pi) ** (-half) * (tail + b * T ** (s - half - 1) / (half + 1 - s))
    t_s = (1e-3 * f.scale) ** 2
    head = float(f.eval(x)) * t_s**s / s + float(f.laplacian_at(x)) * t_s ** (s + 1) / (s + 1)
    window = spec.with_window(math.log(t_s), math.log(T))
    middle = integrate_mellin(lambda t: heat_values(f, x, t), -s, window, check_left=False, check_right=False)
    return (head + middle.value + tail) / gamma(s)


def riesz_kernel(n, s, x):
    """c_{n,−s}|x|^{−(n−2s)} for s < n/2; (−2 log|x| − γ)/(Γ(n/2)(4π)^{n/2}) at s = n/2"""
    s = _inverse_order(s, n)
    r = np.sqrt(np.sum(as_points(x, n) ** 2, axis=-1))
    require(np.all(r > 0), "Validation: the Riesz kernel is singular at x = 0")
    if abs(s - n / 2) <= 1e-14:
        return (-2 * np.log(r) - EULER_GAMMA) / (gamma(n / 2) * (4 * math.pi) ** (n / 2))
    return c_n_negs(n, s) * r ** (2 * s - n)


def _kernel_ball(n, s, rho0):
    """∫_{|z|<rho0} K_{−s}(z) dz"""
    area = sphere_area(n)
    if abs(s - n / 2) <= 1e-14:
        k = 1.0 / (gamma(n / 2) * (4 * math.pi) ** (n / 2))
        return area * k * rho0**n * ((-2 * math.log(rho0) - EULER_GAMMA) / n + 2 / n**2)
    return area * c_n_negs(n, s) * rho0 ** (2 * s) / (2 * s)


def riesz_convolve(f, x, n, s):
    """∫ K_{−s}(x − z) f(z) dz by polar quadrature around x with graded panels at the singularity"""
    n = f.n if n is None else int(n)
    require(n == f.n, "Validation: dimension mismatch")
    s = _inverse_order(s, n)
    require(math.isfinite(f.extent), f"Validation: {f.name} must be compactly supported")
    if abs(s - n / 2) <= 1e-14:
        m0 = field_moments(f)[0]
        if abs(m0) > ZERO_MEAN_TOLERANCE * max(ls_norm(f, 0.5), 1e-300):
            raise ZeroMeanViolation(f"∫f = {m0:.3e}: the s = n/2 log kernel needs zero-mean data")
    x = as_points(x, n).reshape(n)
    x_norm = float(np.linalg.norm(x))
    rho0 = 1e-6 * f.scale
    R = f.extent + x_norm
    directions, weights = sphere_nodes(n, 32 if n < 3 else 16)
    breaks = [b for b in (abs(f.extent - x_norm), R) if rho0 < b <= R]
    edges = list(graded_edges(rho0, f.scale))
    if R > edges[-1]:
        edges += list(uniform_edges(edges[-1], R, f.scale / 2)[1:])
    edges = np.array(sorted(set(edges + breaks)))
    edges = edges[edges <= R]
    rho, w = panel_nodes(edges)
    shell = f.eval(x[None, None, :] + rho[:, None, None] * directions[None, :, :]) @ weights
    direction = np.zeros(n)
    direction[0] = 1.0
    kernel = riesz_kernel(n, s, rho[:, None] * direction)
    inner = float(f.eval(x)) * _kernel_ball(n, s, rho0)
    return inner + float(np.sum(w * kernel * shell * rho ** (n - 1)))


# Diagnostics


class LimitRow(BaseModel):
    s: float
    value: float
    target: float
    gap: float
    reference: Optional[float] = None


class LimitTable(BaseModel):
    fixture: str
    direction: Literal["s_to_1", "s_to_0"]
    x: List[float]
    rows: List[LimitRow]

    @property
    def monotone(self):
        gaps = [row.gap for row in self.rows]
        return all(b <= a + 1e-14 for a, b in zip(gaps, gaps[1:]))


LIMIT_ROUTES = ("semigroup", "pointwise")


def _route_value(u, x, s, route, spec=None):
    if route == "pointwise":
        return frac_apply_pointwise(u, x, s)
    return frac_apply_semigroup(u, s, x, spec)


def limit_diagnostics(u: AnalyticField, x, direction, s_sequence, spec=None, route="semigroup"):
    """Tabulates (−Δ)^s u(x) along s_sequence against −Δu(x) (s → 1) or u(x) (s → 0).

    Values come from the named route; a closed-form image, when the fixture has one, is kept in the
    reference column.
    """
    require(direction in ("s_to_1", "s_to_0"), f"Validation: unknown direction {direction!r}")
    require(route in LIMIT_ROUTES, f"Validation: limits run on one of {LIMIT_ROUTES}, not {route!r}")
    s_sequence = [float(s) for s in s_sequence]
    require(
        all(LIMIT_MARGIN <= s <= 1 - LIMIT_MARGIN for s in s_sequence),
        "Validation: limit sweeps stay 1e-3 away from s = 0 and s = 1",
    )
    steps = np.diff(s_sequence)
    toward_one = direction == "s_to_1"
    require(
        np.all(steps > 0) if toward_one else np.all(steps < 0),
        "Validation: s_sequence must move monotonically toward the endpoint",
    )
    x = as_points(x, u.n).reshape(u.n)
    target = -float(u.laplacian_at(x)) if toward_one else float(u.eval(x))
    values = thread_map(lambda s: _route_value(u, x, s, route, spec), s_sequence)
    exact = u.exact_frac_image
    rows = [
        LimitRow(
            s=s,
            value=v,
            target=target,
            gap=abs(v - target),
            reference=None if exact is None else float(exact(s, x)),
        )
        for s, v in zip(s_sequence, values)
    ]
    return LimitTable(fixture=u.name, direction=direction, x=x.tolist(), rows=rows)


def max_principle_value(u, x0, s, spec=None):
    """(−Δ)^s u(x0) by the semigroup route; nonpositive when u ≥ 0 attains 0 at x0"""
    return frac_apply_semigroup(u, s, x0, spec)


def random_pinned_fixtures(count, seed=0, n=1):
    """Nonnegative fixtures vanishing at a random x0, with x0 returned alongside"""
    rng = np.random.default_rng(seed)
    fixtures = []
    for _ in range(count):
        x0 = rng.uniform(-1.0, 1.0, n)
        center = x0 + rng.uniform(-1.0, 1.0, n)
        sigma = rng.uniform(0.5, 1.5)
        amplitude = rng.uniform(0.5, 2.0)
        fixtures.append((pinned_gaussian(x0, center, sigma, amplitude, n=n), x0))
    return fixtures


def fractional_heat(u: GridField, s, t):
    """e^{−t(−Δ)^s}u on the torus (multiplier e^{−t|ξ|^{2s}}); s = 1 is the heat flow"""
    s = FracOrder.coerce(s).s
    require(s <= 1, "Validation: fractional heat requires 0 < s <= 1")
    require(t >= 0, "Validation: t must be >= 0")
    return u.apply_multiplier(
        np.exp(-t * u.xi_squared() ** s), source=f"frac_heat({u.source}, s={s:g}, t={t:g})"
    )


def _hurwitz_pair(p, x, L, J):
    """Σ_{j>J} [(2Lj + x)^{−p} + (2Lj − x)^{−p}]"""
    scale = (2 * L) ** (-p)
    q = x / (2 * L)
    return scale * (special.zeta(p, J + 1 + q) + special.zeta(p, J + 1 - q))


def torus_image_correction(u: AnalyticField, x, s, L, images=8):
    """Torus value minus R^n value of (−Δ)^s u at x for a decaying fixture on [−L, L)^n.

    The periodic operator sees Σ_{j≠0} (−Δ)^s u(x + 2Lj); far from the support each term is
    −c_{n,s}[M0|y|^{−p} + p y·M1|y|^{−p−2} + M2 p(p+2−n)/(2n)|y|^{−p−2}], p = n + 2s.
    """
    s = _operator_order(s)
    n = u.n
    x = as_points(x, n).reshape(n)
    m0, m1, b = field_moments(u)
    m2 = -4 * b
    p = n + 2 * s
    quad = p * (p + 2 - n) / (2 * n)
    c = c_ns(n, s)
    grids = np.meshgrid(*([np.arange(-images, images + 1)] * n), indexing="ij")
    lattice = np.stack(grids, axis=-1).reshape(-1, n)
    lattice = lattice[np.any(lattice != 0, axis=1)]
    y = x[None, :] + 2 * L * lattice
    r = np.sqrt(np.sum(y * y, axis=1))
    total = np.sum(m0 * r ** (-p) + p * (y @ m1) * r ** (-p - 2) + m2 * quad * r ** (-p - 2))
    if n == 1:
        total += m0 * _hurwitz_pair(p, x[0], L, images) + m2 * quad * _hurwitz_pair(p + 2, x[0], L, images)
    else:
        inner = 2 * L * (images + 0.5)
        total += m0 * sphere_area(n) * inner ** (-2 * s) / (2 * s * (2 * L) ** n)
    return -c * float(total)


class RouteComparison(BaseModel):
    fixture: str
    s: float
    L: float
    M: int
    probes: List[List[float]]
    values: Dict[str, List[float]]
    deltas: Dict[str, float]
    spectral_tail: Optional[float] = None


ROUTES = ("spectral", "semigroup", "pointwise")


def spectral_tail(g: GridField):
    """Largest |û| over the top octave of wavenumbers relative to the largest |û| overall"""
    magnitude = np.abs(g.fourier())
    xi2 = g.xi_squared()
    top = xi2 >= float(np.max(xi2)) / 4
    peak = float(np.max(magnitude))
    return float(np.max(magnitude[top])) / peak if peak else 0.0


def compare_routes(u: AnalyticField, s, probes, grid=(12.0, 256), routes=ROUTES, spec=None):
    """Evaluates (−Δ)^s u at the probes by each route, on the R^n footing.

    Probes are snapped to grid nodes. The spectral route runs on the torus and is moved to R^n with
    torus_image_correction for decaying fixtures; semigroup and pointwise run on the analytic field.
    The spectral value is only as good as the grid resolves u: spectral_tail reports the top-octave
    share of û, and a narrow bump needs a finer grid than a wide one at the same L.
    """
    s = _operator_order(s)
    L, M = float(grid[0]), int(grid[1])
    g = sample(u, L, M)
    unknown = set(routes) - set(ROUTES)
    require(not unknown, f"Validation: unknown routes {sorted(unknown)}")
    snapped = [g.points()[g.index_of(p)] for p in probes]
    values = {}
    tail = None
    if "spectral" in routes:
        tail = spectral_tail(g)
        image = frac_apply_spectral(g, s)
        values["spectral"] = [image.at(p) for p in snapped]
        if u.decay.decaying and not u.modes:
            corrections = [torus_image_correction(u, p, s, L) for p in snapped]
            values["spectral"] = [v - d for v, d in zip(values["spectral"], corrections)]
    if "semigroup" in routes:
        values["semigroup"] = thread_map(lambda p: frac_apply_semigroup(u, s, p, spec), snapped)
    if "pointwise" in routes:
        values["pointwise"] = thread_map(lambda p: frac_apply_pointwise(u, p, s), snapped)
    if u.exact_frac_image is not None:
        values["exact"] = [float(u.exact_frac_image(s, p)) for p in snapped]
    names = sorted(values)
    deltas = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            deltas[f"{a}-{b}"] = float(np.max(np.abs(np.subtract(values[a], values[b]))))
    logger.info("route comparison %s s=%g: %s (spectral tail %s)", u.name, s, deltas, tail)
    return RouteComparison(
        fixture=u.name,
        s=s,
        L=L,
        M=M,
        probes=[np.atleast_1d(p).tolist() for p in snapped],
        values={k: [float(v) for v in vs] for k, vs in values.items()},
        deltas=deltas,
        spectral_tail=tail,
    )


__all__ = [
    "FracRoute",
    "compare_routes",
    "frac_apply_pointwise",
    "frac_apply_semigroup",
    "frac_apply_spectral",
    "frac_inverse_semigroup",
    "fractional_heat",
    "kernel_identity_check",
    "limit_diagnostics",
    "riesz_convolve",
    "riesz_kernel",
    "spectral_tail",
    "torus_image_correction",
]
