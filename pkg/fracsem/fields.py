"""Scalar functions on R^n: closed-form fixtures, periodic grid samplings, the L_s tail norm and
persistence of sampled fields."""
import csv
import io
import logging
import math
import struct
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import special

from .errors import FieldFormatError, require
from .numerics import gamma, graded_edges, panel_nodes, sphere_area, sphere_nodes, uniform_edges
from .utils import atomic_write, format_float

logger = logging.getLogger(__name__)

MAGIC = b"FSGF"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBIdd4x")
RULE_GRID = 0
RULE_EXTENSION = 1
RULE_EXTENSION_NEUMANN = 2

FAR_RADIUS = 1e8


class Decay(BaseModel):
    """Behaviour of a field at infinity. tail_power(p) means |u(x)| ~ |x|^{-p}; p < 0 is growth."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["schwartz", "bounded", "tail_power"]
    power: Optional[float] = None

    @classmethod
    def schwartz(cls):
        return cls(kind="schwartz")

    @classmethod
    def bounded(cls):
        return cls(kind="bounded")

    @classmethod
    def tail_power(cls, p):
        return cls(kind="tail_power", power=float(p))

    def ls_finite(self, s):
        if self.kind == "schwartz":
            return True
        if self.kind == "bounded":
            return s > 0
        return self.power + 2 * s > 0

    @property
    def decaying(self):
        return self.kind == "schwartz" or (self.kind == "tail_power" and self.power > 0)

    def __str__(self):
        if self.kind == "tail_power":
            return f"tail_power({self.power:g})"
        return self.kind


def as_points(x, n):
    """Returns x as a float array of shape (..., n); scalars and plain arrays are 1-D points"""
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    require(x.shape[-1] == n, f"Validation: points must have {n} coordinates")
    return x


class AnalyticField:
    """A closed-form function on R^n with the metadata the routes and oracles need.

    func takes points of shape (..., n). Optional closed forms: fourier(ξ) with the convention
    û(ξ) = ∫ u(x) e^{-ix·ξ} dx, exact_frac_image(s, x), laplacian(x), and for radially symmetric
    fields profile(r). modes lists (amplitude, wavevector) pairs when u is a finite cosine sum.
    scale is the smallest feature length and extent the radius outside which |u| < 1e-16·bound.
    """

    def __init__(
        self,
        name,
        n,
        func,
        decay,
        fourier=None,
        exact_frac_image=None,
        laplacian=None,
        profile=None,
        modes=None,
        scale=1.0,
        extent=math.inf,
        bound=1.0,
        params=None,
    ):
        require(n in (1, 2, 3), f"Validation: dimension {n} not supported")
        self.name = name
        self.n = n
        self._func = func
        self.decay = decay
        self.fourier = fourier
        self.exact_frac_image = exact_frac_image
        self.laplacian = laplacian
        self.profile = profile
        self.modes = tuple((float(a), tuple(float(k) for k in kv)) for a, kv in modes) if modes else None
        self.scale = float(scale)
        self.extent = float(extent)
        self.bound = float(bound)
        self.params = dict(params or {})

    def __repr__(self):
        params = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"AnalyticField({self.name}({params}), n={self.n}, decay={self.decay})"

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        return np.asarray(self._func(as_points(x, self.n)), dtype=float)

    @property
    def radial(self):
        return self.profile is not None

    def laplacian_at(self, x):
        if self.laplacian is not None:
            return np.asarray(self.laplacian(as_points(x, self.n)), dtype=float)
        x = as_points(x, self.n)
        h = 1e-2 * self.scale
        total = np.zeros(x.shape[:-1])
        for axis in range(self.n):
            e = np.zeros(self.n)
            e[axis] = h
            total += (
                -self.eval(x + 2 * e) + 16 * self.eval(x + e) - 30 * self.eval(x)
                + 16 * self.eval(x - e) - self.eval(x - 2 * e)
            ) / (12 * h * h)
        return total

    def gradient_at(self, x):
        x = as_points(x, self.n)
        h = 1e-2 * self.scale
        grad = np.empty(x.shape)
        for axis in range(self.n):
            e = np.zeros(self.n)
            e[axis] = h
            grad[..., axis] = (
                -self.eval(x + 2 * e) + 8 * self.eval(x + e) - 8 * self.eval(x - e) + self.eval(x - 2 * e)
            ) / (12 * h)
        return grad

    def check_fourier(self):
        """Returns |u(0) − (2π)^{-n}∫û| computed by radial quadrature, None without a transform"""
        if self.fourier is None:
            return None
        edges = np.concatenate([uniform_edges(0.0, 40.0 / self.scale, 0.5 / self.scale)])
        r, w = panel_nodes(edges)
        direction = np.zeros(self.n)
        direction[0] = 1.0
        values = self.fourier(r[:, None] * direction)
        inverse = sphere_area(self.n) * np.sum(w * values * r ** (self.n - 1)) / (2 * math.pi) ** self.n
        return abs(float(self.eval(np.zeros(self.n))) - inverse)


def combine(fields, weights, name=None):
    """Linear combination Σ w_i u_i of fields of the same dimension"""
    fields = list(fields)
    weights = [float(w) for w in weights]
    n = fields[0].n
    require(all(f.n == n for f in fields), "Validation: combined fields must share the dimension")

    def func(x):
        return sum(w * f._func(x) for f, w in zip(fields, weights))

    def laplacian(x):
        return sum(w * f.laplacian_at(x) for f, w in zip(fields, weights))

    exact = None
    if all(f.exact_frac_image is not None for f in fields):

        def exact(s, x):
            return sum(w * f.exact_frac_image(s, x) for f, w in zip(fields, weights))

    modes = None
    if all(f.modes for f in fields):
        modes = [(w * a, k) for f, w in zip(fields, weights) for a, k in f.modes]

    decays = [f.decay for f in fields]
    if all(d.kind == "schwartz" for d in decays):
        decay = Decay.schwartz()
    elif any(d.kind == "tail_power" for d in decays):
        decay = Decay.tail_power(min(d.power for d in decays if d.kind == "tail_power"))
    else:
        decay = Decay.bounded()
    return AnalyticField(
        name or "+".join(f.name for f in fields),
        n,
        func,
        decay,
        exact_frac_image=exact,
        laplacian=laplacian,
        modes=modes,
        scale=min(f.scale for f in fields),
        extent=max(f.extent for f in fields),
        bound=sum(abs(w) * f.bound for f, w in zip(fields, weights)),
        params={"weights": weights},
    )


def shifted(field, offset, name=None):
    """Translate: returns x ↦ u(x − offset)"""
    offset = as_points(offset, field.n).reshape(field.n)
    norm = float(np.linalg.norm(offset))

    exact = None
    if field.exact_frac_image is not None:

        def exact(s, x):
            return field.exact_frac_image(s, as_points(x, field.n) - offset)

    return AnalyticField(
        name or f"{field.name}@{offset.tolist()}",
        field.n,
        lambda x: field._func(x - offset),
        field.decay,
        exact_frac_image=exact,
        laplacian=lambda x: field.laplacian_at(x - offset),
        scale=field.scale,
        extent=field.extent + norm,
        bound=field.bound,
        params=dict(field.params, offset=offset.tolist()),
    )


def _radius(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def gaussian(sigma=1.0, n=1):
    """u(x) = exp(−|x|²/σ²)"""
    sigma = float(sigma)
    require(sigma > 0, "Validation: sigma must be positive")

    def profile(r):
        return np.exp(-((r / sigma) ** 2))

    def laplacian(x):
        r2 = np.sum(x * x, axis=-1)
        return np.exp(-r2 / sigma**2) * (4 * r2 / sigma**4 - 2 * n / sigma**2)

    def fourier(xi):
        return (math.sqrt(math.pi) * sigma) ** n * np.exp(-(sigma**2) * np.sum(xi * xi, axis=-1) / 4)

    def exact_frac_image(s, x):
        r2 = np.sum(as_points(x, n) ** 2, axis=-1) / sigma**2
        factor = 4**s * gamma(n / 2 + s) / gamma(n / 2) / sigma ** (2 * s)
        return factor * special.hyp1f1(n / 2 + s, n / 2, -r2)

    return AnalyticField(
        "gaussian",
        n,
        lambda x: profile(_radius(x)),
        Decay.schwartz(),
        fourier=fourier,
        exact_frac_image=exact_frac_image,
        laplacian=laplacian,
        profile=profile,
        scale=sigma,
        extent=6.1 * sigma,
        params={"sigma": sigma},
    )


def plane_wave(k=1.0, n=1):
    """u(x) = cos(k x₁)"""
    k = float(k)
    wavevector = (k,) + (0.0,) * (n - 1)

    def exact_frac_image(s, x):
        return abs(k) ** (2 * s) * np.cos(k * as_points(x, n)[..., 0])

    return AnalyticField(
        "plane_wave",
        n,
        lambda x: np.cos(k * x[..., 0]),
        Decay.bounded(),
        exact_frac_image=exact_frac_image,
        laplacian=lambda x: -(k**2) * np.cos(k * x[..., 0]),
        modes=[(1.0, wavevector)],
        scale=1.0 / max(abs(k), 1e-12) if k else 1.0,
        params={"k": k},
    )


def constant(c=1.0, n=1):
    c = float(c)

    def exact_frac_image(s, x):
        return np.zeros(as_points(x, n).shape[:-1])

    return AnalyticField(
        "constant",
        n,
        lambda x: np.full(x.shape[:-1], c),
        Decay.bounded(),
        exact_frac_image=exact_frac_image,
        laplacian=lambda x: np.zeros(x.shape[:-1]),
        modes=[(c, (0.0,) * n)],
        bound=abs(c),
        params={"c": c},
    )


def _bump_profile(r, r0):
    q = np.minimum((np.asarray(r, dtype=float) / r0) ** 2, 1.0)
    inside = q < 1.0
    out = np.zeros_like(q)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
    return out


def bump(r0=1.0, n=1):
    """u(x) = exp(1 − 1/(1 − |x|²/r0²)) inside the ball of radius r0, 0 outside"""
    r0 = float(r0)
    require(r0 > 0, "Validation: r0 must be positive")

    def profile(r):
        return _bump_profile(r, r0)

    def laplacian(x):
        q = np.sum(x * x, axis=-1) / r0**2
        out = np.zeros_like(q)
        inside = q < 1.0
        qi = q[inside]
        phi = np.exp(1.0 - 1.0 / (1.0 - qi))
        d1 = -phi / (1.0 - qi) ** 2
        d2 = phi / (1.0 - qi) ** 4 - 2 * phi / (1.0 - qi) ** 3
        out[inside] = d2 * 4 * qi / r0**2 + 2 * n * d1 / r0**2
        return out

    return AnalyticField(
        "bump",
        n,
        lambda x: profile(_radius(x)),
        Decay.schwartz(),
        laplacian=laplacian,
        profile=profile,
        scale=r0 / 8,
        extent=r0,
        params={"r0": r0},
    )


def witch(n=1):
    """u(x) = (1 + |x|²)^{-(n+1)/2}, a tail_power(n+1) fixture with transform ∝ e^{-|ξ|}"""
    p = (n + 1) / 2

    def profile(r):
        return (1.0 + np.asarray(r, dtype=float) ** 2) ** (-p)

    def laplacian(x):
        r2 = np.sum(x * x, axis=-1)
        return -2 * p * n * (1 + r2) ** (-p - 1) + 4 * p * (p + 1) * r2 * (1 + r2) ** (-p - 2)

    def fourier(xi):
        return math.pi**p / gamma(p) * np.exp(-_radius(xi))

    exact = None
    if n == 1:

        def exact(s, x):
            x = as_points(x, 1)[..., 0]
            return gamma(1 + 2 * s) * (1 + x * x) ** (-(1 + 2 * s) / 2) * np.cos((1 + 2 * s) * np.arctan(x))

    return AnalyticField(
        "witch",
        n,
        lambda x: profile(_radius(x)),
        Decay.tail_power(n + 1),
        fourier=fourier,
        exact_frac_image=exact,
        laplacian=laplacian,
        profile=profile,
        scale=0.5,
        params={},
    )


def abs_power(alpha, n=1):
    """u(x) = |x|^α, a growing field used by the L_s admissibility check"""
    alpha = float(alpha)

    def profile(r):
        return np.asarray(r, dtype=float) ** alpha

    return AnalyticField(
        "abs_power",
        n,
        lambda x: profile(_radius(x)),
        Decay.tail_power(-alpha),
        profile=profile,
        scale=1.0,
        bound=math.inf,
        params={"alpha": alpha},
    )


def abs_power_bump(alpha, r0=1.0, n=1):
    """u(x) = |x|^α · bump(r0), Hölder exponent α at the origin, compact support"""
    alpha = float(alpha)
    r0 = float(r0)

    def profile(r):
        return np.asarray(r, dtype=float) ** alpha * _bump_profile(r, r0)

    return AnalyticField(
        "abs_power_bump",
        n,
        lambda x: profile(_radius(x)),
        Decay.schwartz(),
        profile=profile,
        scale=r0 / 16,
        extent=r0,
        params={"alpha": alpha, "r0": r0},
    )


def holder_sine(alpha, frequency=1.0, n=1):
    """u(x) = |sin(λx₁)|^α with λ = frequency: a planted Hölder exponent α at multiples of π/λ"""
    alpha = float(alpha)
    frequency = float(frequency)
    require(frequency > 0, "Validation: frequency must be positive")
    return AnalyticField(
        "holder_sine",
        n,
        lambda x: np.abs(np.sin(frequency * x[..., 0])) ** alpha,
        Decay.bounded(),
        scale=0.05 / frequency,
        params={"alpha": alpha, "frequency": frequency},
    )


def lacunary(alpha, base=2, terms=8, n=1):
    """Truncated Weierstrass sum Σ_j base^{-jα} cos(base^j x₁)"""
    alpha = float(alpha)
    base = int(base)
    frequencies = [float(base**j) for j in range(int(terms))]
    modes = [(f ** (-alpha), (f,) + (0.0,) * (n - 1)) for f in frequencies]

    def func(x):
        return sum(a * np.cos(k[0] * x[..., 0]) for a, k in modes)

    def exact_frac_image(s, x):
        x = as_points(x, n)
        return sum(a * k[0] ** (2 * s) * np.cos(k[0] * x[..., 0]) for a, k in modes)

    return AnalyticField(
        "lacunary",
        n,
        func,
        Decay.bounded(),
        exact_frac_image=exact_frac_image,
        laplacian=lambda x: sum(-a * k[0] ** 2 * np.cos(k[0] * x[..., 0]) for a, k in modes),
        modes=modes,
        scale=1.0 / frequencies[-1],
        bound=sum(a for a, _ in modes),
        params={"alpha": alpha, "base": base, "terms": int(terms)},
    )


def sign_bump(r0=1.0, n=1):
    """u(x) = sign(x₁)·bump(r0): bounded with a jump across x₁ = 0"""
    r0 = float(r0)
    return AnalyticField(
        "sign_bump",
        n,
        lambda x: np.sign(x[..., 0]) * _bump_profile(_radius(x), r0),
        Decay.schwartz(),
        scale=r0 / 8,
        extent=r0,
        params={"r0": r0},
    )


def pinned_gaussian(x0, center, sigma=1.0, amplitude=1.0, n=1):
    """u(x) = A·exp(−|x−c|²/σ²)·|x−x0|², nonnegative with u(x0) = 0"""
    x0 = as_points(x0, n).reshape(n)
    center = as_points(center, n).reshape(n)
    sigma = float(sigma)
    amplitude = float(amplitude)

    def func(x):
        return amplitude * np.exp(-np.sum((x - center) ** 2, axis=-1) / sigma**2) * np.sum(
            (x - x0) ** 2, axis=-1
        )

    def laplacian(x):
        dc = x - center
        d0 = x - x0
        g = amplitude * np.exp(-np.sum(dc * dc, axis=-1) / sigma**2)
        q = np.sum(d0 * d0, axis=-1)
        return g * (
            q * (4 * np.sum(dc * dc, axis=-1) / sigma**4 - 2 * n / sigma**2)
            - 8 * np.sum(dc * d0, axis=-1) / sigma**2
            + 2 * n
        )

    return AnalyticField(
        "pinned_gaussian",
        n,
        func,
        Decay.schwartz(),
        laplacian=laplacian,
        scale=sigma / 2,
        extent=float(np.linalg.norm(center)) + 7.0 * sigma,
        bound=amplitude * (sigma**2 + float(np.linalg.norm(center - x0)) ** 2) * 2,
        params={"x0": x0.tolist(), "center": center.tolist(), "sigma": sigma, "amplitude": amplitude},
    )


def dipole_bump(r0=1.0, shift=1.5, n=1):
    """bump − bump shifted by `shift` along x₁, a zero-mean compactly supported fixture"""
    offset = np.zeros(n)
    offset[0] = float(shift)
    base = bump(r0, n)
    return combine([base, shifted(base, offset)], [1.0, -1.0], name="dipole_bump")


FIXTURES = {
    "gaussian": gaussian,
    "plane_wave": plane_wave,
    "constant": constant,
    "bump": bump,
    "witch": witch,
    "abs_power": abs_power,
    "abs_power_bump": abs_power_bump,
    "holder_sine": holder_sine,
    "lacunary": lacunary,
    "sign_bump": sign_bump,
    "pinned_gaussian": pinned_gaussian,
    "dipole_bump": dipole_bump,
}


def make_fixture(name, n=1, **params):
    require(name in FIXTURES, f"Validation: unknown fixture {name!r}")
    return FIXTURES[name](n=n, **params)


def _is_power_of_two(value):
    return value >= 1 and (value & (value - 1)) == 0


class GridField:
    """Samples of a function on the periodic box [−L, L)^n, M points per axis, immutable"""

    def __init__(self, values, L, source=None, s=None, meta=None):
        values = np.array(values, dtype=float)
        n = values.ndim
        require(n in (1, 2, 3), f"Validation: dimension {n} not supported")
        M = values.shape[0]
        require(all(dim == M for dim in values.shape), "Validation: grid must have M points on every axis")
        require(M >= 16 and _is_power_of_two(M), f"Validation: M={M} must be a power of two >= 16")
        require(L > 0 and math.isfinite(L), "Validation: L must be positive")
        require(np.all(np.isfinite(values)), "Validation: grid values must be finite")
        values.setflags(write=False)
        self.values = values
        self.L = float(L)
        self.source = source
        self.s = s
        self.meta = dict(meta or {})

    def __repr__(self):
        return f"GridField(n={self.n}, L={self.L:g}, M={self.M}, source={self.source})"

    @property
    def n(self):
        return self.values.ndim

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def h(self):
        return 2 * self.L / self.M

    @property
    def axis(self):
        return -self.L + self.h * np.arange(self.M)

    def points(self):
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def wavenumbers(self):
        """ξ_m = π m / L with m ∈ [−M/2, M/2) in FFT order"""
        return math.pi / self.L * np.fft.fftfreq(self.M, 1.0 / self.M)

    def xi_squared(self):
        k = self.wavenumbers
        mesh = np.meshgrid(*([k * k] * self.n), indexing="ij")
        return sum(mesh)

    def fourier(self):
        return np.fft.fftn(self.values)

    def with_values(self, values, source=None, meta=None):
        return GridField(values, self.L, source=source or self.source, s=self.s, meta=meta)

    def apply_multiplier(self, multiplier, source=None, meta=None):
        values = np.fft.ifftn(self.fourier() * multiplier).real
        return self.with_values(values, source, meta)

    def derivative(self, axis=0, order=1):
        """Spectral derivative; the Nyquist mode is dropped for odd orders"""
        k = self.wavenumbers.astype(complex)
        if order % 2:
            k[self.M // 2] = 0.0
        shape = [1] * self.n
        shape[axis] = self.M
        factor = ((1j * k) ** order).reshape(shape)
        return self.with_values(np.fft.ifftn(self.fourier() * factor).real)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))

    def l2_norm_squared(self):
        return float(np.sum(self.values**2)) * self.h**self.n

    def index_of(self, point):
        """Index of the grid node closest to point (wrapped into the box)"""
        point = as_points(point, self.n).reshape(self.n)
        return tuple(int(round((p + self.L) / self.h)) % self.M for p in point)

    def at(self, point):
        return float(self.values[self.index_of(point)])

    def boundary_magnitude(self):
        peak = 0.0
        for axis in range(self.n):
            first = np.take(self.values, 0, axis=axis)
            peak = max(peak, float(np.max(np.abs(first))))
        return peak

    def shifted(self, cells, axis=0):
        return self.with_values(np.roll(self.values, cells, axis=axis))


def sample(f, L, M):
    """Evaluates f on the [−L, L)^n grid with M points per axis"""
    require(M >= 16 and _is_power_of_two(int(M)), f"Validation: M={M} must be a power of two >= 16")
    require(L > 0, "Validation: L must be positive")
    axis = -L + (2 * L / M) * np.arange(M)
    mesh = np.meshgrid(*([axis] * f.n), indexing="ij")
    values = f.eval(np.stack(mesh, axis=-1))
    require(np.all(np.isfinite(values)), f"Validation: {f.name} is not finite on the grid")
    return GridField(values, L, source=f.name)


def _ls_tail(decay, edge_value, R, n, s):
    """Integral of ω|u(R)|(R/r)^q r^{n-1}/r^{n+2s} over r > R, q = 0 for bounded fields"""
    q = decay.power if decay.kind == "tail_power" else 0.0
    if q + 2 * s <= 0:
        return math.inf if edge_value else 0.0
    return sphere_area(n) * edge_value * R ** (-2 * s) / (q + 2 * s)


def ls_norm(f, s):
    """∫ |u(x)| / (1 + |x|^{n+2s}) dx; math.inf when the tail is not integrable"""
    s = float(s)
    require(0 <= s <= 1, "Validation: ls_norm requires s in [0, 1]")
    if isinstance(f, GridField):
        return _ls_norm_grid(f, s)
    if not f.decay.ls_finite(s):
        return math.inf
    n = f.n
    p = n + 2 * s
    inner = f.extent if math.isfinite(f.extent) else 20.0 * max(1.0, f.scale)
    edges = uniform_edges(0.0, inner, f.scale / 2)
    if not math.isfinite(f.extent):
        edges = np.concatenate([edges, graded_edges(inner, FAR_RADIUS)[1:]])
    r, w = panel_nodes(edges)
    if f.radial:
        shell = sphere_area(n) * np.abs(f.profile(r))
    else:
        directions, weights = sphere_nodes(n)
        shell = np.abs(f.eval(r[:, None, None] * directions[None, :, :])) @ weights
    total = float(np.sum(w * shell * r ** (n - 1) / (1 + r**p)))
    if not math.isfinite(f.extent):
        R = float(edges[-1])
        total += _ls_tail(f.decay, _shell_mean(f, R), R, n, s)
    return total


def _shell_mean(f, R):
    if f.radial:
        return float(np.abs(f.profile(np.array([R])))[0])
    directions, weights = sphere_nodes(f.n)
    return float(np.abs(f.eval(R * directions)) @ weights) / sphere_area(f.n)


def _ls_norm_grid(g, s):
    p = g.n + 2 * s
    r = np.sqrt(np.sum(g.points() ** 2, axis=-1))
    total = float(np.sum(np.abs(g.values) / (1 + r**p))) * g.h**g.n
    edge = g.boundary_magnitude()
    if edge == 0:
        return total
    if s == 0:
        return math.inf
    return total + edge * sphere_area(g.n) * g.L ** (-2 * s) / (2 * s)


def save_field(g, path, rule=RULE_GRID, extra=b""):
    s = float(g.s) if g.s is not None else 0.0
    header = HEADER.pack(MAGIC, FORMAT_VERSION, g.n, rule, g.M, g.L, s)
    payload = np.ascontiguousarray(g.values, dtype="<f8").tobytes()
    return atomic_write(path, header + payload + extra, mode="wb")


def read_header(data):
    if len(data) < HEADER.size:
        raise FieldFormatError("Header mismatch: file shorter than the 32-byte header")
    magic, version, n, rule, M, L, s = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"Header mismatch: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"Header mismatch: unsupported version {version}")
    require(n in (1, 2, 3), f"Validation: dimension {n} not supported")
    require(M >= 16 and _is_power_of_two(M), f"Validation: M={M} must be a power of two >= 16")
    return n, rule, M, L, s


def read_values(data, offset, count, shape):
    end = offset + 8 * count
    if len(data) < end:
        raise FieldFormatError("Header mismatch: payload truncated")
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float), end


def load_field(path):
    with open(path, "rb") as f:
        data = f.read()
    n, rule, M, L, s = read_header(data)
    values, end = read_values(data, HEADER.size, M**n, (M,) * n)
    if rule == RULE_GRID and end != len(data):
        raise FieldFormatError("Header mismatch: trailing bytes after the payload")
    return GridField(values, L, source=str(path), s=s or None)


def export_csv(g, path=None):
    """One row per grid point: coordinates then value. Returns the text when path is None."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(g.n)] + ["value"])
    points = g.points().reshape(-1, g.n)
    for point, value in zip(points, g.values.ravel()):
        writer.writerow([format_float(c) for c in point] + [format_float(value)])
    text = buffer.getvalue()
    if path is None:
        return text
    return atomic_write(path, text)


__all__ = [
    "AnalyticField",
    "Decay",
    "GridField",
    "combine",
    "export_csv",
    "ls_norm",
    "load_field",
    "make_fixture",
    "sample",
    "save_field",
    "shifted",
]
