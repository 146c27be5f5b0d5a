"""Hölder–Zygmund regularity through the heat semigroup: the Λ^α seminorm
sup t^{k−α/2}|∂_t^k e^{tΔ}u|, exponent estimation from its small-t growth, classical difference
quotients, and the mapping checks for (−Δ)^{±s} between Λ spaces."""
import logging
import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from .errors import FitResidualError, require
from .fields import AnalyticField, GridField, sample
from .heat import heat_apply
from .operator import frac_apply_spectral, frac_inverse_semigroup
from .utils import thread_map

logger = logging.getLogger(__name__)

T_RANGE = (1e-6, 1e2)
T_PER_DECADE = 25
FIT_DECADES = 2
FIT_TOLERANCE = 0.1
LOCAL_DECADES = 0.5
MIN_DECADES = 1
DEPARTURE = 0.1
REFINE_POINTS = 21
STABILITY_TOLERANCE = 0.1


def default_t_grid():
    decades = math.log10(T_RANGE[1] / T_RANGE[0])
    return np.logspace(math.log10(T_RANGE[0]), math.log10(T_RANGE[1]), int(round(decades * T_PER_DECADE)) + 1)


def minimal_k(alpha):
    return int(math.floor(alpha / 2)) + 1


def _probe_sup(u, t, k, x_probe):
    values = heat_apply(u, t, k).values
    if x_probe is not None:
        values = np.array([values[u.index_of(x)] for x in x_probe])
    return float(np.max(np.abs(values)))


def semigroup_profile(u: GridField, k, t_grid, x_probe=None):
    """sup over the probes of |∂_t^k e^{tΔ}u| for every t in t_grid"""
    return np.array(thread_map(lambda t: _probe_sup(u, t, k, x_probe), list(t_grid)))


def lambda_seminorm(u: GridField, alpha, k=None, t_grid=None, x_probe=None, refine=True):
    """max over (t, x) probes of t^{k−α/2}|∂_t^k e^{tΔ}u(x)|.

    With refine=True the maximizing t is re-searched on a finer log grid between its neighbours.
    """
    alpha = float(alpha)
    require(alpha > 0, "Validation: alpha must be positive")
    k = minimal_k(alpha) if k is None else int(k)
    require(k >= minimal_k(alpha), f"Validation: k={k} must be >= floor(alpha/2) + 1")
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    weights = t_grid ** (k - alpha / 2)
    scaled = weights * semigroup_profile(u, k, t_grid, x_probe)
    best = int(np.argmax(scaled))
    value = float(scaled[best])
    if refine and value > 0 and len(t_grid) > 2:
        lo = t_grid[max(best - 1, 0)]
        hi = t_grid[min(best + 1, len(t_grid) - 1)]
        fine = np.geomspace(lo, hi, REFINE_POINTS)
        value = max(value, float(np.max(fine ** (k - alpha / 2) * semigroup_profile(u, k, fine, x_probe))))
    logger.debug("lambda_seminorm alpha=%g k=%d: %.6g", alpha, k, value)
    return value


class RegularityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_est: float
    slope: float
    fit_residual: float
    seminorm_semigroup: float
    seminorm_zygmund: float
    k_used: int
    t_window: List[float]
    probe_t: List[float]
    probe_x: Optional[List[List[float]]] = None


def fit_window(u: GridField, t_grid):
    lo = u.h**2
    hi = lo * 10**FIT_DECADES
    return [float(t) for t in t_grid if lo <= t <= hi]


def local_exponents(window, profile, k):
    """2(k + slope) of half-decade least-squares fits sliding along the window, keyed by the index
    of each sub-window's centre"""
    log_t = np.log(window)
    log_p = np.log(profile)
    density = (len(window) - 1) / math.log10(window[-1] / window[0])
    span = max(3, int(round(LOCAL_DECADES * density)) + 1)
    exponents = []
    for start in range(len(window) - span + 1):
        part = slice(start, start + span)
        slope = float(np.polyfit(log_t[part], log_p[part], 1)[0])
        exponents.append((start + span // 2, 2 * (k + slope)))
    return exponents


def capped_length(window, profile, k):
    """Number of leading window points to fit.

    The window ends at the centre of the first sub-window whose local exponent falls DEPARTURE
    below the largest one seen so far. A departure inside the first MIN_DECADES leaves the window
    whole, so the residual check sees the bend.
    """
    floor = window[0] * 10**MIN_DECADES * (1 + 1e-9)
    running = -math.inf
    for centre, alpha in local_exponents(window, profile, k):
        running = max(running, alpha)
        if alpha < running - DEPARTURE:
            if window[centre] < floor:
                return len(window)
            return centre + 1
    return len(window)


def estimate_alpha(u: GridField, k=1, t_grid=None, x_probe=None):
    """Least-squares slope of log sup|∂_t^k e^{tΔ}u| against log t over up to two decades above h²;
    alpha_est = 2(k + slope).
    The window is cut by capped_length where the local exponent stops being steady."""
    k = int(k)
    require(k >= 1, "Validation: k must be >= 1")
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    window = fit_window(u, t_grid)
    require(len(window) >= 3, "Validation: t grid has fewer than three points in the fit window")
    profile = semigroup_profile(u, k, window, x_probe)
    require(np.all(profile > 0), "Validation: the semigroup derivative vanishes; u has no finite exponent")
    keep = capped_length(window, profile, k)
    if keep < len(window):
        logger.debug("estimate_alpha %s: fit window capped at t=%.3g", u.source, window[keep - 1])
    window, profile = window[:keep], profile[:keep]
    log_t = np.log(window)
    log_p = np.log(profile)
    slope, intercept = np.polyfit(log_t, log_p, 1)
    residual = float(np.sqrt(np.mean((log_p - (slope * log_t + intercept)) ** 2)))
    if residual > FIT_TOLERANCE:
        raise FitResidualError(
            f"log-log profile is not affine over the fit window (rms residual {residual:.3g})"
        )
    alpha = 2 * (k + float(slope))
    logger.info("estimate_alpha %s k=%d: slope %.4f, alpha %.4f", u.source, k, slope, alpha)
    seminorm = lambda_seminorm(u, alpha, k, t_grid, x_probe) if 0 < alpha < 2 * k else math.inf
    return RegularityReport(
        alpha_est=alpha,
        slope=float(slope),
        fit_residual=residual,
        seminorm_semigroup=seminorm,
        seminorm_zygmund=zygmund_seminorm(u, 1),
        k_used=k,
        t_window=[window[0], window[-1]],
        probe_t=[float(t) for t in t_grid],
        probe_x=None if x_probe is None else [list(np.atleast_1d(x).astype(float)) for x in x_probe],
    )


def _dyadic_cells(u):
    cells = []
    c = 1
    while c * u.h <= u.L / 4:
        cells.append(c)
        c *= 2
    return cells


def zygmund_seminorm(u: GridField, order=1):
    """max over x and dyadic h ∈ [grid step, L/4] of |v(x+h) + v(x−h) − 2v(x)|/h,
    v the spectral derivative of order k−1 along each axis."""
    order = int(order)
    require(order >= 1, "Validation: order must be >= 1")
    best = 0.0
    for axis in range(u.n):
        v = u.derivative(axis, order - 1).values if order > 1 else u.values
        for c in _dyadic_cells(u):
            second = np.roll(v, c, axis=axis) + np.roll(v, -c, axis=axis) - 2 * v
            best = max(best, float(np.max(np.abs(second))) / (c * u.h))
    return best


def holder_seminorm(u: GridField, alpha):
    """max over x and dyadic h of |u(x+h) − u(x)|/h^α"""
    alpha = float(alpha)
    require(0 < alpha <= 1, "Validation: holder_seminorm requires 0 < alpha <= 1")
    best = 0.0
    for axis in range(u.n):
        for c in _dyadic_cells(u):
            step = np.roll(u.values, -c, axis=axis) - u.values
            best = max(best, float(np.max(np.abs(step))) / (c * u.h) ** alpha)
    return best


# Mapping checks


class MappingRow(BaseModel):
    fixture: str
    input_seminorm: float
    output_seminorm: float
    ratio: float
    zygmund: Optional[float] = None


class MappingTable(BaseModel):
    mode: str
    s: float
    alpha: float
    output_alpha: float
    rows: List[MappingRow]
    sup_ratio: float
    refined_sup_ratio: Optional[float] = None

    @property
    def stable(self):
        if self.refined_sup_ratio is None:
            return None
        return abs(self.refined_sup_ratio - self.sup_ratio) <= STABILITY_TOLERANCE * self.sup_ratio


def _output_alpha(mode, s, alpha):
    if mode == "holder_forward":
        require(alpha > 2 * s, "Validation: holder_forward needs alpha > 2s")
        return alpha - 2 * s
    if mode == "schauder_bounded":
        return 2 * s
    return alpha + 2 * s


def _mapping_row(name, u, s, alpha, output_alpha, mode, t_grid):
    if mode == "holder_forward":
        image = frac_apply_spectral(u, s)
    else:
        image = frac_inverse_semigroup(u, s)
    if mode == "schauder_bounded":
        source_norm = u.sup
    else:
        source_norm = lambda_seminorm(u, alpha, t_grid=t_grid)
    target_norm = lambda_seminorm(image, output_alpha, t_grid=t_grid)
    zygmund = None
    if abs(output_alpha - round(output_alpha)) < 1e-12:
        zygmund = zygmund_seminorm(image, int(round(output_alpha)))
    ratio = target_norm / source_norm if source_norm else math.nan
    return MappingRow(
        fixture=name, input_seminorm=source_norm, output_seminorm=target_norm, ratio=ratio, zygmund=zygmund
    )


def _sup_ratio(rows):
    ratios = [row.ratio for row in rows if math.isfinite(row.ratio)]
    return max(ratios) if ratios else math.nan


def verify_mapping(
    fixtures,
    s,
    alpha,
    mode: Literal["holder_forward", "schauder_inverse", "schauder_bounded"] = "holder_forward",
    grid=(math.pi, 256),
    t_grid=None,
    refine_grid=True,
):
    """Empirical ratios ‖(−Δ)^{±s}u‖_{Λ^{α∓2s}} / ‖u‖_{Λ^α} over a fixture set.

    fixtures: AnalyticField or GridField items; analytic ones are sampled on grid = (L, M) and, with
    refine_grid, again on (L, 2M) to report the refined sup-ratio. schauder_bounded measures the
    input by its sup norm and lands in Λ^{2s}.
    """
    s = float(s)
    alpha = float(alpha)
    require(0 < s < 1, "Validation: verify_mapping requires 0 < s < 1")
    output_alpha = _output_alpha(mode, s, alpha)
    L, M = grid

    def table(M):
        rows = []
        for f in fixtures:
            if isinstance(f, AnalyticField):
                u, name = sample(f, L, M), f.name
            else:
                u, name = f, f.source or "grid"
            rows.append(_mapping_row(name, u, s, alpha, output_alpha, mode, t_grid))
        return rows

    rows = table(M)
    refined = None
    if refine_grid and all(isinstance(f, AnalyticField) for f in fixtures):
        refined = _sup_ratio(table(2 * M))
    result = MappingTable(
        mode=mode,
        s=s,
        alpha=alpha,
        output_alpha=output_alpha,
        rows=rows,
        sup_ratio=_sup_ratio(rows),
        refined_sup_ratio=refined,
    )
    logger.info("verify_mapping %s s=%g alpha=%g: sup ratio %.6g", mode, s, alpha, result.sup_ratio)
    return result


__all__ = [
    "RegularityReport",
    "MappingTable",
    "estimate_alpha",
    "holder_seminorm",
    "lambda_seminorm",
    "verify_mapping",
    "zygmund_seminorm",
]
