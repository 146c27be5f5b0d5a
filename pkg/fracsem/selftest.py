"""Named invariant suite behind the `selftest` command. Each check is small enough to finish in a
few seconds and reports (passed, measured, tolerance)."""
import logging
import math

import numpy as np
from pydantic import BaseModel

from . import extension, operator, regularity
from .errors import FracsemError
from .fields import gaussian, plane_wave, sample
from .heat import heat_apply
from .numerics import QuadratureSpec, c_ns, c_ns_gamma2, cs_neumann, gamma

logger = logging.getLogger(__name__)

SCALAR_LAMBDAS = (0.5, 1.0, 2.0, 10.0)
SCALAR_ORDERS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def _relative(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def scalar_identity_positive(spec, seed):
    lam = np.array(SCALAR_LAMBDAS)
    worst = 0.0
    for s in SCALAR_ORDERS:
        value = operator.semigroup_multiplier(lam, s, spec)[0] / gamma(-s)
        worst = max(worst, float(np.max(np.abs(value - lam**s) / lam**s)))
    return worst, 1e-8


def scalar_identity_negative(spec, seed):
    lam = np.array(SCALAR_LAMBDAS)
    worst = 0.0
    for s in SCALAR_ORDERS:
        value = operator.semigroup_multiplier(lam, -s, spec)[0] / gamma(s)
        worst = max(worst, float(np.max(np.abs(value - lam ** (-s)) * lam**s)))
    return worst, 1e-8


def constant_two_forms(spec, seed):
    worst = max(_relative(c_ns_gamma2(n, s), c_ns(n, s)) for n in (1, 2, 3) for s in SCALAR_ORDERS)
    return worst, 1e-12


def heat_kernel_identity(spec, seed):
    worst = 0.0
    for n in (1, 2, 3):
        for s in (0.25, 0.5, 0.75):
            lhs, rhs = operator.kernel_identity_check(n, s, 1.3, spec)
            worst = max(worst, _relative(lhs, rhs))
    return worst, 1e-8


def extension_kernel_normalization(spec, seed):
    worst = max(
        abs(extension.kernel_normalization(y, s, spec) - 1.0) for y in (0.1, 1.0, 10.0) for s in (0.2, 0.5, 0.8)
    )
    return worst, 1e-10


def bessel_identity(spec, seed):
    worst = 0.0
    for s in (0.3, 0.5, 0.7):
        for z in (0.5, 1.0, 4.0):
            lhs, rhs = extension.bessel_k_identity(s, z, spec)
            worst = max(worst, _relative(lhs, rhs))
    return worst, 1e-10


def semigroup_property(spec, seed):
    g = sample(gaussian(), 12.0, 128)
    twice = heat_apply(heat_apply(g, 0.3), 0.5)
    once = heat_apply(g, 0.8)
    return float(np.max(np.abs(twice.values - once.values))), 1e-13


def spectral_matches_semigroup(spec, seed):
    g = sample(gaussian(), 12.0, 128)
    a = operator.frac_apply_spectral(g, 0.5)
    b = operator.frac_apply_semigroup(g, 0.5, spec=spec)
    return float(np.max(np.abs(a.values - b.values))), 1e-8


def inverse_round_trip(spec, seed):
    g = sample(gaussian(), 12.0, 128)
    f = g.with_values(g.values - g.mean)
    inverse = operator.frac_inverse_semigroup(f, 0.3, spec=spec)
    back = operator.frac_apply_spectral(inverse, 0.3)
    return float(np.max(np.abs(back.values - f.values))), 1e-8


def analytic_semigroup_route(spec, seed):
    u = gaussian()
    worst = 0.0
    for x in (0.0, 0.7):
        value = operator.frac_apply_semigroup(u, 0.5, x, spec)
        worst = max(worst, abs(value - float(u.exact_frac_image(0.5, x))))
    return worst, 1e-6


def maximum_principle(spec, seed):
    worst = -math.inf
    for u, x0 in operator.random_pinned_fixtures(3, seed=seed):
        worst = max(worst, operator.max_principle_value(u, x0, 0.5, spec))
    return max(worst, 0.0), 1e-12


def neumann_constant(spec, seed):
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extension.extend(g, 0.5, spec=spec)
    limit = extension.neumann_limit(ext)
    return _relative(limit.constant_ratio, cs_neumann(0.5)), 1e-2


def seminorm_forms(spec, seed):
    g = sample(gaussian(), 12.0, 128)
    return extension.hs_seminorm(g, 0.4).relative_gap, 1e-2


def mode_seminorm_scaling(spec, seed):
    alpha = 0.6
    one = regularity.lambda_seminorm(sample(plane_wave(1.0), math.pi, 64), alpha)
    two = regularity.lambda_seminorm(sample(plane_wave(2.0), math.pi, 64), alpha)
    return _relative(two / one, 2**alpha), 1e-3


CHECKS = {
    "scalar_identity_positive": scalar_identity_positive,
    "scalar_identity_negative": scalar_identity_negative,
    "constant_two_forms": constant_two_forms,
    "heat_kernel_identity": heat_kernel_identity,
    "extension_kernel_normalization": extension_kernel_normalization,
    "bessel_identity": bessel_identity,
    "semigroup_property": semigroup_property,
    "spectral_matches_semigroup": spectral_matches_semigroup,
    "inverse_round_trip": inverse_round_trip,
    "analytic_semigroup_route": analytic_semigroup_route,
    "maximum_principle": maximum_principle,
    "neumann_constant": neumann_constant,
    "seminorm_forms": seminorm_forms,
    "mode_seminorm_scaling": mode_seminorm_scaling,
}


def run_checks(spec=None, seed=0, names=None):
    spec = spec or QuadratureSpec()
    results = []
    for name in names or sorted(CHECKS):
        try:
            measured, tolerance = CHECKS[name](spec, seed)
            passed = bool(measured <= tolerance)
            results.append(CheckResult(name=name, passed=passed, measured=measured, tolerance=tolerance))
        except FracsemError as err:
            results.append(CheckResult(name=name, passed=False, measured=math.nan, tolerance=0.0, detail=str(err)))
        logger.info("selftest %s: %s", name, "pass" if results[-1].passed else "FAIL")
    return results
