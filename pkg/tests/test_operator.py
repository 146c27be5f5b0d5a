"""Tests for (−Δ)^{±s}: cross-route agreement, eigenfunctions, kernels and diagnostics"""

import math
from collections import namedtuple

import mpmath
import numpy as np
import pytest

from fracsem.errors import DivergenceError, DomainError, RemainderTooLargeError, ZeroMeanViolation
from fracsem.fields import abs_power, bump, constant, dipole_bump, gaussian, plane_wave, sample, witch
from fracsem.numerics import c_ns, gamma
from fracsem.operator import (
    FracRoute,
    compare_routes,
    frac_apply_pointwise,
    frac_apply_semigroup,
    frac_apply_spectral,
    frac_inverse_semigroup,
    fractional_heat,
    kernel_identity_check,
    limit_diagnostics,
    max_principle_value,
    random_pinned_fixtures,
    riesz_convolve,
    riesz_kernel,
    semigroup_multiplier,
    spectral_tail,
    torus_image_correction,
)

from . import TEST_VARIANTS

TEnv = namedtuple("TEnv", "kind frac_at tol")

BOX = (12.0, 256)
POINTS = [0.0, 0.375, 1.125, 2.25]


@pytest.fixture(params=TEST_VARIANTS)
def tenv(request):
    if request.param == "spectral":

        def frac_at(u, s, x):
            g = sample(u, *BOX)
            value = frac_apply_spectral(g, s).at(x)
            return value - torus_image_correction(u, x, s, BOX[0])

        return TEnv(kind="spectral", frac_at=frac_at, tol=1e-6)
    elif request.param == "semigroup":
        return TEnv(kind="semigroup", frac_at=lambda u, s, x: frac_apply_semigroup(u, s, x), tol=1e-6)
    elif request.param == "pointwise":
        return TEnv(kind="pointwise", frac_at=lambda u, s, x: frac_apply_pointwise(u, x, s), tol=1e-6)
    raise ValueError(f"Unknown variant {request.param}")


def gaussian_image(s, x):
    """(−Δ)^s e^{−x²} = 4^s Γ(1/2 + s)/Γ(1/2) ₁F₁(1/2 + s; 1/2; −x²), evaluated with mpmath"""
    value = mpmath.power(4, s) * mpmath.gamma(0.5 + s) / mpmath.gamma(0.5) * mpmath.hyp1f1(0.5 + s, 0.5, -(x**2))
    return float(value)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_routes_reproduce_gaussian_image(tenv, s):
    u = gaussian()
    for x in POINTS:
        assert tenv.frac_at(u, s, x) == pytest.approx(gaussian_image(s, x), abs=tenv.tol)


def test_gaussian_image_spectral_integral(tenv):
    # (1/2π) ∫ |ξ| √π e^{−ξ²/4} dξ = 2/√π
    assert tenv.frac_at(gaussian(), 0.5, 0.0) == pytest.approx(2 / math.sqrt(math.pi), abs=tenv.tol)


def test_tail_value_is_negative(tenv):
    value = tenv.frac_at(gaussian(), 0.5, 3.0)
    assert value < 0
    assert value == pytest.approx(gaussian_image(0.5, 3.0), abs=tenv.tol)


def test_frac_apply_spectral_eigenfunctions():
    g = sample(plane_wave(1.0), math.pi, 32)
    np.testing.assert_allclose(frac_apply_spectral(g, 0.5).values, g.values, atol=1e-13)
    g2 = sample(plane_wave(2.0), math.pi, 32)
    np.testing.assert_allclose(frac_apply_spectral(g2, 0.5).values, 2 * g2.values, atol=1e-13)
    g3 = sample(plane_wave(3.0), math.pi, 64)
    np.testing.assert_allclose(frac_apply_spectral(g3, 0.3).values, 3**0.6 * g3.values, atol=1e-12)
    assert np.all(frac_apply_spectral(sample(constant(4.0), math.pi, 16), 0.5).values == 0)


def test_frac_apply_spectral_rejects_order_one():
    g = sample(gaussian(), 12.0, 64)
    with pytest.raises(DomainError, match="0 < s < 1"):
        frac_apply_spectral(g, 1.0)


def test_spectral_composition():
    g = sample(gaussian(), 12.0, 256)
    twice = frac_apply_spectral(frac_apply_spectral(g, 0.3), 0.4)
    np.testing.assert_allclose(twice.values, frac_apply_spectral(g, 0.7).values, atol=1e-12)


def test_derivative_commutes():
    g = sample(gaussian(), 12.0, 256)
    a = frac_apply_spectral(g.derivative(), 0.4)
    b = frac_apply_spectral(g, 0.4).derivative()
    np.testing.assert_allclose(a.values, b.values, atol=1e-10)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_semigroup_multiplier_scalar_identities(s):
    lam = np.array([0.5, 1.0, 2.0, 10.0])
    positive, _ = semigroup_multiplier(lam, s)
    np.testing.assert_allclose(positive / gamma(-s), lam**s, rtol=1e-8)
    negative, _ = semigroup_multiplier(lam, -s)
    np.testing.assert_allclose(negative / gamma(s), lam ** (-s), rtol=1e-8)


def test_semigroup_grid_matches_spectral():
    g = sample(gaussian(n=2), 8.0, 64)
    a = frac_apply_semigroup(g, 0.5)
    b = frac_apply_spectral(g, 0.5)
    np.testing.assert_allclose(a.values, b.values, atol=1e-8)


def test_semigroup_plane_wave():
    assert frac_apply_semigroup(plane_wave(1.0), 0.5, [0.0]) == pytest.approx(1.0, abs=1e-6)
    assert frac_apply_semigroup(plane_wave(2.0), 0.25, [0.3]) == pytest.approx(
        math.sqrt(2) * math.cos(0.6), abs=1e-6
    )


def test_pointwise_forms_agree():
    u = bump(r0=2.0)
    compensated = frac_apply_pointwise(u, 0.4, 0.6)
    symmetric = frac_apply_pointwise(u, 0.4, 0.6, form="symmetric")
    assert compensated == pytest.approx(symmetric, abs=1e-7)


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_pointwise_delta_independence(delta):
    u = gaussian()
    assert frac_apply_pointwise(u, 0.7, 0.75, delta=delta) == pytest.approx(gaussian_image(0.75, 0.7), abs=1e-6)


def test_pointwise_reports_budget():
    report = frac_apply_pointwise(gaussian(), 0.0, 0.5, full=True)
    assert report.form == "compensated"
    assert report.outer_remainder == 0.0
    assert report.inner_bound < 1e-6


def test_pointwise_remainder_too_large():
    with pytest.raises(RemainderTooLargeError, match="exceeds tolerance"):
        frac_apply_pointwise(witch(), 0.0, 0.5, R=5.0, tol=1e-8)


def test_pointwise_validates_radii():
    with pytest.raises(DomainError, match="0 < eps < R"):
        frac_apply_pointwise(gaussian(), 0.0, 0.5, eps=2.0, R=1.0)
    with pytest.raises(ValueError, match="eps"):
        FracRoute(kind="pointwise_integral", eps=2.0, R=1.0)


@pytest.mark.parametrize("n,s,r", [(1, 0.5, 1.0), (2, 0.25, 2.0), (3, 0.75, 0.5), (1, 0.1, 3.0)])
def test_kernel_identity(n, s, r):
    lhs, rhs = kernel_identity_check(n, s, r)
    assert lhs / rhs == pytest.approx(1.0, abs=1e-8)
    _, rhs2 = kernel_identity_check(n, s, 2 * r)
    assert rhs2 / rhs == pytest.approx(2 ** (-(n + 2 * s)), rel=1e-14)


def test_kernel_identity_known_value():
    lhs, rhs = kernel_identity_check(1, 0.5, 1.0)
    assert rhs == pytest.approx(1 / math.pi)
    assert lhs == pytest.approx(c_ns(1, 0.5), rel=1e-8)


def test_inverse_plane_wave():
    g = sample(plane_wave(2.0), math.pi, 32)
    inverse = frac_inverse_semigroup(g, 0.5)
    np.testing.assert_allclose(inverse.values, g.values / 2, atol=1e-9)
    assert inverse.meta["zero_mean_projection"] is True


def test_inverse_round_trip():
    g = sample(bump(r0=2.0), 8.0, 128)
    inverse = frac_inverse_semigroup(g, 0.25)
    back = frac_apply_spectral(inverse, 0.25)
    np.testing.assert_allclose(back.values, g.values - g.mean, atol=1e-8)
    assert inverse.meta["projected_mean"] == pytest.approx(g.mean)


def test_inverse_warns_without_zero_mean():
    g = sample(bump(), 8.0, 64)
    with pytest.warns(UserWarning, match="zero mode projected"):
        frac_inverse_semigroup(g, 0.5)


def test_inverse_analytic_matches_riesz():
    u = bump(r0=1.0)
    for x in (0.0, 0.6, 2.5):
        expected = riesz_convolve(u, [x], 1, 0.25)
        assert frac_inverse_semigroup(u, 0.25, [x]) == pytest.approx(expected, abs=1e-6)


def test_inverse_analytic_diverges_with_mass():
    with pytest.raises(DivergenceError, match="not integrable"):
        frac_inverse_semigroup(bump(), 0.5, [0.0])


def test_riesz_kernel_values():
    assert riesz_kernel(1, 0.5, [1.0]) == pytest.approx(-0.5772156649015329 / (2 * math.pi), rel=1e-14)
    assert riesz_kernel(1, 0.5, [math.exp(-0.5772156649015329 / 2)]) == pytest.approx(0.0, abs=1e-15)
    assert riesz_kernel(3, 0.5, [2.0, 0.0, 0.0]) == pytest.approx(1 / (8 * math.pi**2), rel=1e-13)
    with pytest.raises(DomainError, match="singular"):
        riesz_kernel(2, 0.5, [0.0, 0.0])


def test_riesz_convolve_log_kernel_matches_torus_inverse():
    u = dipole_bump(r0=1.0, shift=1.5)
    g = sample(u, 256.0, 8192)
    torus = frac_inverse_semigroup(g, 0.5)
    for x in (0.0, 0.375, 1.5):
        assert riesz_convolve(u, x, 1, 0.5) == pytest.approx(torus.at(x), abs=1e-4)


def test_riesz_convolve_zero_mean_gate():
    with pytest.raises(ZeroMeanViolation, match="zero-mean"):
        riesz_convolve(bump(), [0.0], 1, 0.5)


def test_limit_diagnostics_to_one():
    table = limit_diagnostics(gaussian(), [0.0], "s_to_1", [0.9, 0.99, 0.999])
    assert [row.target for row in table.rows] == [2.0, 2.0, 2.0]
    assert table.monotone
    assert table.rows[-1].gap < 1e-2


def test_limit_diagnostics_to_zero():
    table = limit_diagnostics(gaussian(), [0.0], "s_to_0", [0.1, 0.01, 0.001])
    assert table.rows[0].target == 1.0
    assert table.monotone
    assert table.rows[-1].gap < 1e-2


def test_limit_diagnostics_plane_wave_exact():
    table = limit_diagnostics(plane_wave(1.0), [0.4], "s_to_1", [0.5, 0.9])
    for row in table.rows:
        assert row.value == pytest.approx(row.reference, abs=1e-8)
        assert row.gap < 1e-8


def test_limit_diagnostics_runs_a_route():
    u = gaussian()
    table = limit_diagnostics(u, [0.0], "s_to_1", [0.9, 0.999])
    for row in table.rows:
        assert row.reference == pytest.approx(gaussian_image(row.s, 0.0), rel=1e-10)
        assert row.value == pytest.approx(row.reference, rel=1e-6)
    table = limit_diagnostics(u, [0.0], "s_to_0", [0.5, 0.001])
    assert table.rows[-1].value == pytest.approx(table.rows[-1].reference, rel=1e-6)


def test_limit_diagnostics_pointwise_route():
    table = limit_diagnostics(gaussian(), [0.375], "s_to_1", [0.25, 0.5], route="pointwise")
    for row in table.rows:
        assert row.value == pytest.approx(gaussian_image(row.s, 0.375), abs=1e-6)


def test_limit_diagnostics_without_closed_form():
    table = limit_diagnostics(bump(), [0.0], "s_to_0", [0.5, 0.1])
    assert all(row.reference is None for row in table.rows)
    assert table.rows[-1].gap < table.rows[0].gap


def test_limit_diagnostics_validation():
    with pytest.raises(DomainError, match="monotonically"):
        limit_diagnostics(gaussian(), [0.0], "s_to_1", [0.9, 0.5])
    with pytest.raises(DomainError, match="1e-3"):
        limit_diagnostics(gaussian(), [0.0], "s_to_0", [0.5, 0.0])
    with pytest.raises(DomainError, match="limits run on"):
        limit_diagnostics(gaussian(), [0.0], "s_to_1", [0.5, 0.9], route="spectral")


def test_maximum_principle():
    for u, x0 in random_pinned_fixtures(20, seed=7):
        assert max_principle_value(u, x0, 0.5) <= 1e-10


def test_fractional_heat_smooths():
    g = sample(bump(r0=2.0), 8.0, 128)
    out = fractional_heat(g, 0.5, 0.3)
    assert out.mean == pytest.approx(g.mean, abs=1e-15)
    assert out.sup < g.sup
    wave = sample(plane_wave(2.0), math.pi, 32)
    np.testing.assert_allclose(fractional_heat(wave, 0.5, 0.5).values, math.exp(-1.0) * wave.values, atol=1e-13)


def test_compare_routes_table():
    table = compare_routes(gaussian(), 0.5, [[0.0], [0.375]], grid=BOX)
    assert set(table.values) == {"spectral", "semigroup", "pointwise", "exact"}
    assert max(table.deltas.values()) < 1e-5


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_compare_routes_wide_bump(s):
    points = [[0.0], [0.75], [1.5], [3.0], [4.5]]
    table = compare_routes(bump(r0=6.0), s, points, grid=BOX)
    assert set(table.values) == {"spectral", "semigroup", "pointwise"}
    assert max(table.deltas.values()) < 1e-4


def test_compare_routes_narrow_bump_needs_fine_grid():
    points = [[0.0], [0.375], [0.75]]
    coarse = compare_routes(bump(r0=1.0), 0.75, points, grid=BOX)
    fine = compare_routes(bump(r0=1.0), 0.75, points, grid=(12.0, 4096))
    assert fine.spectral_tail < 1e-6 < coarse.spectral_tail
    assert max(fine.deltas.values()) < 1e-5


def test_spectral_tail():
    assert spectral_tail(sample(plane_wave(1.0), math.pi, 32)) < 1e-14
    assert spectral_tail(sample(bump(r0=1.0), *BOX)) > spectral_tail(sample(bump(r0=6.0), *BOX))
    assert compare_routes(gaussian(), 0.5, [[0.0]], grid=BOX, routes=("semigroup",)).spectral_tail is None


def test_semigroup_rejects_inadmissible_growth():
    with pytest.raises(DomainError, match="L_s"):
        frac_apply_semigroup(abs_power(1.5), 0.5, [0.0])
