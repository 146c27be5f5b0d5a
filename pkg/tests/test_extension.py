"""Tests for the extension problem: the four formulas, the boundary limits, energy and persistence"""

import math
from collections import namedtuple

import mpmath
import numpy as np
import pytest

from fracsem.errors import DomainError, ExtrapolationError, FieldFormatError
from fracsem.extension import (
    ExtensionField,
    bessel_k_identity,
    boundary_value,
    contraction_check,
    energy_functional,
    export_slice_csv,
    extend,
    extend_neumann,
    extension_energy,
    hs_seminorm,
    kernel_normalization,
    lattice_correction,
    load_extension,
    neumann_limit,
    neumann_trace,
    pde_residual,
    quotient_constant,
    richardson,
    save_extension,
    vanishes_at_infinity,
)
from fracsem.fields import gaussian, plane_wave, sample
from fracsem.numerics import cs_neumann, cs_quotient
from fracsem.operator import frac_apply_spectral, frac_inverse_semigroup

TEnv = namedtuple("TEnv", "route")

Y_SHORT = [0.01, 0.1, 0.5, 1.0, 2.0]


@pytest.fixture(params=["semigroup_dirichlet", "subordination", "semigroup_frac", "poisson_kernel"])
def tenv(request):
    return TEnv(route=request.param)


@pytest.mark.parametrize("y", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_kernel_normalization(y, s):
    assert kernel_normalization(y, s) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("z", [0.5, 1.0, 4.0])
def test_bessel_k_identity(s, z):
    lhs, rhs = bessel_k_identity(s, z)
    assert rhs == pytest.approx(float(mpmath.besselk(s, z)), rel=1e-13)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_routes_agree(tenv):
    g = sample(plane_wave(2.0), math.pi, 32)
    ext = extend(g, 0.4, Y_SHORT, route=tenv.route)
    reference = extend(g, 0.4, Y_SHORT, route="poisson_kernel")
    np.testing.assert_allclose(ext.U, reference.U, atol=1e-7)
    assert ext.route == tenv.route


def test_routes_agree_with_mean(tenv):
    g = sample(gaussian(), 8.0, 64)
    ext = extend(g, 0.6, Y_SHORT, route=tenv.route)
    reference = extend(g, 0.6, Y_SHORT, route="poisson_kernel")
    np.testing.assert_allclose(ext.U, reference.U, atol=1e-7)


def test_poisson_route_at_one_half_is_harmonic_extension():
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, 0.5, Y_SHORT, route="poisson_kernel")
    for k, y in enumerate(Y_SHORT):
        np.testing.assert_allclose(ext.U[k], math.exp(-y) * g.values, atol=1e-13)


def test_extend_rejects_order_one():
    g = sample(plane_wave(1.0), math.pi, 32)
    with pytest.raises(DomainError, match="0 < s < 1"):
        extend(g, 1.0)


def test_extend_samples_analytic_input():
    ext = extend(plane_wave(1.0), 0.5, Y_SHORT, grid=(math.pi, 32))
    assert ext.base.M == 32
    with pytest.raises(DomainError, match="grid"):
        extend(plane_wave(1.0), 0.5, Y_SHORT)


def test_extension_field_validates_nodes():
    g = sample(plane_wave(1.0), math.pi, 16)
    U = np.zeros((3, 16))
    with pytest.raises(DomainError, match="increasing"):
        ExtensionField(g, [0.1, 0.1, 0.2], U, U, 0.5, "poisson_kernel")
    with pytest.raises(DomainError, match="three"):
        ExtensionField(g, [0.1, 0.2], U[:2], U[:2], 0.5, "poisson_kernel")


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_neumann_limit_constant(s):
    g = sample(plane_wave(1.0), math.pi, 32)
    limit = neumann_limit(extend(g, s))
    assert limit.constant_ratio == pytest.approx(cs_neumann(s), rel=1e-2)
    np.testing.assert_allclose(limit.measured.values, limit.target.values, atol=1e-2)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_neumann_limit_gaussian(s):
    g = sample(gaussian(), 8.0, 64)
    limit = neumann_limit(extend(g, s))
    assert limit.constant_ratio == pytest.approx(cs_neumann(s), rel=1e-2)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_quotient_constant_gaussian(s):
    g = sample(gaussian(), 8.0, 64)
    measured, expected = quotient_constant(extend(g, s))
    assert measured == pytest.approx(expected, rel=2e-2)


@pytest.mark.parametrize("s", [0.25, 0.6])
def test_quotient_constant(s):
    g = sample(plane_wave(2.0), math.pi, 32)
    measured, expected = quotient_constant(extend(g, s))
    assert expected == cs_quotient(s)
    assert measured == pytest.approx(expected, rel=1e-2)


def test_boundary_value_recovers_datum():
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, 0.4)
    assert ext.meta["tol_boundary"] > 0
    np.testing.assert_allclose(boundary_value(ext).values, g.values, atol=1e-4)


def test_extend_neumann_trace_and_boundary():
    s = 0.3
    f = sample(plane_wave(2.0), math.pi, 32)
    ext = extend_neumann(f, s)
    assert ext.kind == "neumann"
    np.testing.assert_allclose(neumann_trace(ext).values, f.values, atol=1e-2)
    expected = frac_inverse_semigroup(f, s).values / cs_neumann(s)
    np.testing.assert_allclose(boundary_value(ext).values, expected, atol=1e-2)


def test_extend_neumann_projects_mean():
    f = sample(gaussian(), 8.0, 64)
    ext = extend_neumann(f, 0.4, Y_SHORT)
    assert ext.meta["projected_mean"] == pytest.approx(f.mean)
    assert abs(ext.base.mean) < 1e-14


def test_richardson_exact_for_quadratics():
    y = np.array([0.1, 0.2, 0.3, 1.0])
    values = 2.0 + 3.0 * y**0.8 - 0.5 * y**1.6
    limit, residual = richardson(y, values, 0.8)
    assert float(limit) == pytest.approx(2.0, rel=1e-12)
    assert residual > 0


def test_richardson_rejects_wild_data():
    y = np.array([0.1, 0.2, 0.3])
    with pytest.raises(ExtrapolationError, match="Richardson"):
        richardson(y, np.array([1.0, -5.0, 20.0]), 1.0)


@pytest.mark.parametrize("s", [0.25, 0.4, 0.5])
def test_hs_seminorm_forms_agree(s):
    g = sample(gaussian(), 12.0, 128)
    seminorm = hs_seminorm(g, s)
    assert seminorm.footing == "rn"
    assert seminorm.relative_gap < 1e-2


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_hs_seminorm_gaussian_on_rn(s):
    # ‖(−Δ)^{s/2} e^{−x²}‖² = 2^{s−1/2} Γ(s + 1/2) on the line
    exact = 2 ** (s - 0.5) * math.gamma(s + 0.5)
    g = sample(gaussian(), 12.0, 128)
    assert hs_seminorm(g, s).spectral == pytest.approx(exact, rel=2e-3)
    assert hs_seminorm(g, s, footing="rn").spectral == hs_seminorm(g, s).spectral


def test_hs_seminorm_torus_footing_keeps_lattice_sum():
    s = 0.25
    g = sample(gaussian(), 12.0, 128)
    torus = hs_seminorm(g, s, footing="torus")
    assert torus.footing == "torus"
    assert torus.spectral == pytest.approx(hs_seminorm(g, s).spectral + lattice_correction(g, s), rel=1e-14)
    assert torus.spectral < (1 - 1e-2) * 2 ** (s - 0.5) * math.gamma(s + 0.5)
    with pytest.raises(DomainError, match="footing"):
        hs_seminorm(g, s, footing="sphere")


def test_hs_seminorm_periodic_data_stays_on_torus():
    g = sample(plane_wave(1.0), math.pi, 32)
    assert hs_seminorm(g, 0.3).footing == "torus"


def test_hs_seminorm_plane_wave():
    # 2^{2s} ∫ cos²(2x) dx over (−π, π) at s = 1/2
    g = sample(plane_wave(2.0), math.pi, 32)
    assert hs_seminorm(g, 0.5).spectral == pytest.approx(2 * math.pi, rel=1e-12)


def test_energy_matches_seminorm():
    s = 0.5
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, s, route="poisson_kernel")
    energy = energy_functional(ext.base, ext.y, ext.U, ext.Uy, s)
    assert energy == pytest.approx(cs_neumann(s) * hs_seminorm(g, s).spectral, rel=1e-2)


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_extension_energy_gaussian(s):
    g = sample(gaussian(), 8.0, 64)
    energy = extension_energy(extend(g, s))
    assert energy == pytest.approx(cs_neumann(s) * hs_seminorm(g, s, footing="torus").spectral, rel=2e-2)


@pytest.mark.parametrize("epsilon", [-0.2, 0.2])
def test_energy_minimized_by_extension(epsilon):
    s = 0.4
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, s)
    y = ext.y[:, None]
    bump = y * np.exp(-y) * np.cos(g.axis)[None, :]
    bump_y = y ** (1 - 2 * s) * (1 - y) * np.exp(-y) * np.cos(g.axis)[None, :]
    base = energy_functional(g, ext.y, ext.U, ext.Uy, s)
    perturbed = energy_functional(g, ext.y, ext.U + epsilon * bump, ext.Uy + epsilon * bump_y, s)
    assert perturbed > base


def test_pde_residual_small():
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, 0.4, route="poisson_kernel")
    residual = pde_residual(ext)
    assert residual.y
    assert residual.worst < 1e-4


def test_pde_residual_shrinks_with_step():
    g = sample(plane_wave(1.0), math.pi, 32)
    ext = extend(g, 0.4, route="poisson_kernel")
    assert pde_residual(ext, step=1e-2).worst < pde_residual(ext, step=1e-1).worst


def test_contraction():
    g = sample(gaussian(), 8.0, 64)
    check = contraction_check(extend(g, 0.5))
    assert check.ok
    assert check.sup_excess < 0


def test_vanishing_at_infinity():
    wave = sample(plane_wave(1.0), math.pi, 32)
    assert vanishes_at_infinity(extend(wave, 0.5, route="poisson_kernel")).ok
    g = sample(gaussian(), 8.0, 64)
    result = vanishes_at_infinity(extend(g, 0.5, route="poisson_kernel"))
    assert not result.ok
    assert result.ratio == pytest.approx(g.mean, rel=1e-2)


def test_save_and_load_extension(tmp_path):
    g = sample(plane_wave(1.0), math.pi, 16)
    ext = extend(g, 0.5, Y_SHORT, route="subordination")
    path = save_extension(ext, tmp_path / "ext.fsgf")
    loaded = load_extension(path)
    assert loaded.route == "subordination" and loaded.kind == "dirichlet"
    assert loaded.s == 0.5
    np.testing.assert_array_equal(loaded.y, ext.y)
    np.testing.assert_array_equal(loaded.U, ext.U)
    np.testing.assert_array_equal(loaded.Uy, ext.Uy)


def test_save_and_load_neumann_extension(tmp_path):
    f = sample(plane_wave(1.0), math.pi, 16)
    path = save_extension(extend_neumann(f, 0.3, Y_SHORT), tmp_path / "neumann.fsgf")
    loaded = load_extension(path)
    assert loaded.kind == "neumann" and loaded.route == "neumann"


def test_load_extension_rejects_damaged_files(tmp_path):
    g = sample(plane_wave(1.0), math.pi, 16)
    path = save_extension(extend(g, 0.5, Y_SHORT), tmp_path / "ext.fsgf")
    data = open(path, "rb").read()

    (tmp_path / "truncated.fsgf").write_bytes(data[:-8])
    with pytest.raises(FieldFormatError):
        load_extension(tmp_path / "truncated.fsgf")

    (tmp_path / "long.fsgf").write_bytes(data + b"\x00" * 8)
    with pytest.raises(FieldFormatError, match="trailing"):
        load_extension(tmp_path / "long.fsgf")


def test_plain_grid_file_is_not_an_extension(tmp_path):
    from fracsem.fields import save_field

    path = save_field(sample(plane_wave(1.0), math.pi, 16), tmp_path / "g.fsgf")
    with pytest.raises(FieldFormatError, match="not an extension"):
        load_extension(path)


def test_frac_image_used_by_semigroup_frac_route():
    g = sample(plane_wave(3.0), math.pi, 32)
    image = frac_apply_spectral(g, 0.5)
    np.testing.assert_allclose(image.values, 3 * g.values, atol=1e-12)


def test_export_slice_csv():
    g = sample(plane_wave(1.0), math.pi, 16)
    ext = extend(g, 0.5, Y_SHORT, route="poisson_kernel")
    lines = export_slice_csv(ext, 0).splitlines()
    assert lines[0] == "x1,value"
    assert len(lines) == 17
    x, value = lines[9].split(",")
    assert float(x) == 0.0
    assert float(value) == pytest.approx(math.exp(-Y_SHORT[0]), rel=1e-12)
