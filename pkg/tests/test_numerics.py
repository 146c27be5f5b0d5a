"""Tests for the special functions, constants and the log-substituted quadrature"""

import math

import mpmath
import numpy as np
import pytest
from pydantic import ValidationError

from fracsem.errors import ConvergenceError, DomainError, PoleError
from fracsem.numerics import (
    FracOrder,
    OrderConstants,
    QuadratureSpec,
    c_n_negs,
    c_ns,
    c_ns_gamma2,
    cs_neumann,
    cs_quotient,
    gamma,
    integrate_mellin,
    lattice_zeta,
    panel_nodes,
    sphere_area,
    sphere_nodes,
)


@pytest.mark.parametrize("x", [0.5, 1.7, 4.25, -0.5, -2.3])
def test_gamma_matches_mpmath(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)


@pytest.mark.parametrize("x", [0, -1, -3])
def test_gamma_poles(x):
    with pytest.raises(PoleError, match="pole"):
        gamma(x)
    with pytest.raises(DomainError):
        gamma(x)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_c_ns_two_forms(n, s):
    assert c_ns(n, s) > 0
    assert c_ns_gamma2(n, s) == pytest.approx(c_ns(n, s), rel=1e-12)


def test_c_ns_known_values():
    assert c_ns(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
    assert c_ns(3, 0.5) == pytest.approx(1 / math.pi**2, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_c_ns_vanishes_linearly_at_zero(n):
    s = 1e-7
    assert c_ns(n, s) / s == pytest.approx(2 / sphere_area(n), rel=1e-5)


def test_c_ns_rejects_s_one():
    with pytest.raises(DomainError, match="0 < s < 1"):
        c_ns(1, 1.0)


@pytest.mark.parametrize("n,s", [(1, 0.25), (2, 0.5), (3, 0.5), (3, 1.2)])
def test_c_n_negs_matches_mpmath(n, s):
    expected = mpmath.gamma(n / 2 - s) / (mpmath.power(4, s) * mpmath.gamma(s) * mpmath.pi ** (n / 2))
    assert c_n_negs(n, s) == pytest.approx(float(expected), rel=1e-13)


def test_c_n_negs_requires_s_below_half_dimension():
    with pytest.raises(DomainError, match="log kernel"):
        c_n_negs(2, 1.0)


def test_extension_constants_at_one_half():
    assert cs_neumann(0.5) == pytest.approx(1.0, rel=1e-14)
    assert cs_quotient(0.5) == pytest.approx(1.0, rel=1e-14)


def test_order_constants():
    constants = OrderConstants.for_order(1, 0.5)
    assert constants.c_pos == pytest.approx(1 / math.pi)
    assert constants.c_neg is None
    assert constants.cs_neumann == pytest.approx(1.0)

    constants = OrderConstants.for_order(3, 0.4)
    assert constants.c_neg == pytest.approx(c_n_negs(3, 0.4))
    assert constants.euler_gamma == pytest.approx(0.5772156649015329)


def test_frac_order():
    order = FracOrder(s=0.3)
    assert order.a == 1 - 2 * 0.3
    assert FracOrder.coerce(order) is order
    assert FracOrder.coerce(0.75).s == 0.75
    for bad in (0, -0.1, float("nan")):
        with pytest.raises(DomainError, match="invalid fractional order"):
            FracOrder.coerce(bad)


def test_quadrature_spec_validation():
    with pytest.raises(ValidationError):
        QuadratureSpec(nodes_per_decade=2)
    with pytest.raises(ValidationError):
        QuadratureSpec(tau_min=1.0, tau_max=0.0)
    assert QuadratureSpec().doubled().nodes_per_decade == 32


@pytest.mark.parametrize("s", [0.3, 0.5, 0.9])
def test_integrate_mellin_gamma_function(s):
    # ∫ e^{-t} t^{s-1} dt = Γ(s)
    spec = QuadratureSpec.for_tails(s, None)
    result = integrate_mellin(lambda t: np.exp(-t), -s, spec)
    assert result.value == pytest.approx(float(mpmath.gamma(s)), rel=1e-12)
    assert result.error < 1e-10


def test_integrate_mellin_trapezoid_rule():
    spec = QuadratureSpec.for_tails(0.5, None, nodes_per_decade=40, rule="trapezoid")
    result = integrate_mellin(lambda t: np.exp(-t), -0.5, spec)
    assert result.value == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_integrate_mellin_many_integrands():
    lam = np.array([0.5, 1.0, 2.0, 10.0])
    s = 0.4
    spec = QuadratureSpec.for_tails(s, None, t_lo=1 / lam.max(), t_hi=1 / lam.min())
    result = integrate_mellin(lambda t: np.exp(-t[:, None] * lam[None, :]), -s, spec)
    assert result.value.shape == (4,)
    np.testing.assert_allclose(result.value, gamma(s) * lam ** (-s), rtol=1e-11)


def test_integrate_mellin_narrow_window():
    spec = QuadratureSpec(tau_min=-2.0, tau_max=2.0)
    with pytest.raises(ConvergenceError, match="too narrow"):
        integrate_mellin(lambda t: np.exp(-t), -0.5, spec)


def test_panel_nodes_polynomial_exactness():
    x, w = panel_nodes(np.array([0.0, 0.5, 2.0]))
    assert np.sum(w * x**5) == pytest.approx(2.0**6 / 6, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_nodes(n):
    directions, weights = sphere_nodes(n)
    assert np.sum(weights) == pytest.approx(sphere_area(n), rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, rtol=1e-14)
    assert abs(np.sum(weights * directions[:, 0] ** 3)) < 1e-13
    assert np.sum(weights * directions[:, 0] ** 2) == pytest.approx(sphere_area(n) / n, rel=1e-12)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("z", [-0.125, -0.25, -0.5, -1.3, 2.0])
def test_lattice_zeta_line(z):
    assert lattice_zeta(1, z) == pytest.approx(2 * float(mpmath.zeta(2 * z)), rel=1e-12)


@pytest.mark.parametrize("z", [-0.3, -1.4, 1.5])
def test_lattice_zeta_plane(z):
    beta = mpmath.dirichlet(z, [0, 1, 0, -1])
    assert lattice_zeta(2, z) == pytest.approx(4 * float(mpmath.zeta(z) * beta), rel=1e-10)


def test_lattice_zeta_space_direct_sum():
    R = 30
    m = np.arange(-R, R + 1)
    r2 = (m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2).ravel()
    r2 = r2[(r2 > 0) & (r2 <= R * R)].astype(float)
    direct = float(np.sum(r2**-3.0)) + 4 * math.pi / (3 * R**3)
    assert lattice_zeta(3, 3.0) == pytest.approx(direct, rel=1e-4)


def test_lattice_zeta_poles():
    with pytest.raises(DomainError, match="pole"):
        lattice_zeta(2, 1.0)
    with pytest.raises(DomainError, match="nonpositive integer"):
        lattice_zeta(1, -1.0)
