import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.cp1_cone_metrics import (ConePointConfig, chordal, football_metric, harmonic_z, invert_point,
                                         solve_liouville, triangle_metric_d3_half)
from conekahler.errors import WindowViolation

cplx = st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False)


@given(cplx, cplx)
def test_chordal_symmetric_and_bounded(x, a):
    d = float(chordal(x, a))
    assert 0 <= d <= 1 + 1e-12
    assert d == pytest.approx(float(chordal(a, x)), abs=1e-12)


@given(cplx.filter(lambda q: abs(q) > 1e-3))
def test_chordal_chart_independent(x):
    # distance to infinity seen from the eta = 1/xi chart is distance to 0
    assert float(chordal(x, None)) == pytest.approx(float(chordal(1 / x, 0)), rel=1e-12)
    assert invert_point(invert_point(x)) == pytest.approx(x)


@pytest.mark.parametrize("a", [0j, 0.5 + 0.2j, None])
def test_harmonic_z_first_eigenfunction(a):
    B = 0.7 - 0.4j
    f = lambda q: np.real(B * harmonic_z(q, a, 0))
    q0 = 0.3 - 0.6j
    h = 1e-3
    lap = (f(q0 + h) + f(q0 - h) + f(q0 + 1j * h) + f(q0 - 1j * h) - 4 * f(q0)) / h**2
    assert (1 + abs(q0) ** 2) ** 2 * lap == pytest.approx(-8 * f(q0), rel=1e-5)


def test_config_rejects_duplicates():
    with pytest.raises(ValueError):
        ConePointConfig((0j, 0j), 0.8)
    with pytest.raises(ValueError):
        ConePointConfig((None, None), 0.8)


@pytest.mark.parametrize("beta", [0.5, 0.8, 1.0])
def test_football_constant_curvature_and_gauss_bonnet(beta):
    g = football_metric(beta)
    xi = np.array([0.3 + 0.1j, -1.5 + 2j, 0.9j, 2.5])
    assert np.allclose(g.curvature(xi), 4.0, rtol=1e-5)
    assert g.gauss_bonnet() == pytest.approx(g.c, abs=1e-6)
    assert g.area() == pytest.approx(np.pi * g.c / 2, rel=1e-6)


def test_printed_exponent_variant_is_not_constant_curvature():
    g = football_metric(0.8, exponent="2beta")
    K = g.curvature(np.array([0.3 + 0.1j, 0.7]))
    assert np.max(np.abs(K - 4)) > 0.1
    with pytest.raises(ValueError):
        football_metric(0.8, exponent="other")


def test_triangle_metric():
    g = triangle_metric_d3_half()
    xi = np.array([0.3 + 0.4j, -2 + 1j, 0.5 - 0.5j, 3j])
    assert np.allclose(g.curvature(xi), 4.0, rtol=1e-5)
    assert g.gauss_bonnet() == pytest.approx(0.5, abs=1e-6)


@given(st.floats(0.5, 0.99))
def test_football_regular_part_smooth_at_origin(beta):
    # u has a finite limit at the cone point 0
    g = football_metric(beta)
    u = g.regular_part(np.array([1e-6, 1e-8]))
    assert abs(u[0] - u[1]) < 1e-6
    assert u[1] == pytest.approx(np.log(beta), abs=1e-6)


def test_window():
    with pytest.raises(WindowViolation):
        solve_liouville(ConePointConfig((0j, 1 + 0j, None), 0.3))


def test_liouville_d3(d3_general_metric):
    g = d3_general_metric.base
    xi = np.array([0.3 + 0.4j, -2 + 1j, 0.5 - 0.5j, 3j, 0.5 + 0.8j])
    assert np.max(np.abs(g.curvature(xi) - 4)) < 1e-3
    assert abs(g.gauss_bonnet() - g.c) < 1e-3
    # xi -> 1/xi is a round isometry swapping 0 and infinity
    assert abs(g.alpha[0] - g.alpha[2]) < 1e-6
    # the metric itself is unique, hence invariant under xi -> 1 - xi
    assert np.max(np.abs(g.phi(xi) - g.phi(1 - xi))) < 1e-4


def test_liouville_d3_reproduces_triangle_at_half():
    g = solve_liouville(ConePointConfig((0j, 1 + 0j, None), 0.5))
    ref = triangle_metric_d3_half()
    xi = np.array([0.3 + 0.4j, -2 + 1j, 0.5 - 0.5j, 3j])
    assert np.max(np.abs(g.psi(xi) - ref.psi(xi))) < 1e-4
