import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.cp1_cone_metrics import football_metric, triangle_metric_d3_half
from conekahler.link_spectrum import (FEMSettings, LinkMetric, expected_link_volume, football_eigenvalue,
                                      indicial_roots, jacobi_mode_eigenvalues, link_volume, mode_table,
                                      spectrum)
from oracles import football_spectrum_oracle, triangle_area_mpmath


@pytest.mark.parametrize("beta", [0.6, 0.8, 1.0])
def test_football_link_volume(beta):
    link = LinkMetric(football_metric(beta))
    assert link_volume(link) == pytest.approx(expected_link_volume(link.c), rel=1e-6)


def test_round_link_volume():
    assert link_volume(LinkMetric(football_metric(1.0))) == pytest.approx(2 * np.pi**2, rel=1e-10)


def test_triangle_link_volume():
    link = LinkMetric(triangle_metric_d3_half())
    area = triangle_area_mpmath()
    assert area == pytest.approx(np.pi / 4, rel=1e-12)
    assert link_volume(link) == pytest.approx(area * link.fiber_length, rel=1e-6)


@pytest.mark.parametrize("beta", [0.7, 1.0])
def test_connection_curvature_is_area_form(beta):
    conn = LinkMetric(football_metric(beta)).connection
    q = np.array([0.3 + 0.2j, -0.5 + 0.1j])
    assert np.allclose(conn.curvature_density(0, q), conn.expected_density(0, q), rtol=1e-5)
    assert conn.total_flux() == pytest.approx(1.0, abs=1e-6)


def test_football_spectrum_matches_shooting():
    spec = spectrum(LinkMetric(football_metric(0.8)), m_max=4, n_per_mode=8)
    oracle = football_spectrum_oracle(0.8, 10)
    assert np.max(np.abs(spec.lowest(10) - oracle)) < 1e-4


def test_round_sphere_spectrum():
    spec = spectrum(LinkMetric(football_metric(1.0)), m_max=4, n_per_mode=8)
    lam = spec.lowest(30)
    expected = np.concatenate([[k * (k + 2)] * (k + 1) ** 2 for k in range(4)])
    assert np.allclose(lam, expected, atol=1e-10)


@given(st.floats(0.5, 1.0), st.integers(0, 3), st.integers(-3, 3), st.integers(-3, 3))
def test_jacobi_solver_matches_closed_form(beta, n, k1, k2):
    vals = jacobi_mode_eigenvalues(abs(k1) / beta, abs(k2) / beta, n + 1)
    assert vals[n] == pytest.approx(football_eigenvalue(n, k1, k2, beta), rel=1e-10, abs=1e-10)


@given(st.sampled_from([0.6, 0.75, 0.9]))
def test_spectrum_symmetric_in_weight(beta):
    spec = spectrum(LinkMetric(football_metric(beta)), m_max=3, n_per_mode=5)
    for m in range(1, 4):
        a = np.sort(spec.eigenvalues[spec.m == m])
        b = np.sort(spec.eigenvalues[spec.m == -m])
        assert np.allclose(a, b, atol=1e-10)


def test_fem_agrees_with_separable():
    base = football_metric(0.8)
    sep = spectrum(LinkMetric(base), m_max=2, n_per_mode=4)
    fem = spectrum(LinkMetric(base), m_max=2, n_per_mode=4, method="fem", fem=FEMSettings())
    assert fem.method == "fem"
    assert np.max(np.abs(fem.lowest(6) - sep.lowest(6)) / (1 + sep.lowest(6))) < 1e-2


def test_separable_needs_football():
    with pytest.raises(ValueError):
        spectrum(LinkMetric(triangle_metric_d3_half()), method="separable")


@given(st.floats(0, 200))
def test_indicial_roots_solve_quadratic(lam):
    r = indicial_roots(np.array([lam]))
    for s in (r.plus[0], r.minus[0]):
        assert s * (s + 2) == pytest.approx(lam, abs=1e-9 * (1 + lam))
    assert r.plus[0] >= 0 and r.minus[0] <= -2


@pytest.mark.parametrize("beta", [0.6, 0.75, 0.9])
def test_football_gap_empty(beta):
    assert indicial_roots(spectrum(LinkMetric(football_metric(beta)))).gap_is_empty()


def test_round_sphere_roots_and_csv(tmp_path):
    roots = indicial_roots(spectrum(LinkMetric(football_metric(1.0)), m_max=2, n_per_mode=3))
    pairs = {(round(p, 9), round(q, 9)) for p, q in zip(roots.plus, roots.minus)}
    assert (0.0, -2.0) in pairs and (1.0, -3.0) in pairs
    roots.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "m,n,lambda,delta_plus,delta_minus"


def test_mode_table():
    spec = spectrum(LinkMetric(football_metric(1.0)), m_max=2, n_per_mode=3)
    table = mode_table(spec, 5)
    assert [i for i, _ in table] == list(range(5))
    assert table[0][1] == 0.0
