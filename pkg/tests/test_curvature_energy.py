from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.curvature_energy import (bisectional_scan, bisectional_values, compact_energy,
                                         curvature_norm_gh_identity, direction_grid, elliptic_family,
                                         energy_formula, energy_numeric, euler_characteristic_curve, exact,
                                         fubini_study_potential, model_family_potential, parabola_energy,
                                         quartic_family, richardson_geometric, riemann_at)
from conekahler.errors import ConfigInvalid, NonConvergentTail, StencilCrossesSingularSet
from conekahler.link_spectrum import LinkMetric, link_volume
from conekahler.cp1_cone_metrics import football_metric

Z = np.array([0.3 + 0.2j, -0.5 + 0.4j, 0.1 - 0.6j])
W = np.array([0.2 - 0.1j, 0.4 + 0.3j, -0.3 + 0.2j])


def test_euclidean_is_flat():
    s = riemann_at(lambda z, w: np.abs(z) ** 2 + np.abs(w) ** 2, Z, W)
    assert np.max(np.sqrt(s.norm2)) < 1e-6
    assert np.allclose(s.metric, np.eye(2), atol=1e-9)


def test_flat_cone_at_one_one():
    phi = model_family_potential(0.8, 0.0)
    s = riemann_at(phi, np.array([1.0 + 0j]), np.array([1.0 + 0j]), singular_distance=lambda z, w: np.abs(z))
    assert np.sqrt(s.norm2[0]) < 1e-5


def test_fubini_study_constants():
    s = riemann_at(fubini_study_potential, Z, W)
    d = direction_grid()
    hol = np.real(np.einsum("nabcd,pa,pb,pc,pd->np", s.R_frame, d, np.conj(d), d, np.conj(d)))
    assert np.max(np.abs(hol - 2)) < 1e-4
    assert np.allclose(s.norm2, 12, atol=1e-3)
    assert np.allclose(s.ricci, 3 * np.eye(2), atol=1e-4)
    bis = bisectional_values(s)
    assert bis.min() > 1 - 1e-4 and bis.max() < 2 + 1e-4
    assert np.max(s.symmetry_residual) < 1e-5


def test_flat_scan_is_zero():
    phi = model_family_potential(0.7, 0.0)
    assert abs(bisectional_scan(phi, Z + 1, W)) < 1e-5


def test_model_family_common_cap():
    pts_z = np.array([0.5 + 0.2j, -0.8 + 0.4j, 0.6j, 1.2])
    pts_w = np.array([0.1 - 0.1j, 0.4 + 0.3j, -0.3, 0.7j])
    caps = [bisectional_scan(model_family_potential(0.8, eps), pts_z, pts_w) for eps in (0.1, 0.5, 1.0)]
    assert all(np.isfinite(caps))
    assert max(caps) < 2.0


def test_stencil_guard():
    phi = model_family_potential(0.8, 0.1)
    with pytest.raises(StencilCrossesSingularSet):
        riemann_at(phi, np.array([0.01 + 0j]), np.array([1.0 + 0j]), singular_distance=lambda z, w: np.abs(z))


@pytest.mark.parametrize("x,zp", [(0.3, 1.0 + 0.5j), (-0.7, 2.0 - 1.0j)])
def test_gibbons_hawking_curvature_identity(x, zp):
    # the same |Rm|^2 from the four-dimensional potential and from V alone
    from conekahler.gibbons_hawking import GibbonsHawkingD2
    b = 0.8
    g = GibbonsHawkingD2(b)
    # pick (z, w) above the base point (x, zp): zw - 1 = (b zp)^(1/b)
    zeta = 1 + (b * zp) ** (1 / b)
    from scipy.optimize import brentq
    lo = brentq(lambda L: g.moment(np.exp(L) + 0j, zeta / np.exp(L))[()] - x, -8, 8)
    z = np.array([np.exp(lo) + 0j])
    w = zeta / z
    s = riemann_at(g.potential, z, w, h=5e-3)
    ref = curvature_norm_gh_identity(b, np.array([x]), np.array([zp]), h=0.02)
    assert s.norm2[0] == pytest.approx(float(ref[0]), rel=5e-3)


# ----------------------------------------------------------------------------
# bookkeeping


@given(st.integers(1, 8))
def test_euler_characteristic(d):
    g = (d - 1) * (d - 2) // 2
    assert euler_characteristic_curve(d) == 2 - 2 * g - d


@given(st.fractions(Fraction(1, 100), 1))
def test_d2_energy_is_one_minus_beta_squared(b):
    assert energy_formula(2, b) == 1 - b * b


def test_family_values_exact():
    b = Fraction(4, 5)
    assert energy_formula(2, 0.8) == Fraction(9, 25)
    el = elliptic_family(b)
    assert (el.smooth, el.limit, el.lost, el.bubble_energy) == (3, 3 * b * b, 3 * (1 - b * b), 1 - b * b)
    assert el.lost == el.bubbles * el.bubble_energy
    qu = quartic_family(b)
    assert (qu.smooth, qu.limit, qu.lost) == (7 - 4 * b, 4 * b - 1, 8 * (1 - b))
    assert qu.bubble_energy == parabola_energy(b) == 1 - b
    assert qu.lost == qu.bubbles * qu.bubble_energy
    assert qu.conjectural and not el.conjectural


@given(st.fractions(Fraction(1, 2), 1), st.integers(-5, 5), st.integers(-5, 5))
def test_compact_energy_linear(b, chi_x, chi_c):
    assert compact_energy(chi_x, chi_c, b) == chi_x + (b - 1) * chi_c


@given(st.floats(0.1, 1.0))
def test_exact_reads_decimal(beta):
    assert float(exact(beta)) == beta


@pytest.mark.parametrize("beta", [0.6, 0.8])
def test_formula_with_numeric_volume(beta):
    vol = link_volume(LinkMetric(football_metric(beta)))
    assert energy_formula(2, beta, vol) == pytest.approx(float(energy_formula(2, beta)), abs=1e-5)


def test_formula_window():
    with pytest.raises(ConfigInvalid):
        energy_formula(3, 0.2)


def test_richardson():
    t = np.array([1.0, 0.5, 0.25])
    ex = richardson_geometric(list(2 + 3 * t**1.5))
    assert ex.limit == pytest.approx(2.0, rel=1e-10)
    assert ex.exponent == pytest.approx(1.5, rel=1e-10)
    with pytest.raises(NonConvergentTail):
        richardson_geometric([1.0, 2.0, 4.0])
    assert richardson_geometric([1.0, 1.0, 1.0]).limit == 1.0


# ----------------------------------------------------------------------------
# numeric energy


@pytest.fixture(scope="module")
def report08():
    return energy_numeric(0.8)


def test_numeric_energy_reported(report08):
    assert report08.formula == pytest.approx(0.36)
    assert np.isfinite(report08.numeric) and report08.uncertainty > 0


def test_energy_scale_invariant(report08):
    other = energy_numeric(0.8, scale=2.0)
    assert other.numeric == pytest.approx(report08.numeric, abs=max(report08.uncertainty, 1e-6))


def test_smooth_case_energy_vanishes():
    assert abs(energy_numeric(1.0).numeric) < 1e-3


@pytest.mark.slow
def test_energy_refinement_pair(report08):
    from conekahler.curvature_energy import FluxSettings
    fine = energy_numeric(0.8, settings=FluxSettings(64, 48, 32, 64, 112, 24))
    assert abs(fine.numeric - report08.numeric) <= report08.uncertainty
