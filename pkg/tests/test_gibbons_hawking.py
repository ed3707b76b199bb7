import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.gibbons_hawking import GibbonsHawkingD2, VYF
from conekahler.monge_ampere import RicciFlatD2

Z = np.array([0.7 + 0.3j, 2 - 1j, -0.2 + 1.5j])
W = np.array([0.4 - 1j, 0.3 + 0.2j, 1.1j])


def test_moment_solves_level_equation():
    g = GibbonsHawkingD2(0.8)
    x = g.moment(Z, W)
    _, Y, _ = VYF(x, Z * W, 0.8)
    assert np.allclose(Y, np.log(np.abs(Z)), atol=1e-13)


def test_swap_symmetry():
    g = GibbonsHawkingD2(0.7)
    assert np.allclose(g.potential(Z, W), g.potential(W, Z), atol=1e-12)


@given(st.floats(0, 2 * np.pi))
def test_circle_invariance(theta):
    g = GibbonsHawkingD2(0.8)
    u = np.exp(1j * theta)
    assert np.allclose(g.potential(u * Z, W / u), g.potential(Z, W), atol=1e-12)


def test_smooth_case_is_euclidean():
    g = GibbonsHawkingD2(1.0)
    assert np.allclose(g.potential(Z, W), g.flat_potential(Z, W), atol=1e-12)


def test_asymptotic_to_flat_cone():
    g = GibbonsHawkingD2(0.8)
    gaps = [np.max(np.abs(g.potential(R * Z, R * W) / g.flat_potential(R * Z, R * W) - 1)) for R in (10, 100)]
    assert gaps[1] < gaps[0] / 50


@pytest.mark.parametrize("beta", [0.6, 0.8])
def test_ricci_flat_volume_form(beta):
    rf = RicciFlatD2(beta)
    z, w = rf.sample_points(30, seed=1)
    assert np.max(rf.residual(z, w)) < 1e-6


def test_rejects_bad_beta():
    with pytest.raises(ValueError):
        GibbonsHawkingD2(1.5)
