import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.errors import IndicialResonance
from conekahler.weighted_analysis import (RadialGrid, WeightedField, apply_laplacian, decay_constant,
                                          indicial_pair, random_compact_source, rescale, round_trip_residual,
                                          solve_linear, weighted_holder, weighted_sup)

deltas = st.floats(-1.9, -0.1)


def power_error(delta, n, lam=0.0):
    g = RadialGrid(n=n)
    u = WeightedField.radial(g, lambda r: r**delta, lam)
    exact = ((delta + 2) * delta - lam) * g.r ** (delta - 2)
    return float(np.max(np.abs(apply_laplacian(u).coeffs[0] / exact - 1)))


@pytest.mark.parametrize("delta", [-1.5, -1.0, -0.5, 0.7])
def test_laplacian_of_power_fourth_order(delta):
    e1, e2 = power_error(delta, 256), power_error(delta, 512)
    assert math.log2(e1 / e2) > 3.5


def test_laplacian_with_link_eigenvalue():
    assert power_error(-0.5, 512, lam=3.0) < 1e-6


@given(deltas)
def test_power_source_gives_power_solution(delta):
    g = RadialGrid(n=400)
    f = WeightedField.radial(g, lambda r: (delta + 2) * delta * r ** (delta - 2))
    u = solve_linear(f, delta)
    # exact up to the O(h^4) truncation error of the stencil
    assert np.max(np.abs(u.coeffs[0] / g.r**delta - 1)) < 1e-5


@pytest.mark.parametrize("delta", [-1.5, -1.0, -0.5])
def test_decay_bound_and_round_trip(delta):
    g = RadialGrid()
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = WeightedField(g, random_compact_source(g, rng), np.array([0.0]))
        u = solve_linear(f, delta)
        assert weighted_sup(u, delta) <= 1.01 * decay_constant(delta) * weighted_sup(f, delta - 2)
        assert round_trip_residual(f, u, delta) < 1e-6


def test_higher_modes_solve():
    g = RadialGrid()
    rng = np.random.default_rng(2)
    lam = np.array([0.0, 4.0625, 11.25])
    f = WeightedField(g, random_compact_source(g, rng, n_modes=3), lam, link_values=np.eye(3))
    u = solve_linear(f, -1.0)
    assert round_trip_residual(f, u, -1.0) < 1e-6


def test_resonance_detected():
    g = RadialGrid(n=64)
    f = WeightedField.radial(g, np.ones(64), lam=3.0)
    with pytest.raises(IndicialResonance):
        solve_linear(f, 1.0)
    with pytest.raises(IndicialResonance):
        solve_linear(WeightedField.radial(g, np.ones(64)), -2.0)


@given(st.floats(0, 50))
def test_indicial_pair(lam):
    p, m = indicial_pair(lam)
    assert p + m == pytest.approx(-2)
    assert p * (p + 2) == pytest.approx(lam, abs=1e-9 * (1 + lam))


@given(deltas)
def test_decay_constant_sign(delta):
    assert decay_constant(delta) > 0


@given(st.floats(0.1, 10), st.floats(-1.5, 1.0))
def test_weighted_norms_scale_invariant(lam, gamma):
    g = RadialGrid(n=200)
    f = WeightedField.radial(g, lambda r: np.sin(np.log(r)) * r**-0.7)
    fr = rescale(f, lam, gamma)
    assert weighted_sup(fr, gamma) == pytest.approx(weighted_sup(f, gamma), rel=1e-10)
    a = 0.4
    h0 = weighted_holder(f, a, gamma, n_pairs=500, seed=1)
    h1 = weighted_holder(fr, a, gamma, n_pairs=500, seed=1)
    assert h1.seminorm == pytest.approx(h0.seminorm, rel=1e-9)
    assert h0.combined >= h0.sup


def test_field_shape_checked():
    with pytest.raises(ValueError):
        WeightedField(RadialGrid(n=10), np.zeros((2, 10)), np.array([0.0]))


def test_csv(tmp_path):
    g = RadialGrid(n=8)
    WeightedField.radial(g, g.r).to_csv(tmp_path / "u.csv")
    rows = (tmp_path / "u.csv").read_text().splitlines()
    assert rows[0] == "mode,r,value" and len(rows) == 9
