"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerance.

Each test records its line (shown in the terminal summary of any pytest run
and printed directly with ``-s``) before asserting, so a failing criterion
still reports the measured numbers.
"""

import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from acceptance_log import record
from conekahler.cp1_cone_metrics import football_metric, triangle_metric_d3_half
from conekahler.curvature_energy import elliptic_family, energy_formula, energy_numeric, quartic_family
from conekahler.curve_geometry import ConeCurveProblem, track_roots
from conekahler.flat_cone_metric import preset_base, preset_flat_metric
from conekahler.link_spectrum import LinkMetric, expected_link_volume, indicial_roots, link_volume, spectrum
from conekahler.monge_ampere import (MongeAmpereOperator, ReducedPotentialProblem, RicciFlatD2, build_initial,
                                     continuity_run, manufactured_recovery, newton_solve, volume_form_residual)
from conekahler.weighted_analysis import (RadialGrid, WeightedField, apply_laplacian, decay_constant,
                                          random_compact_source, round_trip_residual, solve_linear, weighted_sup)
from oracles import (dense_roots, flat_potential_d2, flat_potential_d3_half, football_spectrum_oracle,
                     match_to_oracle)


def test_criterion_01_closed_form_potentials():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    z, w = rng.normal(size=(2, 100)) + 1j * rng.normal(size=(2, 100))
    m2 = preset_flat_metric("d2", 0.8)
    m3 = preset_flat_metric("d3-half", 0.5)
    e2 = np.max(np.abs(m2.potential(z, w) / flat_potential_d2(z, w, 0.8) - 1))
    e3 = np.max(np.abs(m3.potential(z, w) / flat_potential_d3_half(z, w) - 1))
    dt = time.perf_counter() - t0
    ok = e2 < 1e-8 and e3 < 1e-8 and dt < 1.0
    record(1, ok, f"closed-form r^2 rel. error d2 {e2:.2e}, d3-half {e3:.2e} (< 1e-8); {dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_02_volume_identity():
    t0 = time.perf_counter()
    res = {}
    for name, beta, tol in [("d2", 0.6, 1e-4), ("d2", 0.8, 1e-4), ("d3-half", 0.5, 1e-4), ("d3-general", 0.8, 1e-3)]:
        m = preset_flat_metric(name, beta)
        z, w = m.sample_sphere(200, seed=0)
        res[(name, beta)] = (m.volume_identity_residual(z, w)[0], tol)
    dt = time.perf_counter() - t0
    ok = all(r < tol for r, tol in res.values()) and dt < 60
    txt = ", ".join(f"{n} {b:g}: {r:.1e}" for (n, b), (r, _) in res.items())
    record(2, ok, f"volume identity max residual {txt}; {dt:.1f} s (< 60 s)")
    assert ok


def test_criterion_03_gauss_bonnet(d3_general_metric):
    metrics = {f"football {b:g}": football_metric(b) for b in (0.6, 0.8, 1.0)}
    metrics["triangle 0.5"] = triangle_metric_d3_half()
    metrics["liouville d3 0.8"] = d3_general_metric.base
    errs = {k: abs(g.gauss_bonnet() - g.c) for k, g in metrics.items()}
    worst = max(errs.values())
    ok = worst < 1e-3
    record(3, ok, f"Gauss-Bonnet worst |GB - c| = {worst:.1e} over {len(errs)} metrics (< 1e-3)")
    assert ok


def test_criterion_04_link_volume(d3_general_metric):
    bases = {"d2 0.6": football_metric(0.6), "d2 0.8": football_metric(0.8), "d3-half": triangle_metric_d3_half(),
             "d3-general 0.8": d3_general_metric.base}
    rel = {k: abs(link_volume(LinkMetric(b)) / expected_link_volume(b.c) - 1) for k, b in bases.items()}
    round_vol = link_volume(LinkMetric(football_metric(1.0)))
    round_err = abs(round_vol / (2 * np.pi**2) - 1)
    ok = max(rel.values()) < 1e-3 and round_err < 1e-10
    record(4, ok, f"link volume worst rel. gap {max(rel.values()):.1e} (< 1e-3); beta=1 vs 2 pi^2 {round_err:.1e}")
    assert ok


def test_criterion_05_spectrum_oracle():
    spec = spectrum(LinkMetric(football_metric(0.8)), m_max=4, n_per_mode=8)
    gap = float(np.max(np.abs(spec.lowest(10) - football_spectrum_oracle(0.8, 10))))
    round_spec = spectrum(LinkMetric(football_metric(1.0)), m_max=4, n_per_mode=8).lowest(30)
    expected = np.concatenate([[k * (k + 2)] * (k + 1) ** 2 for k in range(4)])
    round_err = float(np.max(np.abs(round_spec - expected)))
    ok = gap < 1e-4 and round_err < 1e-8
    record(5, ok, f"football lowest 10 vs shooting oracle {gap:.1e} (< 1e-4); beta=1 k(k+2), (k+1)^2 error "
                  f"{round_err:.1e}")
    assert ok


def test_criterion_06_indicial_gap():
    found = {}
    for d, preset in ((2, "d2"), (3, "d3-general")):
        for beta in (0.6, 0.75, 0.9):
            roots = indicial_roots(spectrum(LinkMetric(preset_base(preset, beta))))
            found[(d, beta)] = roots.in_gap()
    bad = {k: v for k, v in found.items() if len(v)}
    ok = not bad
    record(6, ok, f"indicial roots in (-2, 0): {'none' if ok else bad} over 6 (d, beta) cases")
    assert ok


def test_criterion_07_linear_solver():
    t0 = time.perf_counter()
    errs = []
    for n in (256, 512):
        g = RadialGrid(n=n)
        u = WeightedField.radial(g, lambda r: r**-1.0)
        errs.append(np.max(np.abs(apply_laplacian(u).coeffs[0] / (-1.0 * g.r**-3.0) - 1)))
    order = np.log2(errs[0] / errs[1])
    grid = RadialGrid()
    rng = np.random.default_rng(0)
    worst, worst_rt = 0.0, 0.0
    for delta in (-1.5, -1.0, -0.5):
        for _ in range(20):
            f = WeightedField(grid, random_compact_source(grid, rng), np.array([0.0]))
            u = solve_linear(f, delta)
            worst = max(worst, weighted_sup(u, delta) / (decay_constant(delta) * weighted_sup(f, delta - 2)))
            worst_rt = max(worst_rt, round_trip_residual(f, u, delta))
    dt = time.perf_counter() - t0
    ok = order > 3.5 and worst <= 1.01 and worst_rt < 1e-6 and dt < 30
    record(7, ok, f"power-law order {order:.2f} (4th-order stencil); DEC ratio {worst:.4f} (<= 1.01); "
                  f"round trip {worst_rt:.1e} (< 1e-6); {dt:.1f} s (< 30 s)")
    assert ok


def test_criterion_08_manufactured_recovery():
    t0 = time.perf_counter()
    prob = ReducedPotentialProblem(0.8, N=256)
    out = manufactured_recovery(prob)
    A = prob.flat_hessian()[1:-1, 1:-1]
    zero = newton_solve(MongeAmpereOperator(prob, A), np.zeros((254, 254)), np.zeros((256, 256)))
    exact_zero = bool(np.all(zero.u == 0))
    dt = time.perf_counter() - t0
    ok = out.sup_error < 1e-5 and exact_zero and dt < 300
    record(8, ok, f"manufactured sup error {out.sup_error:.1e} on 256^2 (< 1e-5); t=0 exactly 0: {exact_zero}; "
                  f"{dt:.1f} s (< 300 s)")
    assert ok


def test_criterion_09_end_to_end_d2():
    t0 = time.perf_counter()
    init = build_initial(ReducedPotentialProblem(0.8, N=128))
    state = continuity_run(init, -1.0, 10)
    reduced = volume_form_residual(init, state)
    rf = RicciFlatD2(0.8)
    z, w = rf.sample_points(200, seed=0)
    full = float(np.max(rf.residual(z, w)))
    fit = rf.decay_diagnostics()
    dt = time.perf_counter() - t0
    boundary = fit.window[0]
    near = abs(fit.gamma - boundary) <= 0.3
    ok = max(reduced, full) < 1e-6 and fit.gamma < 0 and near and dt < 1800
    record(9, ok, f"residual reduced {reduced:.1e}, zw=1 {full:.1e} (< 1e-6); gamma {fit.gamma:.3f} "
                  f"(< 0: {fit.gamma < 0}; within 0.3 of {boundary:.2f}: {near}); {dt:.0f} s (< 1800 s)")
    assert ok


def test_criterion_10_energy():
    b = Fraction(4, 5)
    el, qu = elliptic_family(b), quartic_family(b)
    formulas = [energy_formula(2, b), el.smooth, el.limit, el.lost, qu.smooth, qu.limit, qu.lost, qu.bubble_energy]
    expected = [1 - b * b, 3, 3 * b * b, 3 * (1 - b * b), 7 - 4 * b, 4 * b - 1, 8 * (1 - b), 1 - b]
    exact_ok = formulas == expected and all(isinstance(v, (int, Fraction)) for v in formulas)
    rep = energy_numeric(0.8)
    agrees = rep.agrees(0.15)
    verdict = "agrees" if agrees else "MISMATCH (evidence against the conjecture, reported only)"
    record(10, exact_ok, f"formulas exact: {exact_ok}; numeric E = {rep.numeric:.4f} +- {rep.uncertainty:.4f} vs "
                         f"{float(rep.formula):.2f}, gap {100 * rep.relative_gap:.1f}% (15% band): {verdict}")
    assert exact_ok


def test_criterion_11_root_tracking():
    P = ConeCurveProblem({(1, 1): 1, (3, 0): -0.1, (0, 3): -0.1, (0, 0): -0.1}, 0.8)
    z = 20 * np.exp(1j * np.linspace(0, 2 * np.pi, 401))
    tb = track_roots(P, z)
    gap = match_to_oracle(tb.w, [dense_roots(P.coeffs, zk) for zk in z])
    fine = track_roots(P, 20 * np.exp(1j * np.linspace(0, 2 * np.pi, 1601)))
    stable = fine.labels == tb.labels and np.abs(fine.w[::4] - tb.w).max() < 1e-10
    ok = gap < 1e-10 and stable
    record(11, ok, f"tracked roots vs dense oracle {gap:.1e} on |z| = 20 (< 1e-10); labels stable under 4x "
                   f"refinement: {stable}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
