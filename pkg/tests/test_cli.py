import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conekahler.cli import RunConfig, RunReport, _clean, main, run, svg_plot
from conekahler.errors import ConfigInvalid


def load(out):
    return json.loads((out / "report.json").read_text())


def scalars(rep, stage):
    return {k: v["value"] for k, v in rep["stages"][stage]["scalars"].items()}


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_energy_formula_only(tmp_path):
    assert main(["energy", "--formula-only", "--out", str(tmp_path)]) == 0
    s = scalars(load(tmp_path), "energy")
    assert s["formula"] == pytest.approx(0.36)
    assert s["elliptic_family"] == pytest.approx([3.0, 1.92, 1.08])
    assert s["quartic_family"] == pytest.approx([3.8, 2.2, 1.6, 0.2])


def test_indicial_roots_smooth_limit(tmp_path):
    assert main(["indicial-roots", "--beta", "1.0", "--out", str(tmp_path)]) == 0
    rep = load(tmp_path)
    assert [1.0, -3.0] in scalars(rep, "indicial-roots")["root_pairs"]
    assert header(tmp_path / "indicial_roots.csv") == ["m", "n", "lambda", "delta_plus", "delta_minus"]


@pytest.mark.parametrize("argv", [
    ["flat-metric", "--beta", "1.2"],
    ["flat-metric", "--preset", "d3-half", "--beta", "0.6"],
    ["linear-solve", "--delta", "0.5"],
    ["flat-metric", "--preset", "d3-general", "--beta", "0.3"],
    ["ma-solve", "--a", "0.9"],
])
def test_invalid_config_exit_code(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert not (tmp_path / "report.json").exists()


def test_validate_defaults_holder_exponent():
    cfg = RunConfig("flat-metric", beta=0.8)
    cfg.validate()
    assert cfg.a == pytest.approx(0.125)
    with pytest.raises(ConfigInvalid):
        RunConfig("nope").validate()


def test_report_is_byte_stable_across_reruns(tmp_path):
    a = tmp_path / "a"
    argv = ["flat-metric", "--samples", "20", "--out", str(a)]
    assert main(argv) == 0
    first = {name: (a / name).read_bytes() for name in ("report.json", "flat_metric.csv")}
    assert main(argv) == 0
    for name, blob in first.items():
        assert (a / name).read_bytes() == blob
    s = scalars(load(a), "flat-metric")
    assert s["c"] == pytest.approx(1.6)
    assert header(a / "flat_metric.csv") == ["z_re", "z_im", "w_re", "w_im", "r2", "g11", "g12_re", "g12_im", "g22"]
    assert "flat-metric" in json.loads((a / "timings.json").read_text())


def test_link_spectrum_artifacts(tmp_path):
    assert main(["link-spectrum", "--out", str(tmp_path)]) == 0
    assert header(tmp_path / "spectrum.csv") == ["m", "n", "lambda"]
    ET.parse(tmp_path / "spectrum.svg")
    rep = load(tmp_path)
    assert "spectrum.svg" in rep["artifacts"]


def test_linear_solve_stage(tmp_path):
    assert main(["linear-solve", "--out", str(tmp_path)]) == 0
    assert header(tmp_path / "linear_solution.csv") == ["r", "f", "u"]


def test_small_ma_solve(tmp_path):
    code = main(["ma-solve", "--grid", "48", "--t-steps", "4", "--samples", "20", "--no-decay",
                 "--out", str(tmp_path)])
    assert code == 0
    assert header(tmp_path / "continuity.csv") == ["t", "sup", "weighted", "trace_min", "trace_max", "residual",
                                                   "newton_iterations"]
    assert header(tmp_path / "potential.csv") == ["s1", "s2", "u"]
    rep = load(tmp_path)
    assert "gamma" not in rep["stages"]["ma-solve"]["scalars"]


def test_ma_solve_needs_d2(tmp_path):
    rep = run(RunConfig("ma-solve", preset="d3-half", beta=0.5, out=str(tmp_path)))
    assert rep.stages["ma-solve"]["status"] == "error"
    assert not rep.ok


def test_report_status_follows_checks():
    rep = RunReport(config={})
    rep.scalar("s", "x", 1.0, 1e-3, True)
    assert rep.ok
    rep.scalar("s", "y", 2.0, 1e-3, False)
    assert not rep.ok
    body = json.loads(rep.to_json())
    assert body["stages"]["s"]["status"] == "failed"
    assert list(body) == sorted(body)


@given(st.one_of(st.floats(allow_nan=True), st.lists(st.floats(allow_nan=True), max_size=4)))
def test_clean_is_json_safe(v):
    out = json.dumps(_clean(v), allow_nan=False)
    json.loads(out)


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=20))
def test_svg_deterministic_and_parseable(ys):
    x = np.arange(len(ys), dtype=float) + 1
    a = svg_plot([("y", x, np.array(ys))], "t", "x", "y", logy=True)
    assert a == svg_plot([("y", x, np.array(ys))], "t", "x", "y", logy=True)
    ET.fromstring(a)


def test_clean_special_values():
    assert _clean(float("nan")) == "nan"
    assert _clean(-math.inf) == "-inf"
    assert _clean(np.array([1, 2])) == [1, 2]
