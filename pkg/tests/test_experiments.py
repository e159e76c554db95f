import csv
import hashlib
import json
import math

import numpy as np
import pytest

from ftdpl import experiments as ex
from ftdpl.ade import TRUE_SOURCE
from ftdpl.config import ConfigError, apply_overrides, ExperimentConfig
from ftdpl.online import OnlineTrace

TINY = [
    "T=12", "burn_in=4", "repeats=2", "cross_sections=[6, 12]", "ident_periods=[6, 12]",
    "solver.population_size=8", "solver.generations=3", "solver.restarts=0",
]


def tiny(tmp_path, *extra, name="out"):
    return apply_overrides(ExperimentConfig(), TINY + [f"output_dir={tmp_path / name}", *extra])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_regret_outputs(tmp_path):
    cfg = tiny(tmp_path)
    manifest = ex.regret_experiment(cfg)
    root = tmp_path / "out"
    assert manifest["complete"] is True
    rows = read_rows(root / "rep0" / "regret.csv")
    assert rows[0] == ["n", "R_n", "avg_R_n"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 13))
    for n, R, avg in rows[1:]:
        assert float(R) >= 0 and float(avg) == pytest.approx(float(R) / int(n))
    assert read_rows(root / "regret_summary.csv")[0] == ["replication", "alpha", "c", "window_lo", "window_hi"]
    assert [r[0] for r in read_rows(root / "regret_summary.csv")[1:]] == ["0", "1", "wesc", "sesc"]
    assert read_rows(root / "rep1" / "regret_burnin.csv")[1][0] == "4"
    svg = (root / "regret_R_n.svg").read_text()
    assert svg.startswith("<svg") and ">R_n<" in svg and ">n<" in svg
    assert ">R_n/n<" in (root / "regret_avg_R_n.svg").read_text()


def test_manifest_checksums(tmp_path):
    manifest = ex.generate_data(tiny(tmp_path))
    root = tmp_path / "out"
    on_disk = json.loads((root / "manifest.json").read_text())
    assert on_disk["files"] == manifest["files"]
    assert set(on_disk["files"]) == {"train.csv", "test.csv"}
    for rel, digest in on_disk["files"].items():
        assert hashlib.sha256((root / rel).read_bytes()).hexdigest() == digest
    assert on_disk["config"]["T"] == 12 and "data" in on_disk["seeds"]
    assert list(on_disk) == sorted(on_disk)


def test_failure_marks_manifest_incomplete(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(ex, "write_observations_csv", boom)
    with pytest.raises(OSError):
        ex.generate_data(tiny(tmp_path))
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["complete"] is False


def test_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        cfg = tiny(tmp_path, "repeats=1", name=name)
        ex.regret_experiment(cfg)
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())["files"]
    assert a == b
    for rel in a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_oos_outputs(tmp_path):
    ex.oos_experiment(tiny(tmp_path))
    rows = read_rows(tmp_path / "out" / "oos.csv")
    assert rows[0] == ["period", "method", "mean", "variance"]
    assert [(r[0], r[1]) for r in rows[1:]] == [
        ("6", "constrained"), ("6", "unconstrained"), ("12", "constrained"), ("12", "unconstrained"),
    ]
    summary = read_rows(tmp_path / "out" / "oos_summary.csv")
    for (p, lower_mean, lower_var), c, u in zip(summary[1:], rows[1::2], rows[2::2]):
        assert int(lower_mean) == int(float(c[2]) < float(u[2]))
        assert int(lower_var) == int(float(c[3]) < float(u[3]))


def test_oos_needs_cross_sections(tmp_path):
    with pytest.raises(ConfigError):
        ex.oos_experiment(tiny(tmp_path, "cross_sections=[]"))


def test_same_solution_same_rows(tmp_path):
    cfg = tiny(tmp_path)
    pinned = OnlineTrace(*(np.tile(TRUE_SOURCE.as_array(), (12, 1)),) + (None,) * 8 + (None,))
    rows = ex.oos_table(cfg, {"ftdpl": pinned, "ftpl": pinned}, [3, 12])
    assert rows[0][2:] == rows[1][2:] and rows[2][2:] == rows[3][2:]


def test_methods_share_training_data(tmp_path):
    cfg = tiny(tmp_path)
    traces, seeds, _ = ex.paired_traces(cfg, 12)
    spec = ex.instance(cfg)
    F, _ = spec.evaluate(traces["ftpl"].x, np.arange(1, 13))
    np.testing.assert_array_equal(np.diag(F), traces["ftpl"].lagrangian)
    assert seeds["ftdpl"] != seeds["ftpl"]


def test_identification_outputs(tmp_path):
    ex.identification_experiment(tiny(tmp_path))
    rows = read_rows(tmp_path / "out" / "ident.csv")
    assert rows[0] == ["period", "s_hat", "l_hat", "t_hat", "rel_err_s", "rel_err_l", "rel_err_t"]
    for r in rows[1:]:
        est = np.array([float(v) for v in r[1:4]])
        np.testing.assert_allclose([float(v) for v in r[4:]], ex.relative_errors(est, TRUE_SOURCE.as_array()))


def test_relative_errors():
    truth = TRUE_SOURCE.as_array()
    np.testing.assert_array_equal(ex.relative_errors(truth, truth), [0.0, 0.0, 0.0])
    err = ex.relative_errors([1.3e6, -22106.0 + 221.06, -215.0], truth)
    assert err[1] == pytest.approx(0.01)
    published = ex.relative_errors([1470600, -22397, -218.939], truth)
    np.testing.assert_allclose(published, [0.1312, 0.0132, 0.0183], atol=5e-4)


def test_power_law_fit():
    n = np.arange(1, 301)
    alpha, c = ex.fit_power_law(n, 3.0 * n**0.8, lo=50)
    assert alpha == pytest.approx(0.8) and c == pytest.approx(3.0)
    assert all(math.isnan(v) for v in ex.fit_power_law(n, np.zeros(300)))
    assert all(math.isnan(v) for v in ex.fit_power_law([60], [1.0]))


def test_svg_is_deterministic():
    a = ex.line_chart_svg([1, 2, 3], {"x": [1.0, np.nan, 2.0]}, "n", "R_n")
    assert a == ex.line_chart_svg([1, 2, 3], {"x": [1.0, np.nan, 2.0]}, "n", "R_n")
    assert a.count("<polyline") == 1
