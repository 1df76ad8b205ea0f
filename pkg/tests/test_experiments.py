import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rbfmol import experiments
from rbfmol.cli import main
from rbfmol.experiments import (
    SCENARIOS,
    ConfigError,
    load_config,
    make_config,
    run_scenario,
    run_table,
)
from rbfmol.plots import emit_plots, plot_errors, plot_spectra

SVG = "{http://www.w3.org/2000/svg}"
SMALL = dict(m=4, n_Z=60, n_X=90, eval_n=300, n_output_times=4)


def test_registry_covers_all_scenarios():
    assert set(SCENARIOS) == {"ex1-spectra", "ex1-table", "ex1-timing", "ex2-table", "ex3-grid",
                              "ex4-torus", "ex4-orthocircle"}
    for name in SCENARIOS:
        make_config(name).validate()
    orth = make_config("ex4-orthocircle")
    assert (orth.n_Z, orth.n_X, orth.m) == (3312, 5532, 4)


@pytest.mark.parametrize("bad", [dict(n_Z=100, n_X=50), dict(m=3), dict(t0=1.0, t1=1.0),
                                 dict(mode="fast"), dict(ratio=0.5), dict(surface="klein")])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        make_config("custom", **bad).validate()


def test_unknown_scenario_and_key():
    with pytest.raises(ConfigError):
        make_config("ex9")
    with pytest.raises(ConfigError):
        make_config("custom", colour="red")


def test_ratio_override():
    cfg = make_config("ex1-table", ratio=1.5)
    assert cfg.resolved_n_X == 987


def test_run_scenario_outputs(tmp_path):
    cfg = make_config("custom", out=str(tmp_path), snapshot_times=[0.5], **SMALL)
    rep = run_scenario(cfg)
    run = tmp_path / "custom"
    names = {p.name for p in run.iterdir()}
    assert {"config.toml", "spectrum.csv", "spectrum.json", "steps.csv", "errors.csv",
            "report.json", "snapshot_t0.5.csv"} <= names
    assert rep.ok and rep.status == "completed"
    assert math.isfinite(rep.kappa) and math.isfinite(rep.final_error)
    assert (run / "errors.csv").read_text().splitlines()[0] == "t,linf_err"
    assert len(rep.errors) == 4
    assert (run / "snapshot_t0.5.csv").read_text().splitlines()[0] == "x,y,z,u"
    saved = json.loads((run / "report.json").read_text())
    assert saved["accepted_steps"] == rep.accepted_steps


def test_config_replay_is_byte_identical(tmp_path):
    cfg = make_config("custom", out=str(tmp_path / "a"), **SMALL)
    run_scenario(cfg)
    first = tmp_path / "a" / "custom"
    experiments._SAMPLE_CACHE.clear()
    replay = load_config(first / "config.toml", out=str(tmp_path / "b"))
    run_scenario(replay)
    second = tmp_path / "b" / "custom"
    for name in ("spectrum.csv", "steps.csv", "errors.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_failures_are_captured(tmp_path):
    cfg = make_config("custom", out=str(tmp_path), max_steps=3, **SMALL)
    rep = run_scenario(cfg)
    assert not rep.ok
    assert "solve" in rep.failures and math.isnan(rep.final_error)


def test_small_table_with_nan_cells(tmp_path):
    cfg = make_config("custom", grid=True, n_Z_list=[40, 60], n_X_list=[40, 60], m=4,
                      eval_n=200, n_output_times=2, out=str(tmp_path))
    rows, reports, complete = run_table(cfg)
    assert not complete
    text = (tmp_path / "custom" / "table.csv").read_text().splitlines()
    assert text[0] == "n_Z,nx40_kappa,nx40_err,nx40_steps,nx60_kappa,nx60_err,nx60_steps"
    assert rows[1][0] == "60" and all(math.isnan(v) for v in rows[1][1:4])
    assert all(math.isfinite(v) for v in rows[0][1:])
    side = json.loads((tmp_path / "custom" / "table.json").read_text())
    assert side["nan_causes"] == {"60/nx40": "n_X < n_Z"}


def _spectrum_csv(path, n, seed=0):
    r = np.random.default_rng(seed).normal(size=(n, 2))
    path.write_text("re,im\n" + "\n".join(f"{a},{b}" for a, b in r) + "\n")
    return path


def _collection_markers(svg):
    counts = []
    for g in ET.parse(svg).iter(SVG + "g"):
        if g.get("id", "").startswith("PathCollection"):
            counts.append(len(list(g.iter(SVG + "use"))))
    return counts


def test_spectrum_plot_marker_count(tmp_path):
    out = plot_spectra([_spectrum_csv(tmp_path / "s.csv", 658)], ["run"], tmp_path / "s.svg")
    # the data collection comes first, the legend handle second
    assert _collection_markers(out)[0] == 658


def test_empty_error_plot_says_no_data(tmp_path):
    empty = tmp_path / "errors.csv"
    empty.write_text("t,linf_err\n")
    out = plot_errors([empty], ["run"], tmp_path / "e.svg")
    assert "no data" in out.read_text()


def test_legend_entries_match_reports(tmp_path):
    dirs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        (d / "report.json").write_text("{}")
        _spectrum_csv(d / "spectrum.csv", 20, seed=k)
        (d / "errors.csv").write_text("t,linf_err\n0.5,1e-3\n1.0,2e-3\n")
        dirs.append(d)
    paths = emit_plots(dirs, tmp_path / "figs")
    assert {p.name for p in paths} == {"spectra.svg", "steps.svg", "errors.svg"}
    svg = (tmp_path / "figs" / "errors.svg").read_text()
    legend = [g for g in ET.fromstring(svg).iter(SVG + "g") if g.get("id", "").startswith("legend")]
    assert len(legend) == 1
    labels = [t for t in ("run0", "run1") if t in svg]
    assert labels == ["run0", "run1"]
    assert "no data" in (tmp_path / "figs" / "steps.svg").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["solve", "--nz", "100", "--nx", "50", "--out", str(tmp_path)]) == 1
    assert main(["spectrum", "--scenario", "nope", "--out", str(tmp_path)]) == 1
    assert main(["points", "--nz", "40", "--nx", "60", "--m", "4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "custom" / "Z.csv").exists() and (tmp_path / "custom" / "X.csv").exists()
    assert main(["spectrum", "--nz", "40", "--ratio", "1.5", "--m", "4", "--out", str(tmp_path)]) == 0
    assert "stable=" in capsys.readouterr().out
    toml = tmp_path / "custom" / "config.toml"
    assert main(["solve", "--config", str(toml), "--rtol", "1e-4", "--out", str(tmp_path / "r")]) == 0
    assert "rtol = 0.0001" in (tmp_path / "r" / "custom" / "config.toml").read_text()
