import json

import pytest

from waveop4d import harness as hz
from waveop4d.cli import main

QUICK = {"name": "quick", "sectors": [1], "checks": [1, 2, 3, 4, 7],
         "kernel_grid": {"rho_min": 1.0, "rho_max": 20.0, "n_r": 6, "n_theta": 2}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


@pytest.fixture(scope="module")
def quick_runs(tmp_path_factory):
    """The quick scenario run twice: once through the library, once through the CLI."""
    base = tmp_path_factory.mktemp("quick")
    cfg_path = _write(base, QUICK)
    status, report = hz.run_scenario(hz.load_config(cfg_path), base / "a", log=None)
    code = main(["all", "--config", str(cfg_path), "--out", str(base / "b"), "--quiet"])
    return {"a": base / "a", "b": base / "b", "status": status, "report": report, "code": code,
            "cfg": cfg_path}


def test_missing_config_exits_2_without_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["all", "--config", str(tmp_path / "nope.json"), "--out", str(out), "--quiet"]) == hz.EXIT_CONFIG
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    {"nonsense": 1},
    {"kernel_grid": {"n_points": 4}},
    {"lam0": -1.0},
    {"sectors": [0]},
    {"sectors": [1, 1]},
    {"checks": [13]},
    {"truncation_fractions": [0.5, 0.25, 1.0]},
    {"potential": {"kind": "square-well"}},
    {"coefficients": [[1.0, 0.0], [0.0, 1.0]]},
])
def test_invalid_configs_rejected(bad, tmp_path):
    with pytest.raises(hz.ConfigError):
        hz.validate_config(bad)
    assert main(["eigensolve", "--config", str(_write(tmp_path, bad)), "--out", str(tmp_path / "o"),
                 "--quiet"]) == hz.EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_unparseable_config_and_unknown_scenario(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(hz.ConfigError):
        hz.load_config(p)
    with pytest.raises(hz.ConfigError):
        hz.builtin_config("l9")


def test_defaults_and_hash():
    cfg = hz.validate_config({})
    assert cfg.sectors == (1, 2) and cfg.checks == hz.CHECK_IDS
    # output location and thread count do not change the numbers
    assert hz.validate_config({"output": "elsewhere", "threads": 4}).config_hash == cfg.config_hash
    assert hz.validate_config({"lam0": 0.25}).config_hash != cfg.config_hash
    for name in hz.BUILTIN_SCENARIOS:
        hz.builtin_config(name)


def test_thread_resolution(monkeypatch):
    cfg = hz.validate_config({})
    monkeypatch.delenv("WAVEOP_THREADS", raising=False)
    assert hz.resolve_threads(None, cfg) == 1
    monkeypatch.setenv("WAVEOP_THREADS", "3")
    assert hz.resolve_threads(None, cfg) == 3
    assert hz.resolve_threads(2, cfg) == 2
    assert hz.resolve_threads(None, hz.validate_config({"threads": 5})) == 5
    monkeypatch.setenv("WAVEOP_THREADS", "many")
    with pytest.raises(hz.ConfigError):
        hz.resolve_threads(None, cfg)


def test_quick_scenario_passes(quick_runs):
    assert quick_runs["status"] == hz.EXIT_OK and quick_runs["code"] == hz.EXIT_OK
    rep = quick_runs["report"]
    assert rep["status"] == "pass" and rep["failing"] == []
    assert [c["id"] for c in rep["checks"]] == [1, 2, 3, 4, 7]
    assert (quick_runs["a"] / "report.md").read_text().startswith("# Scenario `quick`: PASS")


def test_artifacts_identical_across_runs(quick_runs):
    a, b = quick_runs["a"], quick_runs["b"]
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    head = (a / "eigenstate_l1.csv").read_text().splitlines()[0]
    assert quick_runs["report"]["config_hash"] in head


def test_stage_subcommands_and_heatmaps(quick_runs, tmp_path):
    out = tmp_path / "stages"
    cfg = str(quick_runs["cfg"])
    # kernel grids need the eigenstates first
    assert main(["kernel-grid", "--config", cfg, "--out", str(out), "--quiet"]) == hz.EXIT_ACCEPTANCE
    assert main(["eigensolve", "--config", cfg, "--out", str(out), "--quiet"]) == hz.EXIT_OK
    assert main(["kernel-grid", "--config", cfg, "--out", str(out), "--quiet"]) == hz.EXIT_OK
    h = quick_runs["report"]["config_hash"]
    svgs = sorted(out.glob("heatmap_ws_l1_theta*.svg"))
    assert len(svgs) == 2 and all(f"config_hash={h}" in p.read_text() for p in svgs)
    assert (out / "kernel_ws_l1.csv").read_text().startswith(f"# config_hash={h}\n")
    # probes for checks 1, 2 and 7 have not run yet
    with pytest.raises(hz.ArtifactError, match="probe_taylor.csv"):
        hz.emit_report(out)
    assert main(["probes", "--config", cfg, "--out", str(out), "--quiet"]) == hz.EXIT_OK
    assert main(["report", "--config", cfg, "--out", str(out)]) == hz.EXIT_OK


def test_empty_directory_lists_missing_artifacts(tmp_path):
    with pytest.raises(hz.ArtifactError) as err:
        hz.emit_report(tmp_path)
    msg = str(err.value)
    for name in hz.expected_artifacts(hz.ScenarioConfig()):
        assert name in msg
    assert main(["report", "--out", str(tmp_path), "--quiet"]) == hz.EXIT_ACCEPTANCE


def test_failing_check_names_its_anchor(tmp_path, capsys):
    cfg = hz.validate_config({"checks": [1]})
    ctx = hz.open_context(cfg, tmp_path)
    ctx.record([hz.make_entry(1, [("sup relative error", False, 0.5, 1e-3)])])
    rep = hz.emit_report(tmp_path)
    assert rep["status"] == "fail"
    assert rep["failing"] == [hz.ANCHORS[1][1]]
    assert main(["report", "--out", str(tmp_path)]) == hz.EXIT_ACCEPTANCE
    out = capsys.readouterr().out
    assert "FAIL" in out and "sup relative error" in out


def test_changed_config_invalidates_old_checks(tmp_path):
    ctx = hz.open_context(hz.validate_config({"checks": [1]}), tmp_path)
    ctx.record([hz.make_entry(1, [("x", True, 0.0, 1.0)])])
    hz.open_context(hz.validate_config({"checks": [1], "lam0": 0.25}), tmp_path)
    assert not (tmp_path / "checks.json").exists()


def test_full_run_report_contents(full_run):
    out = full_run["out"]
    for name in hz.expected_artifacts(hz.builtin_config("l1-dichotomy")):
        assert (out / name).exists(), name
    md = (out / "report.md").read_text()
    assert "ell=1 Y-LARGE" in md and "ell=2 Y-LARGE" in md
    h = full_run["report"]["config_hash"]
    for p in out.glob("*.csv"):
        assert p.read_text().startswith(f"# config_hash={h}\n"), p.name
    assert all(f"config_hash={h}" in p.read_text() for p in out.glob("*.svg"))
