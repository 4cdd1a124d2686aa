import json
import os

import numpy as np
import pytest

INPUT_DIR = os.path.join(os.path.dirname(__file__), "input")
QUICK_RUN = ["--t-end", "300", "--transient", "50", "--quiet"]


def test_systems_list(capsys):
    from lib.interface.cli import run

    assert run(["systems", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 19
    assert lines[0].startswith("rossler ")

    assert run(["systems", "list", "--json", "--all"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data) == 20


def test_systems_show(capsys):
    from lib.interface.cli import run

    assert run(["systems", "show", "sprott_j", "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["expected_verdict"] == "crossing"
    assert run(["systems", "show"]) == 1


def test_unknown_system_is_a_usage_error(capsys):
    from lib.interface.cli import run

    assert run(["classify", "--system", "nosuch", "--quiet"]) == 1
    assert "[ERROR]" in capsys.readouterr().err


def test_bad_command_line(capsys):
    from lib.interface.cli import run

    assert run(["frobnicate"]) == 1
    assert run(["systems", "list", "--bogus"]) == 1
    assert run(["fixed-points", "--system", "sprott_f", "--param", "a"]) == 1
    assert run(["fixed-points", "--system", "sprott_f", "--param", "q=1"]) == 1
    assert run(["integrate", "--system", "sprott_f", "--ic", "1,2", "--out", "x.csv"]) == 1
    assert run(["--help"]) == 0
    err = capsys.readouterr().err
    assert err.count("[ERROR]") == 5


def test_wrap_number_json(capsys):
    from lib.interface.cli import run

    assert run(["wrap-number", "--system", "sprott_f", "--json", "--quiet"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["defined"]
    assert data["w"]["value"] == pytest.approx(59.4, rel=0.05)
    assert data["audit"]["match"] is True


def test_fixed_points_json(capsys):
    from lib.interface.cli import run

    assert run(["fixed-points", "--system", "rossler_centered", "--json", "--quiet"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["fixed_points"]) == 2
    roles = sorted(p["role"] for p in data["fixed_points"])
    assert roles == ["inner", "outer"]


def test_trajectory_pipeline(tmp_path, capsys):
    from lib.interface.cli import run
    from lib.interface.io import CURVATURE_HEADER, PAIRS_HEADER, SECTION_HEADER, read_csv

    traj = str(tmp_path / "traj.csv")
    curv = str(tmp_path / "curv.csv")
    section = str(tmp_path / "section.csv")
    pairs = str(tmp_path / "pairs.csv")

    assert run(["integrate", "--system", "rossler", "--out", traj] + QUICK_RUN) == 0
    assert run(["curvature", "--system", "rossler", "--traj", traj, "--out", curv, "--quiet"]) == 0
    data = read_csv(curv, CURVATURE_HEADER)
    assert data.shape == (25001, 7)
    np.testing.assert_allclose(data[:, 4], data[:, 5] + data[:, 6], rtol=0,
                               atol=1e-9 * np.abs(data[:, 4:]).max())

    assert run(["poincare", "--system", "rossler", "--traj", traj, "--out", section, "--quiet"]) == 0
    points = read_csv(section, SECTION_HEADER)
    assert len(points) > 10
    assert np.all(points[:, 4] >= 0)

    capsys.readouterr()
    assert run(["return-map", "--in", section, "--out", pairs, "--json", "--quiet"]) == 0
    rmap = json.loads(capsys.readouterr().out)
    assert rmap["crossings"] == len(points)
    assert not rmap["partitioned"]
    rows = read_csv(pairs, PAIRS_HEADER)
    assert len(rows) == len(points) - 1
    assert np.all(rows[:, 2] == -1)

    assert run(["return-map", "--in", section, "--gamma", str(tmp_path / "gamma.json"), "--quiet"]) == 2
    assert not os.path.exists(str(tmp_path / "gamma.json"))


def test_return_map_gamma_from_section_file(tmp_path):
    from lib.interface.cli import run
    from lib.interface.io import SECTION_HEADER, write_csv

    rho = np.empty(1000)
    rho[0] = 0.3
    for k in range(1, rho.size):
        rho[k] = 3.9 * rho[k - 1] * (1 - rho[k - 1])
    rows = np.column_stack([np.arange(rho.size), np.zeros((rho.size, 3)), rho])
    section = str(tmp_path / "section.csv")
    write_csv(section, SECTION_HEADER, rows)

    gamma_path = str(tmp_path / "gamma.json")
    assert run(["return-map", "--in", section, "--gamma", gamma_path, "--quiet"]) == 0
    with open(gamma_path, "r", encoding="utf-8") as f:
        gamma = json.load(f)
    assert gamma["m"] == 2
    assert gamma["matrix"] == [[1, 1], [1, 1]]


def test_short_section_file(capsys):
    from lib.interface.cli import run

    assert run(["return-map", "--in", os.path.join(INPUT_DIR, "short_section.csv")]) == 0
    captured = capsys.readouterr()
    assert "m = None" in captured.out
    assert "[WARNING]" in captured.err


def test_malformed_trajectory_file(tmp_path, capsys):
    from lib.interface.cli import run

    out = str(tmp_path / "curv.csv")
    assert run(["curvature", "--system", "rossler", "--traj", os.path.join(INPUT_DIR, "malformed.csv"),
                "--out", out]) == 1
    assert "line 3" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_blowup_is_a_numerical_failure(tmp_path):
    from lib.interface.cli import run

    out = str(tmp_path / "traj.csv")
    code = run(["integrate", "--system-file", os.path.join(INPUT_DIR, "blowup.txt"), "--ic", "1,0,0",
                "--t-end", "2", "--transient", "0", "--out", out, "--quiet"])
    assert code == 2
    assert not os.path.exists(out)


def test_syntax_error_in_system_file(capsys):
    from lib.interface.cli import run

    assert run(["fixed-points", "--system-file", os.path.join(INPUT_DIR, "bad_syntax.txt")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_custom_system_file_matches_catalog(capsys):
    from lib.interface.cli import run

    assert run(["fixed-points", "--system-file", os.path.join(INPUT_DIR, "rossler_custom.txt"), "--json",
                "--quiet"]) == 0
    custom = json.loads(capsys.readouterr().out)
    assert run(["fixed-points", "--system", "rossler", "--json", "--quiet"]) == 0
    catalog = json.loads(capsys.readouterr().out)
    by_role = {p["role"]: p["location"]["value"] for p in catalog["fixed_points"]}
    assert len(custom["fixed_points"]) == 2
    for p in custom["fixed_points"]:
        np.testing.assert_allclose(p["location"]["value"], by_role[p["role"]], atol=1e-9)


def test_surface_command(tmp_path, capsys):
    from lib.interface.cli import run

    obj = str(tmp_path / "phi.obj")
    flags = str(tmp_path / "phi_flags.csv")
    assert run(["surface", "--system", "sprott_f", "--field", "phi", "--bounds", "-3,3,-3,3,-3,3", "--res", "12",
                "--out", obj, "--flags", flags, "--json", "--quiet"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["vertices"] > 0
    assert os.path.exists(obj) and os.path.exists(flags)
    assert run(["surface", "--system", "sprott_f", "--bounds", "-3,3,-3,3,-3,3", "--res", "4",
                "--out", obj, "--quiet"]) == 1
    assert run(["surface", "--system", "sprott_f", "--bounds", "-3,3,-3,3", "--out", obj, "--quiet"]) == 1


def test_quick_classify_is_reproducible(tmp_path, capsys):
    from lib.interface.cli import run
    from lib.interface.report import validate_report

    args = ["classify", "--system", "sprott_f", "--t-end", "200", "--transient", "50", "--mesh-res", "8",
            "--darboux-points", "10", "--validate", "--quiet"]
    first = str(tmp_path / "a.json")
    second = str(tmp_path / "b.json")
    assert run(args + ["--out", first]) == 0
    assert run(args + ["--out", second]) == 0
    with open(first, "rb") as f:
        a = f.read()
    with open(second, "rb") as f:
        b = f.read()
    assert a == b

    report = json.loads(a)
    assert validate_report(report) == []
    assert report["system"]["params_source"] == "verdict"
    assert report["verdict"] == "wrapping"
    assert report["phi_t_crossings"]["field"] == "phi_t_core"
    assert report["fixed_point_count"] == {"found": 2, "expected": 2}
    assert report["settings"]["ic"]["value"] == [0.1, 0.1, 0.1]
    assert "sprott_f" in capsys.readouterr().out


def test_invalid_report_is_detected():
    from lib.interface.report import validate_report

    problems = validate_report({"schema_version": 2})
    assert problems
    assert any("schema_version" in p for p in problems)


def test_jobs_setting_from_environment(monkeypatch, capsys):
    from lib.interface.cli import run

    monkeypatch.setenv("FLOWCURV_JOBS", "abc")
    assert run(["classify", "--all", "--quiet"]) == 1
    assert "FLOWCURV_JOBS" in capsys.readouterr().err
    assert run(["classify", "--all", "--jobs", "0", "--quiet"]) == 1
    assert run(["classify", "--all", "--system", "sprott_f", "--quiet"]) == 1


@pytest.mark.slow
def test_classify_all_in_parallel(tmp_path):
    from lib.interface.cli import run

    out = str(tmp_path / "all.json")
    code = run(["classify", "--all", "--jobs", "4", "--t-end", "1000", "--transient", "200", "--mesh-res", "16",
                "--darboux-points", "20", "--validate", "--quiet", "--out", out])
    assert code in (0, 2)
    with open(out, "r", encoding="utf-8") as f:
        data = json.load(f)
    names = [r["system"]["name"] for r in data["reports"]] + [e["name"] for e in data["failures"]]
    assert len(names) == 19
    assert data["reports"][0]["system"]["name"] == "rossler"


def test_export_system_reuses_trajectory_and_classification(tmp_path, monkeypatch):
    import lib.interface.report as report_module
    from lib.interface.report import RunSettings
    from src.pipeline import export_system

    def fail(*args, **kwargs):
        raise AssertionError("the report recomputed work the export already did")

    monkeypatch.setattr(report_module, "integrate", fail)
    monkeypatch.setattr(report_module, "classify_attractor", fail)
    monkeypatch.setattr(report_module, "find_fixed_points", fail)
    monkeypatch.setattr(report_module, "extract", fail)

    settings = RunSettings(t_end=120.0, transient=20.0, mesh_resolution=8, darboux_points=0)
    report = export_system("sprott_f", settings, str(tmp_path))
    assert report["system"]["name"] == "sprott_f"
    assert report["trajectory"]["samples"] == 10001
    assert report["diagnostics"]["mesh"]["field"] == "phi_t"
    out_dir = tmp_path / "sprott_f"
    for name in ("trajectory.csv", "curvature.csv", "section.csv", "pairs.csv", "report.json",
                 "phi.obj", "phi_c.obj", "phi_t.obj", "phi_t_core.obj"):
        assert (out_dir / name).exists(), name
