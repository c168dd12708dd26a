import asyncio
import json
import math

import pandas as pd
import pytest

from cat_metrology.app import MainApp, EXIT_OK, EXIT_INVALID_ARGUMENTS
from cat_metrology.experiments import ResultRow
from cat_metrology.output import COLUMNS, manifest_path, render_csv, render_json

HEADER = "experiment,theta,n,phi,tau,sigma,gamma_ratio,mu,delta_phi,method,flag"


def run(*argv):
    return asyncio.run(MainApp().run(list(argv)))


def read_manifest(out):
    return json.loads(manifest_path(out).read_text())


def test_commands_are_registered():
    app = MainApp()
    asyncio.run(app.load_commands())
    assert sorted(app.commands) == ["dephasing", "detection-noise", "readout-scan", "scaling", "ultimate-bound",
                                    "verify"]


def test_ultimate_bound(tmp_path):
    out = tmp_path / "bound.csv"
    code = run("ultimate-bound", "--theta", "0", "--theta", "pi/2", "--n-grid", "40,100", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == HEADER
    frame = pd.read_csv(out)
    ghz = frame[(frame.experiment == "ultimate-bound") & (frame.theta == 0.0)]
    assert list(ghz.delta_phi) == pytest.approx([1 / 40, 1 / 100])
    assert set(frame.experiment) == {"ultimate-bound", "ultimate-bound-analytic", "ultimate-bound-fit"}
    manifest = read_manifest(out)
    assert manifest["status"] == "ok"
    assert manifest["command"] == "ultimate-bound"
    assert manifest["outputs"] == [str(out)]
    assert manifest["parameters"]["grid"]["n_grid"] == [40, 100]


def test_readout_scan_is_thread_independent(tmp_path):
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"scan-{threads}.csv"
        code = run("readout-scan", "--n", "8", "--tau-grid", "pi/8:pi/2:4", "--threads", threads, "--out", str(out))
        assert code == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    frame = pd.read_csv(tmp_path / "scan-1.csv")
    assert (frame.experiment == "readout-scan").sum() == 16
    optima = frame[frame.experiment == "readout-optimum"]
    assert list(optima.method) == ["error-propagation", "cfi-bound"] * 4
    assert "cfi_bound" in read_manifest(tmp_path / "scan-1.csv")["interpretation"]


def test_odd_particle_number_is_rejected(tmp_path):
    out = tmp_path / "scan.csv"
    assert run("readout-scan", "--n", "7", "--out", str(out)) == EXIT_INVALID_ARGUMENTS
    assert not out.exists()
    manifest = read_manifest(out)
    assert manifest["status"] == "invalid-arguments"
    assert manifest["error"]


def test_readout_scan_needs_cat_theta(tmp_path):
    out = tmp_path / "scan.csv"
    assert run("readout-scan", "--theta", "pi/2", "--n", "8", "--out", str(out)) == EXIT_INVALID_ARGUMENTS


@pytest.mark.parametrize("argv", [
    ("readout-scan", "--bogus"),
    ("no-such-command",),
    ("scaling", "--phi-center", "pi"),
])
def test_bad_arguments(argv):
    assert run(*argv) == EXIT_INVALID_ARGUMENTS


def test_version():
    assert run("--version") == EXIT_OK


def test_verify_quick(tmp_path):
    out = tmp_path / "verify"
    assert run("verify", "--quick", "--out", str(out)) == EXIT_OK
    manifest = read_manifest(out)
    assert manifest["status"] == "ok"
    assert all(check["passed"] for check in manifest["interpretation"]["checks"])


def test_dephasing_with_svg(tmp_path):
    out, svg = tmp_path / "dephasing.csv", tmp_path / "dephasing.svg"
    code = run("dephasing", "--theta", "pi/8", "--n", "8", "--gamma-ratio", "0,2", "--tau-grid", "pi/4:pi/2:3",
               "--threads", "2", "--out", str(out), "--svg", str(svg))
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert (frame.experiment == "dephasing").sum() == 6
    assert list(frame[frame.experiment == "dephasing-optimum"].gamma_ratio) == [0.0, 2.0]
    assert "<svg" in svg.read_text(encoding="utf-8")
    assert read_manifest(out)["outputs"] == [str(out), str(svg)]


def test_scaling_closed_form(tmp_path):
    out = tmp_path / "scaling.csv"
    argv = ("scaling", "--theta", "pi/8", "--phi-center", "half-pi", "--mu", "4", "--closed-form", "--out", str(out))
    assert run(*argv, "--n-grid", "40,100") == EXIT_OK
    frame = pd.read_csv(out)
    points = frame[frame.experiment == "scaling"]
    assert list(points.n) == [40, 100]
    assert read_manifest(out)["parameters"]["grid"]["closed_form"] is True
    assert read_manifest(out)["interpretation"]["closed_form"] is True
    slope = frame[(frame.experiment == "scaling-fit") & (frame.method == "fit-slope")].delta_phi.iloc[0]
    assert slope == pytest.approx(-1.0, abs=2e-2)
    assert run(*argv, "--n-grid", "40,42") == EXIT_INVALID_ARGUMENTS


def test_detection_noise_json(tmp_path):
    out = tmp_path / "noise.json"
    code = run("detection-noise", "--theta", "pi/8", "--n", "20", "--sigma-grid", "0,1", "--format", "json",
               "--out", str(out))
    assert code == EXIT_OK
    data = json.loads(out.read_text())
    assert data["columns"] == COLUMNS
    assert [row["experiment"] for row in data["rows"]] == ["detection-noise"] * 4 + ["detection-noise-normalized"] * 2
    assert [row["method"] for row in data["rows"]] == ["error-propagation"] * 2 + ["cfi-bound"] * 2 + ["normalized"] * 2
    assert "critical_sigma" in read_manifest(out)["interpretation"]


def test_config_file(tmp_path):
    config = tmp_path / "run.jsonc"
    config.write_text('{\n    // bound only\n    "ultimate-bound": {"theta": ["pi/4"], "n_grid": [40, 60]}\n}\n')
    out = tmp_path / "bound.csv"
    assert run("ultimate-bound", "--config", str(config), "--out", str(out)) == EXIT_OK
    frame = pd.read_csv(out)
    assert frame.theta.tolist() == pytest.approx([math.pi / 4] * 7)
    assert len(frame) == 7


def test_missing_config_file(tmp_path):
    out = tmp_path / "bound.csv"
    assert run("ultimate-bound", "--config", str(tmp_path / "none.jsonc"), "--out", str(out)) == EXIT_INVALID_ARGUMENTS


def test_render_non_finite_values():
    row = ResultRow("readout-scan", 0.0, 8, 0.0, 0.0, 0.0, 0.0, 1, math.inf, "error-propagation", "divergent-slope")
    assert render_csv([row]).splitlines()[1] == "readout-scan,0,8,0,0,0,0,1,inf,error-propagation,divergent-slope"
    assert json.loads(render_json([row]))["rows"][0]["delta_phi"] == "inf"
