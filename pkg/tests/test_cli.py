import filecmp
import json
import subprocess
import sys

import pytest

from deforcge import data
from deforcge.cli import cmd_dispatch
from deforcge.landshare import read_shares
from deforcge.sam import load_sam, save_sam


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cmd_dispatch(["run", "--out", str(out), "--no-timestamp"]) == 0
    return out


def _tree(path):
    return sorted(p.relative_to(path) for p in path.rglob("*") if p.is_file())


def test_validate_bundled(capsys):
    assert cmd_dispatch(["validate", "--scenario", str(data.path("eudr.yaml"))]) == 0
    out = capsys.readouterr().out
    assert out.startswith("balanced:")
    assert "coverage:" in out and "scenario eudr" in out


def test_validate_unbalanced(tmp_path, capsys):
    sam = load_sam(data.path("sam.csv"))
    flows = sam.flows.copy()
    flows[0, 1] += 10.0
    save_sam(sam.with_flows(flows), tmp_path / "bad.csv")
    assert cmd_dispatch(["validate", "--sam", str(tmp_path / "bad.csv")]) == 1
    assert capsys.readouterr().out.startswith("unbalanced:")


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["sam"], ["run", "--out", "x", "--window", "2025"]])
def test_usage_errors(argv):
    assert cmd_dispatch(argv) == 2


def test_missing_input_is_usage_error(tmp_path):
    assert cmd_dispatch(["validate", "--sam", str(tmp_path / "none.csv")]) == 2


def test_module_error_record(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("mode: Sideways\n")
    assert cmd_dispatch(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "ScenarioFileError"
    assert "message" in record


def test_run_outputs(run_dir):
    for name in ("deviations_macro.csv", "deviations_commodity.csv", "emissions_decomposition.csv",
                 "coverage.csv", "sign_checks.tsv", "run_manifest.json"):
        assert (run_dir / name).is_file(), name
    checks = (run_dir / "sign_checks.tsv").read_text().splitlines()
    assert len(checks) == 10
    assert all(line.startswith("PASS\t") for line in checks)
    manifest = json.loads((run_dir / "run_manifest.json").read_text())
    assert len(manifest["run_id"]) == 16 and manifest["window"] == [2025, 2030]


def test_report_round_trip(run_dir, tmp_path):
    assert cmd_dispatch(["report", "--from", str(run_dir), "--out", str(tmp_path), "--no-timestamp"]) == 0
    for name in ("deviations_macro.csv", "deviations_commodity.csv", "emissions_decomposition.csv", "coverage.csv",
                 "sign_checks.tsv"):
        assert filecmp.cmp(run_dir / name, tmp_path / name, shallow=False), name


def test_report_window_outside_horizon(run_dir, tmp_path):
    assert cmd_dispatch(["report", "--from", str(run_dir), "--out", str(tmp_path), "--window", "2010:2012"]) == 1


def test_run_is_deterministic(run_dir, tmp_path):
    assert cmd_dispatch(["run", "--out", str(tmp_path), "--no-timestamp"]) == 0
    files = [p for p in _tree(run_dir) if p.name != "run_manifest.json"]
    assert files == [p for p in _tree(tmp_path) if p.name != "run_manifest.json"]
    for rel in files:
        assert filecmp.cmp(run_dir / rel, tmp_path / rel, shallow=False), rel
    ids = [json.loads((d / "run_manifest.json").read_text())["run_id"] for d in (run_dir, tmp_path)]
    assert ids[0] == ids[1]


def test_shares_reproduces_bundled_table(tmp_path):
    out = tmp_path / "shares.csv"
    assert cmd_dispatch(["shares", "--out", str(out)]) == 0
    assert read_shares(out) == read_shares(data.path("shares.csv"))


def test_sam_split_reproduces_bundled_sam(tmp_path):
    out = tmp_path / "sam.csv"
    assert cmd_dispatch(["sam", "split", "--out", str(out)]) == 0
    split, bundled = load_sam(out), load_sam(data.path("sam.csv"))
    assert split.accounts == bundled.accounts
    assert (abs(split.flows - bundled.flows) <= 1e-9).all()


def test_calibrate_bundle(tmp_path):
    assert cmd_dispatch(["calibrate", "--out", str(tmp_path)]) == 0
    params = json.loads((tmp_path / "parameters.json").read_text())
    assert params["land_supply_elasticity"] == pytest.approx(0.0509083, abs=1e-6)
    assert params["base_residual"] <= 1e-9
    assert len(params["accounts"]) == len(load_sam(data.path("sam.csv")))
    assert set(params["tfp_path"]) == {str(y) for y in range(2019, 2031)}
    assert (tmp_path / "run_manifest.json").is_file()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "deforcge", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sensitivity" in proc.stdout
