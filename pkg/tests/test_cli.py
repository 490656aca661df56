import json
import shutil
import subprocess

import pytest
import yaml

from wavehum.cli import git_blob_sha1, main

from conftest import SCENARIOS

REF1 = SCENARIOS / "reference_1d.yaml"


def _variant(tmp_path, name="s.yaml", **edits):
    tree = yaml.safe_load(REF1.read_text())
    for path, value in edits.items():
        node = tree
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        if value is KeyError:
            del node[keys[-1]]
        else:
            node[keys[-1]] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(tree, sort_keys=False))
    return path


def test_time_budget_prints_formula_values(tmp_path, capsys):
    assert main(["time-budget", "--config", str(REF1), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "T0: 3.0" in out and "T_min: 3.0" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["T0"] == 3.0 and summary["feasible"] is True


def test_hum_reference_run(tmp_path):
    assert main(["hum", "--config", str(REF1), "--out", str(tmp_path), "--quiet"]) == 0
    summary = json.loads((tmp_path / "hum_summary.json").read_text())
    assert summary["converged"] and summary["e_ratio"] <= 1e-4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_sha1"] == git_blob_sha1(REF1.read_bytes())
    assert {e["file"] for e in manifest["outputs"]} == {"control.csv", "cg_history.csv", "hum_summary.json"}
    assert manifest["seed"] == 7 and manifest["exit_status"] == 0


@pytest.mark.skipif(shutil.which("git") is None, reason="git not installed")
def test_config_hash_matches_git():
    out = subprocess.run(["git", "hash-object", str(REF1)], capture_output=True, text=True, check=True)
    assert git_blob_sha1(REF1.read_bytes()) == out.stdout.strip()


def test_missing_inner_exits_2(tmp_path, capsys):
    cfg = _variant(tmp_path, domain__inner=KeyError)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "domain.inner" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_geometry_error_exits_2(tmp_path, capsys):
    cfg = _variant(tmp_path, domain__inner=[0.2525, 0.75])
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "MisalignedInterface" in capsys.readouterr().err


def test_infeasible_exits_3(tmp_path):
    grad = [[[2.0]]]
    cfg = _variant(tmp_path, material={"family": "affine", "c0": [[1.0]], "grad": grad, "h": 1.0})
    assert main(["hum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_not_converged_exits_4(tmp_path):
    cfg = _variant(tmp_path, run__max_iter=2)
    out = tmp_path / "o"
    assert main(["hum", "--config", str(cfg), "--out", str(out)]) == 4
    assert json.loads((out / "manifest.json").read_text())["exit_status"] == 4


def test_cfl_violation_exits_5(tmp_path):
    cfg = _variant(tmp_path, time__dt=0.5)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 5


def test_outputs_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(REF1), "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in ("energy.csv", "energy_compatible.csv", "trajectory.bin", "summary.json", "domain_summary.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    ma.pop("timestamp"), mb.pop("timestamp")
    assert ma == mb


def test_seed_and_threads_override(tmp_path):
    out = tmp_path / "o"
    assert main(["observability", "--config", str(_variant(tmp_path, run__ensemble_size=4)), "--out", str(out),
                 "--seed", "123", "--threads", "2", "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 123 and manifest["threads"] == 2


@pytest.mark.parametrize("command,artifact", [
    ("multiplier-check", "multiplier_breakdown.csv"),
    ("oracle", "oracle.csv"),
])
def test_other_commands(tmp_path, command, artifact):
    cfg = _variant(tmp_path, domain__resolution=40, run__levels=3)
    assert main([command, "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert (tmp_path / "o" / artifact).exists()


def test_console_script_installed():
    exe = shutil.which("wavehum")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "time-budget" in out.stdout
