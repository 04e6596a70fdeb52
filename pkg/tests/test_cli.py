import json
import subprocess
import sys

import pytest

from ftstab import fixtures
from ftstab.cli import load_config, main


@pytest.fixture
def config_dir(tmp_path):
    fixtures.write_fixture_configs(tmp_path)
    return tmp_path


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- config loading -----------------------------------------------------------


def test_load_config_roundtrip(config_dir):
    system, phi, extras = load_config(config_dir / "cascade_pair.json")
    assert system.n == 2 and system.m == 1
    assert system.boundary.constant_array()[0, 1] == 1.0
    assert len(phi.profiles) == 2
    assert extras["spatial_points"] == 513


def test_malformed_matrix_is_exit_2(tmp_path, capsys):
    cfg = fixtures.cascade_pair()
    cfg["P"] = [[0.0, 1.0, 5.0], [0.0, 0.0, 1.0]]  # 2x3
    path = _write(tmp_path, "bad.json", cfg)
    code, _, err = _run(capsys, "analyze", path)
    assert code == 2
    assert "error" in err


def test_missing_version_is_exit_2(tmp_path, capsys):
    cfg = fixtures.cascade_pair()
    del cfg["version"]
    code, _, _ = _run(capsys, "analyze", _write(tmp_path, "bad.json", cfg))
    assert code == 2


def test_unparseable_expression_is_exit_2(tmp_path, capsys):
    cfg = fixtures.cascade_pair()
    cfg["a"] = ["1 +", "-2"]
    code, _, _ = _run(capsys, "analyze", _write(tmp_path, "bad.json", cfg))
    assert code == 2


def test_nonexistent_file_is_exit_2(capsys):
    code, _, _ = _run(capsys, "analyze", "/nonexistent/config.json")
    assert code == 2


def test_sign_violation_is_exit_2(tmp_path, capsys):
    cfg = fixtures.cascade_pair()
    cfg["a"] = ["x - 0.5", "-2"]  # changes sign inside the interval
    code, _, err = _run(capsys, "analyze", _write(tmp_path, "bad.json", cfg))
    assert code == 2
    assert "a_1" in err


# --- analyze -------------------------------------------------------------------


def test_analyze_mirror_pair(config_dir, capsys):
    code, out, err = _run(capsys, "analyze", str(config_dir / "mirror_pair.json"))
    assert code == 1
    report = json.loads(out)
    assert report["robust_fts"] is False
    assert report["witness"]["cycle"] == [1]
    assert report["k0"] is None


def test_analyze_cascade(config_dir, capsys):
    code, out, _ = _run(capsys, "analyze", str(config_dir / "cascade_pair.json"))
    assert code == 0
    report = json.loads(out)
    assert report["robust_fts"] is True
    assert report["k0"] == 2


def test_analyze_output_is_byte_deterministic(config_dir, capsys):
    _, out1, _ = _run(capsys, "analyze", str(config_dir / "mirror_pair.json"))
    _, out2, _ = _run(capsys, "analyze", str(config_dir / "mirror_pair.json"))
    assert out1 == out2


# --- spectrum ------------------------------------------------------------------


def test_spectrum_unperturbed_mirror(config_dir, capsys):
    code, out, _ = _run(capsys, "spectrum", str(config_dir / "mirror_pair.json"))
    assert code == 0
    report = json.loads(out)
    assert report["empty"] is True and report["fts"] is True


def test_spectrum_speed_perturbed(config_dir, capsys):
    code, out, _ = _run(capsys, "spectrum", str(config_dir / "mirror_pair_fast.json"))
    assert code == 1
    report = json.loads(out)
    assert report["empty"] is False
    assert len(report["roots"]) >= 3
    assert all(r["residual"] <= 1e-10 for r in report["roots"])


def test_spectrum_window_flag(config_dir, capsys):
    code, out, _ = _run(
        capsys, "spectrum", str(config_dir / "mirror_pair_fast.json"), "--window=-3:2:0:10"
    )
    assert code == 1
    report = json.loads(out)
    for r in report["roots"]:
        assert -3 <= r["re"] <= 2 and 0 <= r["im"] <= 10


def test_spectrum_rejects_nonautonomous(config_dir, capsys):
    code, _, err = _run(capsys, "spectrum", str(config_dir / "modulated_gain_pair.json"))
    assert code == 2
    assert "autonomous" in err


# --- time ----------------------------------------------------------------------


def test_time_cascade(config_dir, capsys):
    code, out, _ = _run(capsys, "time", str(config_dir / "cascade_pair.json"))
    assert code == 0
    report = json.loads(out)
    assert report["k0"] == 2
    assert report["T_star"] == pytest.approx(1.5, abs=1e-12)
    assert report["T_star_exact"] is True


def test_time_refuses_mirror(config_dir, capsys):
    code, _, err = _run(capsys, "time", str(config_dir / "mirror_pair.json"))
    assert code == 2
    assert "not robust FTS" in err


# --- simulate ------------------------------------------------------------------


def test_simulate_cascade_writes_artifacts(config_dir, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, _, err = _run(
        capsys,
        "simulate",
        str(config_dir / "cascade_pair.json"),
        "--times",
        "0:2:9",
        "--out",
        str(out_dir),
        "--snapshot",
        "0.5",
    )
    assert code == 0  # decayed below tolerance by the last sample
    csv_text = (out_dir / "decay.csv").read_text()
    assert csv_text.splitlines()[0] == "t,l2,sup"
    data = json.loads((out_dir / "decay.json").read_text())
    assert len(data["rows"]) == 9
    assert data["rows"][-1]["l2"] <= 1e-10
    snap = (out_dir / "snapshot_t0.5.csv").read_text().splitlines()
    assert snap[0] == "x,u1,u2"
    assert len(snap) == 514


def test_simulate_zero_data(config_dir, tmp_path, capsys):
    cfg = fixtures.cascade_pair()
    cfg["phi"] = ["0", "0"]
    path = _write(tmp_path, "zero.json", cfg)
    code, _, _ = _run(capsys, "simulate", path, "--times", "0:1:3", "--out", str(tmp_path / "o"))
    assert code == 0
    data = json.loads((tmp_path / "o" / "decay.json").read_text())
    assert all(row["l2"] == 0.0 for row in data["rows"])


def test_simulate_non_fts_keeps_mass(config_dir, tmp_path, capsys):
    code, _, _ = _run(
        capsys,
        "simulate",
        str(config_dir / "mirror_pair_fast.json"),
        "--mode",
        "march",
        "--times",
        "0:10:5",
        "--out",
        str(tmp_path / "o"),
    )
    assert code == 1  # persistent mass at the end
    data = json.loads((tmp_path / "o" / "decay.json").read_text())
    assert data["rows"][-1]["l2"] > 1e-3


# --- verify --------------------------------------------------------------------


def test_verify_cascade_at_t_star(config_dir, capsys):
    code, out, _ = _run(
        capsys, "verify", str(config_dir / "cascade_pair.json"), "--T", "1.5", "--tol", "1e-10"
    )
    assert code == 0
    report = json.loads(out)
    assert report["status"] == "pass"
    assert report["exactness_confirmed"] is True


def test_verify_cascade_too_early(config_dir, capsys):
    code, out, _ = _run(
        capsys, "verify", str(config_dir / "cascade_pair.json"), "--T", "1.0", "--tol", "1e-10"
    )
    assert code == 1
    assert json.loads(out)["status"] == "fail"


def test_verify_non_nilpotent_is_error(config_dir, capsys):
    # verification needs a vanishing claim; the mirror pair never clears tol
    code, _, _ = _run(
        capsys, "verify", str(config_dir / "mirror_pair_fast.json"), "--T", "5.0"
    )
    assert code == 1


# --- process-level smoke --------------------------------------------------------


def test_console_entrypoint_subprocess(config_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "ftstab", "analyze", str(config_dir / "cascade_pair.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["robust_fts"] is True
