import json
import math

import numpy as np
import pytest

from hybridspin import cli, fock, wigner


def run_cli(tmp_path, *argv):
    out = tmp_path
    rc = cli.main([*argv, "--output-dir", str(out)])
    manifest = json.loads((out / "manifest.json").read_text()) \
        if (out / "manifest.json").exists() else None
    return rc, manifest


def test_fig3_deterministic_and_monotone_limit(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = ["fig3", "--kappa-over-gamma", "1", "--n-atoms", "500",
            "--thresholds", "0.0,0.2", "--t1-grid", "0.0,0.01,0.05,0.1,0.3"]
    rc1, man1 = run_cli(a, *args)
    rc2, _ = run_cli(b, *args)
    assert rc1 == 0 and rc2 == 0
    assert man1["status"] == "ok"
    csv1 = (a / "fig3.csv").read_bytes()
    csv2 = (b / "fig3.csv").read_bytes()
    assert csv1 == csv2  # bit-identical rerun
    rows = [line.split(",") for line in csv1.decode().strip().split("\n")[1:]]
    zero = [r for r in rows if float(r[0]) == 0.0]
    # threshold 0: T = t1 identically
    for r in zero:
        assert float(r[3]) == float(r[1])
        assert float(r[2]) == 0.0


def test_state_command_dumps_single_photon(tmp_path):
    rc, man = run_cli(tmp_path, "state", "--t1", "0", "--t2", "0",
                      "--gamma", "0", "--kappa", "1")
    assert rc == 0
    data = json.loads((tmp_path / "fock.json").read_text())
    dim = data["dim"]
    rho = (np.array(data["real"]).reshape(dim, dim)
           + 1j * np.array(data["imag"]).reshape(dim, dim))
    expect = np.zeros((dim, dim))
    expect[1, 1] = 1.0
    assert np.max(np.abs(rho - expect)) < 1e-5
    moments = json.loads((tmp_path / "moments.json").read_text())
    assert moments["pre_click"]["var_x"] == pytest.approx(0.5)
    w = wigner.from_binary(tmp_path / "wigner_post.wig") \
        if (tmp_path / "wigner_post.wig").exists() else None
    assert (tmp_path / "wigner_post.csv").exists() or w is not None


def test_manifest_written_on_failure_with_stage(tmp_path):
    rc, man = run_cli(tmp_path, "state", "--t1", "-3")
    assert rc != 0
    assert man["status"] == "error"
    assert man["failure_stage"] in ("config", "state")
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["message"]


def test_unknown_config_keys_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "fig3", "bogus_knob": 1}))
    rc = cli.main(["--config", str(cfg), "--output-dir", str(tmp_path)])
    assert rc == 2
    err = json.loads((tmp_path / "error.json").read_text())
    assert "bogus_knob" in err["message"]
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "error"


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "command": "fig3", "kappa": 1.0, "gamma": 1.0, "n_atoms": 500,
        "thresholds": [0.0], "t1_grid": [0.0, 0.1]}))
    rc, man = run_cli(tmp_path, "--config", str(cfg), "--thresholds", "0.2")
    assert rc == 0
    rows = (tmp_path / "fig3.csv").read_text().strip().split("\n")[1:]
    assert all(r.startswith("0.2,") for r in rows)


def test_fig6_dumps_phi_panels(tmp_path):
    rc, man = run_cli(tmp_path, "fig6", "--format", "csv",
                      "--phis", "0.125,-0.125")
    assert rc == 0
    assert len(man["outputs"]) == 2
    assert man["backend"] in ("compiled", "numpy")
    assert "tolerances" in man and "cfi_dtheta" in man["tolerances"]


def test_fig2_stage_snapshots(tmp_path):
    rc, man = run_cli(tmp_path, "fig2", "--t1", "0.004", "--t2", "0.001",
                      "--kappa", "1", "--gamma", "1", "--format", "json")
    assert rc == 0
    names = man["outputs"]
    for tag in ("initial", "phase1", "rotated", "phase2", "postclick"):
        assert any(tag in n for n in names)
    post = wigner.from_binary(tmp_path / "wigner_postclick.wig")
    assert float(np.min(post.values)) < 0.0  # nonGaussian negativity


def test_selftest_green(tmp_path):
    rc, man = run_cli(tmp_path, "selftest")
    assert rc == 0
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert report["passed"] is True
    assert all(c["ok"] for c in report["checks"])


def test_requires_known_command(tmp_path):
    rc = cli.main(["--output-dir", str(tmp_path)])
    assert rc == 2


def test_env_var_default_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTDIR, str(tmp_path))
    rc = cli.main(["fig3", "--thresholds", "0.0", "--t1-grid", "0.0,0.1"])
    assert rc == 0
    assert (tmp_path / "fig3.csv").exists()
    assert (tmp_path / "manifest.json").exists()
