import json
import subprocess
import sys

import pytest

from latindex.cli import main, parse_config_text, resolve_config
from latindex.errors import ConfigError


def run_cli(tmp_path, *sets, name="out"):
    out = tmp_path / name
    args = ["-", "--out", str(out)]
    for s in sets:
        args += ["--set", s]
    rc = main(args)
    summary = json.loads((out / "summary.json").read_text()) if (out / "summary.json").exists() else None
    return rc, summary, out


def test_parse_and_defaults():
    raw = parse_config_text("pipeline = flow  # comment\n\nN = 8, 12\nM=0.5\n")
    cfg = resolve_config(raw)
    assert cfg["pipeline"] == "flow" and cfg["N"] == [8, 12] and cfg["M"] == 0.5
    assert cfg["K"] == 8 and cfg["seed"] == 0
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")
    with pytest.raises(ConfigError):
        resolve_config({"bogus": "1"})
    with pytest.raises(ConfigError):
        resolve_config({"pipeline": "nope"})
    with pytest.raises(ConfigError):
        resolve_config({"N": "eight"})


def test_index_pipeline(tmp_path):
    rc, s, out = run_cli(tmp_path, "pipeline=index", "kind=u1_flux", "charge=1", "N=12")
    assert rc == 0
    assert {k: s["result"][k] for k in ("index", "eta_minus", "method")} == \
        {"index": 1, "eta_minus": -2, "method": "wilson"}
    assert s["result"]["runs"][0]["plaquette_charge"] == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1 and "summary.json" in manifest["artifacts"]


def test_summary_deterministic(tmp_path):
    sets = ("pipeline=overlap", "kind=u1_flux", "charge=-2", "N=8")
    _, _, a = run_cli(tmp_path, *sets, name="a")
    _, _, b = run_cli(tmp_path, *sets, name="b")
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_flow_pipeline_outputs(tmp_path):
    rc, s, out = run_cli(tmp_path, "pipeline=flow", "kind=u1_flux_plus_smooth", "charge=1",
                         "perturbation=0:0,1:0.5;1:1,0:0.3:0.2", "N=8", "points=17")
    assert rc == 0 and s["result"]["runs"][0]["sf"] == 1
    assert (out / "flow_N8.csv").read_text().startswith("m,index,lambda")


def test_spectrum_and_verify(tmp_path):
    rc, s, out = run_cli(tmp_path, "pipeline=spectrum", "N=8", "m=1")
    assert rc == 0 and s["result"]["runs"][0]["min_abs_eig"] == pytest.approx(1.0)
    rc, s, out = run_cli(tmp_path, "pipeline=verify", "kind=u1_flux", "charges=1,-1", "N=12", "K=6",
                         name="verify")
    assert rc == 0 and all(r["pass"] for r in s["result"]["rows"])
    assert (out / "verify.csv").exists()


def test_failed_check_exit_code(tmp_path):
    rc, s, _ = run_cli(tmp_path, "pipeline=overlap", "kind=u1_flux", "charge=1", "N=8", "gw_tol=1e-30")
    assert rc == 1 and s["failed"] == ["gw_residual_N8"]
    rc, s, _ = run_cli(tmp_path, "pipeline=index", "N=8", "M=0", name="zero")
    assert rc == 1 and s["error"].startswith("NearZeroMode")


def test_config_error_exit_code(tmp_path):
    assert main(["-", "--out", str(tmp_path / "x"), "--set", "frobnicate=1"]) == 2
    assert main([str(tmp_path / "missing.cfg")]) == 2


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"pipeline = index\nkind = u1_flux\ncharge = -1\nN = 8\nout = {tmp_path / 'o'}\n")
    proc = subprocess.run([sys.executable, "-m", "latindex", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["result"]["index"] == -1
