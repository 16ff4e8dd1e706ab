from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from harvestreg.cli import main

SMALL = ["--grid-scale", "0.25", "--paths", "12", "--seed", "3"]


def _run(tmp_path, *argv):
    assert main([*argv, "--out-dir", str(tmp_path), *SMALL]) == 0
    return tmp_path


def test_solve_writes_surface_and_summary(tmp_path):
    out = _run(tmp_path, "solve")
    meta = json.loads((out / "solve.json").read_text())
    assert meta["shape"] == [1251, 500] and len(meta["fingerprint"]) == 16
    raw = (out / "surface.bin").read_bytes()
    assert struct.unpack("<qq", raw[:16]) == (1251, 500)
    assert (out / "surface.csv").read_text().startswith("t,y,w,d1,d2\n")
    assert meta["monotonicity"]["y_nondecreasing"]


def test_simulate_outputs(tmp_path):
    out = _run(tmp_path, "simulate")
    lines = (out / "outcomes.csv").read_text().splitlines()
    assert lines[0] == "seed,xi,x_T,principal_payoff,agent_exponent" and len(lines) == 13
    assert (out / "path_0.csv").read_text().startswith("t,x,alpha,z,y,dw\n")
    meta = json.loads((out / "simulate.json").read_text())
    assert meta["n_paths"] == 12 and meta["seed"] == 3


def test_simulate_rerun_byte_identical(tmp_path):
    a = _run(tmp_path / "a", "simulate")
    b = _run(tmp_path / "b", "simulate")
    for name in ("outcomes.csv", "path_0.csv", "simulate.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_figure_tables(tmp_path, n):
    out = _run(tmp_path, "figure", str(n))
    assert (out / f"fig{n}.gp").exists()
    meta = json.loads((out / f"fig{n}.json").read_text())
    header = (out / f"fig{n}.csv").read_text().splitlines()[0]
    assert header == ",".join(meta["columns"])
    if n == 4:
        assert -1.0 <= meta["corr_dy_dx_last_tenth"] <= 1.0


def test_sweep_with_values_and_jobs(tmp_path):
    out = _run(tmp_path, "sweep", "cost", "--values", "1", "3", "--jobs", "2")
    rows = (out / "sweep_cost.csv").read_text().splitlines()
    assert rows[0] == "c,t,mean_x,se_x"
    assert {r.split(",")[0] for r in rows[1:]} == {"1.0", "3.0"}
    meta = json.loads((out / "sweep_cost.json").read_text())
    assert meta["values"] == [1.0, 3.0] and "fingerprint" in meta["meta"]


def test_renewal_figure(tmp_path):
    out = _run(tmp_path, "figure", "7")
    meta = json.loads((out / "fig7.json").read_text())
    assert meta["values"] == [10.0, 0.0]
    assert meta["terminal"][1]["alpha_min"] >= 0.0


def test_exact_mode_solve(tmp_path):
    out = _run(tmp_path, "solve", "--mode", "exact")
    assert json.loads((out / "solve.json").read_text())["mode"] == "exact"


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("unknown_key = 1\n")
    assert main(["solve", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.toml"), "--out-dir", str(tmp_path)]) == 2


def test_bad_figure_number_rejected():
    with pytest.raises(SystemExit):
        main(["figure", "8"])


def test_grid_scale_changes_fingerprint_free_outputs(tmp_path):
    a = json.loads((_run(tmp_path / "a", "solve") / "solve.json").read_text())
    assert main(["solve", "--out-dir", str(tmp_path / "b"), "--grid-scale", "0.2"]) == 0
    b = json.loads((tmp_path / "b" / "solve.json").read_text())
    # the fingerprint covers the configuration; the scale is recorded next to it
    assert a["fingerprint"] == b["fingerprint"] and a["grid_scale"] != b["grid_scale"]
    assert not np.isclose(a["w0"], b["w0"], atol=0, rtol=1e-12)
