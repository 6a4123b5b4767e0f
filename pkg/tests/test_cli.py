import csv
import json

import numpy as np
import pytest

from hydroelastic.cli import (
    EXIT_CONFIG,
    EXIT_INVARIANT,
    EXIT_OK,
    ConfigError,
    config_from_dict,
    main,
)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"geometry": {"depth": 1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"task": {"n": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({"model": {"name": "quadratic", "params": {"alpha": -1.0, "beta": 1.0}}})


def test_dispersion_single_cell(tmp_path):
    cfg = write_config(tmp_path, {"task": {"n_values": [1], "lambda_values": [0.0], "gamma_values": [0.0]}})
    assert main(["dispersion", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "dispersion.csv")
    assert len(rows) == 1 and float(rows[0]["D"]) == pytest.approx(-3.0)


def test_dispersion_empty_grid(tmp_path):
    cfg = write_config(tmp_path, {"task": {"n_values": []}})
    assert main(["dispersion", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "dispersion.csv").read_text() == "n,lambda,gamma,D\n"


def test_bifpoints_are_roots(tmp_path):
    cfg = write_config(tmp_path, {"task": {"n_max": 5, "gamma_values": [-1.0, 0.0, 2.0]}})
    assert main(["bifpoints", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "bifpoints.csv")
    assert len(rows) == 5 * 2 * 3
    assert max(abs(float(r["D"])) for r in rows) <= 1e-10
    zero = {r["sign"]: float(r["lambda_star"]) for r in rows if r["n"] == "1" and float(r["gamma"]) == 0.0}
    assert zero["+"] == -zero["-"]


def test_resonance_table(tmp_path):
    assert main(["resonance", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "resonance.csv")
    assert all(float(r["gamma_star_squared"]) > 0 for r in rows)
    first = next(r for r in rows if r["n"] == "1" and r["m"] == "2")
    assert float(first["gamma_star_squared"]) == pytest.approx(13.2675, abs=1e-4)


def test_trace_then_flow(tmp_path):
    out = tmp_path / "t"
    assert main(["trace", "--out", str(out), "--steps", "3", "--gamma", "0.5"]) == EXIT_OK
    rows = read_csv(out / "primary_n1p.csv")
    assert len(rows) == 4 and float(rows[0]["residual_norm"]) == 0.0
    meta = json.loads((out / "primary_n1p.json").read_text())
    assert meta["status"] == "ok" and meta["config"]["task"]["gamma"] == 0.5
    fout = tmp_path / "f"
    code = main(["flow", "--out", str(fout), "--gamma", "0.5", "--branch", str(out / "primary_n1p.csv"), "--point", "3"])
    assert code == EXIT_OK
    psi = np.loadtxt(fout / "flow_psi.csv", delimiter=",", skiprows=1)
    assert psi.shape[1] == 3


def test_trace_output_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["trace", "--out", str(tmp_path / name), "--steps", "2", "--n", "2"]) == EXIT_OK
    assert (tmp_path / "a" / "primary_n2p.csv").read_bytes() == (tmp_path / "b" / "primary_n2p.csv").read_bytes()
    assert (tmp_path / "a" / "primary_n2p.json").read_bytes() != b""


def test_wilton_not_found_exits_cleanly(tmp_path):
    code = main(["wilton", "--out", str(tmp_path), "--delta", "-0.3", "--steps", "2"])
    assert code == EXIT_OK
    lines = (tmp_path / "secondary_n1p.csv").read_text().splitlines()
    assert len(lines) == 1


def test_wilton_needs_delta(tmp_path):
    assert main(["wilton", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_trace_at_double_kernel_is_a_config_error(tmp_path):
    assert main(["trace", "--out", str(tmp_path), "--gamma", str(np.sqrt(13.267525854478865))]) == EXIT_CONFIG


def test_check_energy(tmp_path):
    assert main(["check-energy", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "energy_check.csv")
    assert all(r["passed"] == "true" for r in rows)


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["dispersion", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["trace", "--out", str(tmp_path), "--ds", "-1"]) == EXIT_CONFIG


def test_flow_with_missing_branch(tmp_path):
    assert main(["flow", "--out", str(tmp_path), "--branch", str(tmp_path / "nope.csv")]) == EXIT_CONFIG
