"""Command-line contract: exit codes, strict configs, schema version, determinism."""

import csv
import io
import json
import os
import subprocess
import sys

import pytest

from specenc import cli, quadrature
from specenc.core import PotentialSpec, dump_potential


@pytest.fixture
def well(tmp_path):
    path = tmp_path / "well.json"
    dump_potential(PotentialSpec.square_well(1, -2.0, 0.5), path)
    return path


@pytest.fixture
def gauss(tmp_path):
    path = tmp_path / "gauss.json"
    dump_potential(PotentialSpec.gaussian(3, 1.0, 0.5), path)
    return path


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_config_defaults(gauss):
    args = cli.parse_config(["norm", "--potential", str(gauss), "--kind", "KS", "--alpha", "2",
                             "--beta", "1"])
    assert args.kind == "KS" and args.alpha == 2.0 and args.beta == 1.0
    assert args.threads == 1 and args.level == 5 and args.seed == 0xC0FFEE


def test_unknown_flag_exits_2(capsys):
    code, _, err = run(["norm", "--foo"], capsys)
    assert code == 2 and "--foo" in err


def test_unknown_config_key_named(tmp_path, gauss, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": str(gauss), "kind": "KS", "alpha": 2,
                               "grid_size": 8}))
    code, _, err = run(["norm", "--config", cfg], capsys)
    assert code == 2 and "grid_size" in err


def test_config_threads_auto(tmp_path, gauss, monkeypatch):
    monkeypatch.delenv("SPECENC_THREADS", raising=False)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": str(gauss), "kind": "KS", "alpha": 2,
                               "threads": "auto"}))
    args = cli.parse_config(["norm", "--config", str(cfg)])
    assert args.threads == (os.cpu_count() or 1)


def test_env_overrides_threads(gauss, monkeypatch):
    monkeypatch.setenv("SPECENC_THREADS", "3")
    args = cli.parse_config(["norm", "--potential", str(gauss), "--alpha", "2", "--threads", "1"])
    assert args.threads == 3


def test_command_line_overrides_config(tmp_path, gauss):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": str(gauss), "kind": "KS", "alpha": 2, "level": 3}))
    args = cli.parse_config(["norm", "--config", str(cfg), "--level", "4"])
    assert args.level == 4 and args.alpha == 2.0


def test_nonpositive_tolerance_rejected(well, capsys):
    code, _, err = run(["bs-scan", "--potential", well, "--lambda-rect", "-1,-0.5,0,1",
                        "--tol", "0"], capsys)
    assert code == 2 and "tol" in err


def test_bad_config_value_exits_2(tmp_path, gauss, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": str(gauss), "kind": "Sobolev"}))
    code, _, err = run(["norm", "--config", cfg], capsys)
    assert code == 2 and "kind" in err


def test_missing_required_option(capsys):
    code, _, err = run(["norm", "--kind", "KS"], capsys)
    assert code == 2 and "--potential" in err


def test_missing_potential_file_exits_3(tmp_path, capsys):
    code, _, _ = run(["norm", "--potential", tmp_path / "nope.json", "--alpha", "2"], capsys)
    assert code == 3


def test_missing_config_file_exits_3(tmp_path, capsys):
    code, _, _ = run(["norm", "--config", tmp_path / "nope.json"], capsys)
    assert code == 3


def test_norm_json(gauss, capsys):
    code, out, _ = run(["norm", "--potential", gauss, "--kind", "KS", "--alpha", "2",
                        "--level", "3"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1 and doc["kind"] == "KS" and doc["value"] > 0


def test_kernel_csv_and_report(tmp_path, capsys):
    rep = tmp_path / "slope.json"
    code, out, _ = run(["kernel", "--zeta", "1.25", "--lambda", "0,1", "--d", "3",
                        "--regime", "small_r", "--report", rep], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["r", "abs_K", "arg_K", "fitted_quantity", "predicted_exponent"]
    assert len(rows) == 42
    doc = json.loads(rep.read_text())
    assert doc["schema_version"] == 1 and doc["passed"] and doc["regime"] == "small_r"


def test_bs_scan_csv(tmp_path, well):
    out = tmp_path / "scan.csv"
    code = cli.main(["bs-scan", "--potential", str(well), "--lambda-rect", "-1,-0.3,-0.2,0.2",
                     "--res", "4x3", "--grid", "100", "--out", str(out)])
    lines = out.read_text().splitlines()
    assert code == 0
    assert lines[0].startswith("# ") and "not a rigorous certificate" in lines[0]
    assert lines[1] == "re_lambda,im_lambda,op_norm,excluded,iters"
    assert len(lines) == 2 + 12


def test_enclosure_with_search(well, capsys):
    code, out, _ = run(["enclosure", "--potential", well, "--search", "-0.5"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1
    assert doc["search"]["found"] and doc["passed"]
    assert doc["C"] == 0.5


def test_enclosure_contradiction_exits_1(gauss, capsys):
    code, out, _ = run(["enclosure", "--potential", gauss, "--eigenvalues", "-1,0",
                        "--level", "3"], capsys)
    assert code == 1 and "contradiction" in json.loads(out)["flags"]


def test_enclosure_ledger(tmp_path, well, capsys):
    ledger = tmp_path / "empirical_C.json"
    code, out, _ = run(["enclosure", "--potential", well, "--search", "-0.5", "--ledger",
                        ledger], capsys)
    assert code == 0 and json.loads(out)["empirical_C"] > 0
    assert json.loads(ledger.read_text())[0]["d"] == 1


def test_verify_writes_report(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, _ = run(["verify", "branch", "--report", rep], capsys)
    doc = json.loads(rep.read_text())
    assert code == 0 and out.strip().endswith("passed")
    assert doc["schema_version"] == 1 and doc["failures"] == 0 and doc["suite"] == "branch"


def test_verify_kernel_carries_slope_reports(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _, _ = run(["verify", "kernel", "--report", rep], capsys)
    cases = json.loads(rep.read_text())["cases"]
    slopes = [c for c in cases if c["name"].startswith("slope")]
    assert code == 0 and len(slopes) == 12
    assert all({"fitted", "predicted", "regime"} <= set(c["detail"]) for c in slopes)


def test_verify_norms_fault_injection(tmp_path, capsys, monkeypatch):
    # a seeded bug in the cell self-integral must be caught
    real = quadrature.power_pair_integral

    def broken(alpha, sides):
        return 1.01 * real(alpha, sides)

    monkeypatch.setattr(quadrature, "power_pair_integral", broken)
    code, out, _ = run(["verify", "norms", "--report", tmp_path / "r.json"], capsys)
    assert code == 1 and "FAIL" in out


def test_verify_unknown_suite(capsys):
    code, _, _ = run(["verify", "physics"], capsys)
    assert code == 2


def test_serial_outputs_byte_identical(tmp_path, well):
    outs = []
    for i in range(2):
        scan = tmp_path / f"scan{i}.csv"
        rep = tmp_path / f"rep{i}.json"
        subprocess.run([sys.executable, "-m", "specenc.cli", "bs-scan", "--potential", str(well),
                        "--lambda-rect", "-1,-0.3,-0.2,0.2", "--res", "3x3", "--grid", "80",
                        "--out", str(scan)], check=True)
        subprocess.run([sys.executable, "-m", "specenc.cli", "verify", "bs", "--report",
                        str(rep), "--out", str(tmp_path / f"t{i}.txt")], check=True)
        outs.append((scan.read_bytes(), rep.read_bytes(), (tmp_path / f"t{i}.txt").read_bytes()))
    assert outs[0] == outs[1]


def test_oversized_dense_grid_is_usage_error(tmp_path, capsys):
    path = tmp_path / "g.json"
    dump_potential(PotentialSpec.gaussian(3, -3.0, 1.0), path)
    code = cli.main(["enclosure", "--potential", str(path), "--grid", "40", "--search=-0.5,0.1"])
    assert code == 2
    assert "dense limit" in capsys.readouterr().err
