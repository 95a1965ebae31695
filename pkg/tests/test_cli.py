import csv
import json
import subprocess
import sys

import pytest

from feederopt.cli import EXIT_FILE, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_VERIFY, main
from feederopt.feeder_io import from_per_unit, serialize_feeder

from builders import chain, plain_pv, two_bus
from conftest import SMOKE, bundled, feeder_path

ARTIFACTS = ("solution.json", "voltages.csv", "pv_dispatch.csv", "iterations.csv")


def run(*argv):
    return main([str(a) for a in argv])


def write_feeder(path, f):
    path.write_text(serialize_feeder(from_per_unit(f)), encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def smoke_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    assert run("solve", "--feeder", SMOKE, "--out", out) == EXIT_OK
    return out


def test_solve_writes_artifacts(smoke_out):
    for name in ARTIFACTS:
        assert (smoke_out / name).stat().st_size > 0
    volts = read_csv(smoke_out / "voltages.csv")
    assert volts[0] == ["bus", "phase", "V_r", "V_im", "V_hat", "V_sweep"]
    assert len(volts) == 1 + len(bundled(SMOKE).bus_phases())
    iters = read_csv(smoke_out / "iterations.csv")
    assert iters[0][:2] == ["iteration", "max_magnitude_error"] and len(iters) == 5


def test_pv_csv_zones(smoke_out):
    rows = {(r[0], r[1]): r for r in read_csv(smoke_out / "pv_dispatch.csv")[1:]}
    assert rows[("PV4", "a")][5] == "3"
    # plain PV: no zone and no curve
    assert rows[("PV3", "c")][5:] == ["", ""]


def test_nodroop_leaves_zone_blank(tmp_path):
    assert run("solve", "--feeder", SMOKE, "--mode", "nodroop", "--out", tmp_path) == EXIT_OK
    assert all(r[5] == "" for r in read_csv(tmp_path / "pv_dispatch.csv")[1:])


def test_repeated_runs_are_byte_identical(smoke_out, tmp_path):
    assert run("solve", "--feeder", feeder_path(SMOKE), "--out", tmp_path) == EXIT_OK
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (smoke_out / name).read_bytes()


def test_missing_feeder(tmp_path, capsys):
    assert run("solve", "--feeder", tmp_path / "nope.json", "--out", tmp_path) == EXIT_FILE
    assert "file not found" in capsys.readouterr().err


def test_malformed_feeder(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert run("solve", "--feeder", bad, "--out", tmp_path) == EXIT_FILE
    assert "cannot read feeder" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--feeder", SMOKE, "--mode", "sideways"],
    ["solve", "--feeder", SMOKE, "--segments", "4"],
    ["solve", "--feeder", SMOKE, "--tol", "-1"],
    ["launch"],
])
def test_bad_arguments(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_FILE


def test_unknown_field_needs_lenient(tmp_path):
    doc = json.loads(feeder_path(SMOKE).read_text())
    doc["buses"][0]["colour"] = "red"
    path = tmp_path / "extra.json"
    path.write_text(json.dumps(doc))
    assert run("solve", "--feeder", path, "--out", tmp_path) == EXIT_FILE
    assert run("solve", "--feeder", path, "--out", tmp_path, "--lenient") == EXIT_OK


def test_infeasible_exit(tmp_path, capsys):
    path = write_feeder(tmp_path / "heavy.json", two_bus(z=0.05 + 0.1j, s_load=0.5 + 0.2j, slack=0.96))
    assert run("solve", "--feeder", path, "--out", tmp_path) == EXIT_INFEASIBLE
    assert "voltage 2.a" in capsys.readouterr().err


def test_not_converged_exit(tmp_path):
    assert run("solve", "--feeder", SMOKE, "--max-iters", "1", "--out", tmp_path) == EXIT_NOT_CONVERGED


def test_solve_verify_passes(tmp_path, capsys):
    assert run("solve", "--feeder", SMOKE, "--out", tmp_path, "--verify") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("PASS ") for line in lines) == 5


def test_verify_flags_perturbed_solution(smoke_out, tmp_path, capsys):
    doc = json.loads((smoke_out / "solution.json").read_text())
    for rec in doc["pv_q"]:
        if rec[:2] == ["PV4", "a"]:
            rec[2] += 0.05
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run("verify", "--feeder", SMOKE, path) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "FAIL nodal-residual" in out and "n4" in out


def test_verify_defaults_to_out_dir(smoke_out):
    assert run("verify", "--feeder", SMOKE, "--out", smoke_out) == EXIT_OK


def test_verify_missing_solution(tmp_path):
    assert run("verify", "--feeder", SMOKE, "--out", tmp_path) == EXIT_FILE


def test_nodroop_verify_fails_equilibrium(tmp_path, capsys):
    code = run("solve", "--feeder", "feeder_unbalanced_13_highload", "--mode", "nodroop",
               "--out", tmp_path, "--verify")
    assert code == EXIT_VERIFY
    assert "FAIL equilibrium-match" in capsys.readouterr().out


def test_export_markers(tmp_path):
    assert run("export", "--feeder", SMOKE, "--out", tmp_path) == EXIT_OK
    text = (tmp_path / "model.mps").read_text()
    assert "'INTORG'" in text and "'INTEND'" in text
    assert run("export", "--feeder", SMOKE, "--mode", "nodroop", "--out", tmp_path) == EXIT_OK
    assert "MARKER" not in (tmp_path / "model.mps").read_text()


def test_compare(tmp_path, capsys):
    assert run("compare", "--feeder", SMOKE, "--out", tmp_path) == EXIT_OK
    rows = read_csv(tmp_path / "compare.csv")
    assert rows[0] == ["record", "pv", "phase", "droop", "nodroop"]
    dev = {(r[1], r[2]): (float(r[3]), float(r[4])) for r in rows if r[0] == "deviation"}
    assert set(dev) == {("PV4", "a"), ("PV4", "b")}
    assert max(d for d, _ in dev.values()) <= 1e-4
    assert max(n for _, n in dev.values()) > 1e-3
    (obj,) = [r for r in rows if r[0] == "objective"]
    assert float(obj[3]) >= float(obj[4])
    assert "max curve deviation" in capsys.readouterr().out


def test_compare_without_droop_units(tmp_path):
    path = write_feeder(tmp_path / "plain.json", chain(4, pvs=[plain_pv("P", "4", p=0.03)]))
    assert run("compare", "--feeder", path, "--out", tmp_path) == EXIT_OK
    (obj,) = [r for r in read_csv(tmp_path / "compare.csv") if r[0] == "objective"]
    assert obj[3] == obj[4]


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "feederopt.cli", "export", "--feeder", SMOKE,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "108 columns, 248 rows, 10 binaries" in proc.stdout
