import io
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from pendulum_qubits.cli import main

BELL = "qubits 2\nh 0\ncnot 0 1\nmeasure 0\nmeasure 1\n"


def schema(name):
    text = resources.files("pendulum_qubits").joinpath("schemas", f"{name}.schema.json").read_text()
    s = json.loads(text)
    jsonschema.Draft202012Validator.check_schema(s)
    return s


def validate(obj, name):
    jsonschema.validate(obj, schema(name), cls=jsonschema.Draft202012Validator)


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in {
        "bell": BELL,
        "cnot": "qubits 2\ncnot 0 1\n",
        "bad": "qubits 2\nh 0\ncnot 0 7\n",
        "hcirc": "qubits 1\nh 0\n",
    }.items():
        p = tmp_path / f"{name}.qc"
        p.write_text(text)
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


class TestRun:
    def test_json_lines_validate(self, files):
        code, out, _ = call("run", files["bell"], "--shots", "20", "--seed", "7")
        assert code == 0
        rows = [json.loads(line) for line in out.splitlines()]
        assert [r["shot"] for r in rows] == list(range(20))
        for r in rows:
            validate(r, "run_shot")
            assert r["outcomes"][0] == r["outcomes"][1]

    def test_deterministic_across_processes(self, files):
        argv = [sys.executable, "-m", "pendulum_qubits", "run", files["bell"], "--shots", "1000", "--seed", "7"]
        a = subprocess.run(argv, capture_output=True, check=True).stdout
        b = subprocess.run(argv, capture_output=True, check=True).stdout
        assert a == b and len(a.splitlines()) == 1000

    def test_threads_keep_output(self, files):
        one = call("run", files["bell"], "--shots", "200", "--seed", "3")[1]
        four = call("run", files["bell"], "--shots", "200", "--seed", "3", "--threads", "4")[1]
        assert one == four

    def test_newton_backend(self, files):
        code, out, _ = call("run", files["bell"], "--shots", "3", "--backend", "newton", "--ratio", "0.04")
        assert code == 0
        for line in out.splitlines():
            validate(json.loads(line), "run_shot")

    def test_parse_error_exit_2(self, files):
        code, out, err = call("run", files["bad"])
        assert code == 2 and out == ""
        assert ":3:" in err and "qubit 7 out of range" in err

    def test_missing_file(self, files):
        assert call("run", str(files["dir"] / "nope.qc"))[0] == 1

    def test_usage_errors(self, files):
        assert call()[0] == 1
        assert call("run")[0] == 1
        assert call("run", files["bell"], "--backend", "quantum")[0] == 1
        assert call("run", files["bell"], "--shots", "0")[0] == 1

    def test_help(self, capsys):
        assert main(["run", "--help"]) == 0
        assert "--backend" in capsys.readouterr().out


class TestCompileAndNewton:
    def test_cnot_schedule(self, files):
        dest = files["dir"] / "sched.json"
        assert call("compile", files["cnot"], "--ratio", "0.01", "-o", str(dest))[0] == 0
        sched = json.loads(dest.read_text())
        validate(sched, "schedule")
        (seg,) = sched["items"]
        dw = 0.01 * 2 * math.pi
        assert seg["springs"] == [[2, 3, pytest.approx(dw)]]
        assert seg["duration"] == pytest.approx(math.pi / dw)

    def test_newton_summary_and_trace(self, files):
        dest = files["dir"] / "h.json"
        trace = files["dir"] / "h.csv"
        call("compile", files["hcirc"], "--ratio", "0.04", "-o", str(dest))
        code, out, _ = call("newton", "--schedule", str(dest), "--ratio", "0.02", "--steps-per-period", "64", "--trace", str(trace))
        assert code == 0
        summary = json.loads(out)
        validate(summary, "newton_summary")
        assert summary["ratio"] == pytest.approx(0.02)
        assert summary["final_fidelity"] > 0.999
        header = trace.read_text().splitlines()[0]
        assert header == "time,energy_1,energy_2,total_energy"

    def test_newton_with_state(self, files):
        dest = files["dir"] / "c.json"
        state = files["dir"] / "s.json"
        state.write_text(json.dumps({"n_qubits": 2, "amplitudes": [[0, 0], [0, 0], [1, 0], [0, 0]]}))
        call("compile", files["cnot"], "-o", str(dest))
        code, out, _ = call("newton", "--schedule", str(dest), "--state", str(state), "--trace", str(files["dir"] / "t.csv"))
        assert code == 0
        amps = json.loads(out)["final_state"]["amplitudes"]
        assert abs(complex(*amps[3])) > 0.999

    def test_guard_exit_3(self, files):
        dest = files["dir"] / "n.json"
        call("compile", files["cnot"], "--ratio", "0.9", "-o", str(dest))
        code, _, err = call("newton", "--schedule", str(dest), "--steps-per-period", "16", "--trace", str(files["dir"] / "x.csv"))
        assert code == 3 and "step too coarse" in err

    def test_rejects_measured_schedule(self, files):
        dest = files["dir"] / "m.json"
        call("compile", files["bell"], "-o", str(dest))
        assert call("newton", "--schedule", str(dest))[0] == 1

    def test_bad_schedule_file(self, files):
        assert call("newton", "--schedule", files["bell"])[0] == 1


class TestExperimentCommands:
    def test_chsh_exact(self):
        code, out, _ = call("chsh", "--exact")
        r = json.loads(out)
        validate(r, "chsh")
        assert abs(r["S"]) == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    def test_chsh_sampled_with_angles(self):
        code, out, _ = call("chsh", "--shots", "500", "--seed", "2", "--angles", "0,pi/2,pi/4,-pi/4")
        assert code == 0
        validate(json.loads(out), "chsh")

    def test_chsh_bad_angles(self):
        assert call("chsh", "--angles", "0,1")[0] == 1

    def test_anticorr(self):
        code, out, _ = call("anticorr", "--axis", "pi/2,pi/2", "--shots", "400", "--seed", "1")
        r = json.loads(out)
        validate(r, "anticorr")
        assert r["p_opposite"] == 1.0

    def test_fig3(self):
        code, out, _ = call("fig3")
        assert code == 0
        validate(json.loads(out), "fig3")

    @pytest.mark.parametrize("flip, corrected", [("none", True), ("1", True), ("1,2", False)])
    def test_bitflip(self, flip, corrected):
        code, out, _ = call("bitflip", "--flip", flip)
        r = json.loads(out)
        validate(r, "bitflip")
        assert r["corrected"] is corrected

    def test_bitflip_bad(self):
        assert call("bitflip", "--flip", "x")[0] == 1
        assert call("bitflip", "--flip", "5")[0] == 1

    def test_sweep(self):
        code, out, _ = call("sweep", "--ratios", "0.04,0.02", "--states", "2", "--qubits", "1")
        assert code == 0
        r = json.loads(out)
        validate(r, "sweep")
        assert {g["gate"] for g in r["gates"]} == {"rz 0 pi/2", "rx 0 pi/2", "not 0"}

    def test_sweep_bad_ratio(self):
        assert call("sweep", "--ratios", "1.5")[0] == 1


def test_state_schema():
    validate({"n_qubits": 1, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]}, "envelope_state")
    with pytest.raises(jsonschema.ValidationError):
        validate({"n_qubits": 1, "amplitudes": [[1.0], [0.0, 0.0]]}, "envelope_state")
