import json
import subprocess
import sys

import numpy as np
import pytest

from causalorder.cli import main
from causalorder.control import PAULI_X, PAULI_Z, build_switch, switch_scenario
from causalorder.formats import (
    InputError,
    ParseError,
    diagram_from_json,
    diagram_to_json,
    instrument_from_json,
    instrument_to_json,
    measurement_from_json,
    parse_json,
    phases_from_json,
    scenario_from_json,
    scenario_to_json,
)
from causalorder.process import ClassicalSet, QuantumInstrument, channel_distance, dbl
from causalorder.randomized import random_instrument
from causalorder.tensor import matrix_from_json, matrix_to_json, max_abs


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, json.loads(out.out), out.err


def probs(report):
    return report["results"]["probabilities"]["0,0"]


# --- enumerate ------------------------------------------------------------------

@pytest.mark.parametrize("name,count", [("switch2", 2), ("switch3", 6), ("unbalanced", 0)])
def test_enumerate_counts(capsys, scenarios_dir, name, count):
    code, report, _ = run(capsys, "enumerate", scenarios_dir / f"{name}.json")
    assert code == 0
    assert report["command"] == "enumerate"
    assert report["results"]["count"] == count
    assert len(report["results"]["orders"]) == count
    assert report["inputs_digest"].startswith("sha256:")
    assert report["violations"] == []


def test_enumerate_cap_exceeded(capsys, scenarios_dir):
    code, report, err = run(capsys, "enumerate", scenarios_dir / "switch3.json", "--cap", "5")
    assert code == 2
    assert report["violations"][0]["kind"] == "EnumerationCapExceeded"
    assert "error:" in err


# --- compile --------------------------------------------------------------------

def test_compile_chain(capsys, scenarios_dir):
    code, report, _ = run(capsys, "compile", scenarios_dir / "chain.json")
    assert code == 0
    (order,) = report["results"]["orders"]
    assert order["normalised"]
    assert order["branches"]["0,0,0|0,0,0"]["rank"] == 1


def test_compile_selects_order(capsys, scenarios_dir):
    code, full, _ = run(capsys, "compile", scenarios_dir / "switch_xz.json")
    key = full["results"]["orders"][1]["key"]
    code, by_key, _ = run(capsys, "compile", scenarios_dir / "switch_xz.json", "--order", key)
    code, by_index, _ = run(capsys, "compile", scenarios_dir / "switch_xz.json", "--order", "1")
    assert by_key["results"] == by_index["results"]
    assert by_key["results"]["orders"] == [full["results"]["orders"][1]]


def test_compile_unknown_order(capsys, scenarios_dir):
    code, report, _ = run(capsys, "compile", scenarios_dir / "switch_xz.json", "--order", "nope")
    assert code == 2 and "unknown causal order" in report["violations"][0]["message"]


def test_bad_typing_names_event_and_wire(capsys, scenarios_dir):
    code, report, err = run(capsys, "compile", scenarios_dir / "bad_typing.json")
    assert code == 2
    message = report["violations"][0]["message"]
    assert "event A" in message and "Z=3" in message
    assert "event A" in err


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "events": [\n    oops\n  ]\n}\n')
    code, report, _ = run(capsys, "enumerate", bad)
    assert code == 2
    assert f"{bad}:3:5:" in report["violations"][0]["message"]


def test_missing_file(capsys, tmp_path):
    code, report, _ = run(capsys, "enumerate", tmp_path / "absent.json")
    assert code == 2 and "cannot read" in report["violations"][0]["message"]


# --- superpose ------------------------------------------------------------------

def test_superpose_xz_switch(capsys, scenarios_dir):
    code, report, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json",
                          "--state", scenarios_dir / "ket0.json")
    assert code == 0
    assert report["results"]["outcomes"] == ["+", "-"]
    p = probs(report)
    assert p["+"] <= 1e-9 and p["-"] == pytest.approx(1, abs=1e-9)


def test_superpose_phase_flips_outcome(capsys, scenarios_dir):
    code, report, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json",
                          "--phases", scenarios_dir / "phases_pi.json", "--state", scenarios_dir / "ket0.json")
    assert code == 0
    p = probs(report)
    assert p["-"] <= 1e-9 and p["+"] == pytest.approx(1, abs=1e-9)


def test_superpose_identity_switch(capsys, scenarios_dir):
    code, report, _ = run(capsys, "superpose", scenarios_dir / "switch_id.json",
                          "--state", scenarios_dir / "ket0.json")
    assert code == 0 and probs(report)["-"] <= 1e-9


def test_superpose_instruments_probabilities(capsys, scenarios_dir):
    code, report, _ = run(capsys, "superpose", scenarios_dir / "switch_instruments.json",
                          "--state", scenarios_dir / "ket0.json")
    assert code == 0
    for i, table in report["results"]["joint_probabilities"].items():
        assert sum(table.values()) == pytest.approx(1, abs=1e-9)
        assert report["results"]["normalisation"][i]["trace_preserving"]


def test_superpose_custom_measurement(capsys, scenarios_dir, tmp_path):
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    (tmp_path / "h.json").write_text(json.dumps(matrix_to_json(h)))
    (tmp_path / "eye.json").write_text(json.dumps(matrix_to_json(np.eye(2))))
    code, a, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json", "--measure", tmp_path / "h.json")
    code, b, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json")
    assert code == 0 and a["results"]["branches"] == b["results"]["branches"]
    code, bad, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json", "--measure", tmp_path / "eye.json")
    assert code == 2


def test_superpose_rejects_bad_state(capsys, scenarios_dir, tmp_path):
    (tmp_path / "s.json").write_text(json.dumps(matrix_to_json(np.eye(2))))
    code, _, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json", "--state", tmp_path / "s.json")
    assert code == 2


def test_unknown_phase_key(capsys, scenarios_dir, tmp_path):
    (tmp_path / "p.json").write_text(json.dumps({"phases": {"bogus": 1.0}}))
    code, _, _ = run(capsys, "superpose", scenarios_dir / "switch_xz.json", "--phases", tmp_path / "p.json")
    assert code == 2


# --- control and verify ---------------------------------------------------------

def test_control_report(capsys, scenarios_dir):
    code, report, _ = run(capsys, "control", scenarios_dir / "switch_xz.json")
    assert code == 0
    r = report["results"]
    assert r["control_dim"] == 2 and r["dim_in"] == 4
    assert r["eq1_deviation"] <= 1e-8 and r["no_signalling_deviation"] <= 1e-9


def test_verify_all_passes(capsys, scenarios_dir):
    code, report, _ = run(capsys, "verify", scenarios_dir / "switch_xz.json",
                          "--suite", "all", "--trials", "50", "--seed", "42")
    assert code == 0
    r = report["results"]
    assert set(r["suites"]) == {"eq1", "nosig", "prop1", "prop2", "prop3"}
    assert all(s["passed"] for s in r["suites"].values())
    assert r["max_deviation"] <= 1e-8
    assert r["suites"]["prop2"]["witness_distance"] > 0.05
    assert report["tolerances_used"]["eq1"] == 1e-8


@pytest.mark.parametrize("name", ["three_event", "switch_instruments", "chain"])
def test_verify_other_diagrams(capsys, scenarios_dir, name):
    code, report, _ = run(capsys, "verify", scenarios_dir / f"{name}.json", "--trials", "5")
    assert code == 0, report["violations"]


def test_verify_corrupted_control(capsys, scenarios_dir):
    code, report, _ = run(capsys, "verify", scenarios_dir / "switch_xz.json", "--suite", "eq1", "--corrupt-g")
    assert code == 1
    (v,) = report["violations"]
    assert v["kind"] == "eq1" and v["deviation"] >= 1e-2


def test_seed_from_environment(capsys, scenarios_dir, monkeypatch):
    monkeypatch.setenv("CAUSALORDER_SEED", "7")
    _, env, _ = run(capsys, "verify", scenarios_dir / "switch_xz.json", "--suite", "prop3", "--trials", "3")
    _, explicit, _ = run(capsys, "verify", scenarios_dir / "switch_xz.json", "--suite", "prop3", "--trials", "3",
                         "--seed", "7")
    assert env["results"]["seed"] == 7
    assert env == explicit
    monkeypatch.setenv("CAUSALORDER_SEED", "x")
    code, _, _ = run(capsys, "verify", scenarios_dir / "switch_xz.json", "--suite", "eq1", "--trials", "1")
    assert code == 2


def test_reports_are_byte_identical(scenarios_dir):
    cmd = [sys.executable, "-m", "causalorder", "verify", str(scenarios_dir / "three_event.json"),
           "--trials", "5", "--seed", "3", "--pretty"]
    outs = {subprocess.run(cmd, capture_output=True, check=True).stdout for _ in range(2)}
    assert len(outs) == 1
    assert outs.pop().startswith(b"{\n  ")


def test_inputs_digest_tracks_content(capsys, scenarios_dir, tmp_path):
    copy = tmp_path / "s.json"
    copy.write_bytes((scenarios_dir / "switch2.json").read_bytes())
    _, a, _ = run(capsys, "enumerate", copy)
    copy.write_bytes(copy.read_bytes() + b"\n")
    _, b, _ = run(capsys, "enumerate", copy)
    assert a["inputs_digest"] != b["inputs_digest"] and a["results"] == b["results"]


# --- formats --------------------------------------------------------------------

def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_json('[1,\n 2,,]', "x.json")
    assert (info.value.line, info.value.column) == (2, 4)
    assert str(info.value).startswith("x.json:2:4:")


def test_instrument_round_trip(rng):
    inst = random_instrument(2, 3, 2, 2, rng)
    back = instrument_from_json(json.loads(json.dumps(instrument_to_json(inst))))
    assert back.input_set == inst.input_set and back.output_set == inst.output_set
    for key, f in inst.branches.items():
        assert max_abs(back.branches[key].choi - f.choi) <= 1e-12


def test_instrument_json_errors(rng):
    obj = instrument_to_json(QuantumInstrument.from_channel(dbl(PAULI_X), normalised=True))
    bad = json.loads(json.dumps(obj))
    bad["branches"]["0|7"] = bad["branches"].pop("0|0")
    with pytest.raises(ValueError):
        instrument_from_json(bad)
    bad = json.loads(json.dumps(obj))
    bad["dim_in"] = 3
    with pytest.raises(ValueError):
        instrument_from_json(bad)
    with pytest.raises(InputError):
        instrument_from_json({"dim_in": 2})


def test_scenario_round_trip():
    phi = switch_scenario(3, {"B": ClassicalSet.of_size(2)})
    back = scenario_from_json(json.loads(json.dumps(scenario_to_json(phi))))
    assert scenario_to_json(back) == scenario_to_json(phi)


def test_classical_labels_reject_separators():
    obj = scenario_to_json(switch_scenario(2))
    obj["events"][0]["classical_in"] = ["a|b"]
    with pytest.raises(InputError):
        scenario_from_json(obj)


def test_diagram_round_trip(rng):
    phi, delta = build_switch(2, 2, [random_instrument(2, 2, 1, 2, rng),
                                     QuantumInstrument.from_channel(dbl(PAULI_Z), normalised=True)])
    phi2, delta2 = diagram_from_json(json.loads(json.dumps(diagram_to_json(phi, delta))))
    assert delta2.sys == delta.sys
    for w, inst in delta.proc.items():
        for key, f in inst.branches.items():
            assert channel_distance(delta2.proc[w].branches[key], f) <= 1e-12
    obj = diagram_to_json(phi, delta)
    obj["proc"]["Q"] = obj["proc"]["A"]
    with pytest.raises(InputError):
        diagram_from_json(obj)


def test_phases_and_measurement_json():
    p = phases_from_json({"phases": {"k1": 1.5}}, ["k0", "k1"])
    assert p.phases == {"k0": 0.0, "k1": 1.5}
    with pytest.raises(InputError):
        phases_from_json({"phases": {"k9": 1.0}}, ["k0"])
    assert measurement_from_json("fourier") == "fourier"
    m = measurement_from_json(matrix_to_json(np.eye(2)))
    assert np.array_equal(m, np.eye(2))
    assert np.array_equal(matrix_from_json(matrix_to_json(m)), m)
