"""JSON encodings of instruments, scenarios, diagrams and phase specs."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .causal import IndefiniteCausalScenario
from .control import PhaseVector
from .diagram import DiagramAssignment
from .process import CPMap, ClassicalSet, QuantumInstrument
from .tensor import matrix_from_json, matrix_to_json

BRANCH_SEP = "|"


class InputError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(InputError):
    def __init__(self, source: str, message: str, line: int, column: int, offset: int):
        super().__init__(f"{source}:{line}:{column}: {message} (offset {offset})")
        self.source = source
        self.line = line
        self.column = column
        self.offset = offset


def parse_json(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, exc.msg, exc.lineno, exc.colno, exc.pos) from None


def load_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_json(text, str(path))


def _require(obj: Any, key: str, kind, where: str):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    if key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise InputError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _labels(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise InputError(f"{where}: expected a list of strings")
    return tuple(value)


def _classical(value, where: str) -> ClassicalSet:
    labels = _labels(value, where)
    for label in labels:
        if BRANCH_SEP in label or "," in label:
            raise InputError(f"{where}: classical label {label!r} may not contain '|' or ','")
    try:
        return ClassicalSet(labels)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def _dims(value, where: str):
    if isinstance(value, int) and not isinstance(value, bool):
        dims = [value]
    elif isinstance(value, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in value):
        dims = value
    else:
        raise InputError(f"{where}: expected a positive integer or a list of them")
    if any(d < 1 for d in dims):
        raise InputError(f"{where}: dimensions must be positive")
    return tuple(dims)


def matrix_from_obj(obj, where: str) -> np.ndarray:
    try:
        return matrix_from_json(obj)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# Instruments
# ---------------------------------------------------------------------------

def instrument_to_json(inst: QuantumInstrument) -> dict:
    return {
        "inputs": list(inst.input_set.labels),
        "outputs": list(inst.output_set.labels),
        "dim_in": inst.dim_in.total,
        "dim_out": inst.dim_out.total,
        "branches": {f"{i}{BRANCH_SEP}{o}": [matrix_to_json(k) for k in f.kraus]
                     for (i, o), f in inst.branches.items() if f.kraus},
    }


def instrument_from_json(obj, where: str = "instrument") -> QuantumInstrument:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    ins = _classical(obj.get("inputs", ["0"]), f"{where}.inputs")
    outs = _classical(obj.get("outputs", ["0"]), f"{where}.outputs")
    din = _dims(_require(obj, "dim_in", (int, list), where), f"{where}.dim_in")
    dout = _dims(_require(obj, "dim_out", (int, list), where), f"{where}.dim_out")
    raw = _require(obj, "branches", dict, where)
    branches = {}
    for key, mats in raw.items():
        bw = f"{where}.branches[{key!r}]"
        if key.count(BRANCH_SEP) != 1:
            raise InputError(f"{bw}: branch keys have the form 'input|output'")
        i, o = key.split(BRANCH_SEP)
        if not isinstance(mats, list):
            raise InputError(f"{bw}: expected a list of Kraus matrices")
        kraus = [matrix_from_obj(m, f"{bw}[{n}]") for n, m in enumerate(mats)]
        for n, k in enumerate(kraus):
            if k.shape != (int(np.prod(dout)), int(np.prod(din))):
                raise InputError(f"{bw}[{n}]: Kraus operator is {k.shape[0]}x{k.shape[1]}, "
                                 f"expected {int(np.prod(dout))}x{int(np.prod(din))}")
        branches[(i, o)] = CPMap(din, dout, tuple(kraus))
    try:
        return QuantumInstrument(ins, outs, din, dout, branches)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# Scenarios and diagrams
# ---------------------------------------------------------------------------

def scenario_to_json(phi: IndefiniteCausalScenario) -> dict:
    return {
        "events": [{
            "id": w,
            "inputs": list(phi.in_labels[w]),
            "outputs": list(phi.out_labels[w]),
            "classical_in": list(phi.classical_inputs[w].labels),
            "classical_out": list(phi.classical_outputs[w].labels),
        } for w in phi.events],
        "boundary_in": list(phi.boundary_in),
        "boundary_out": list(phi.boundary_out),
    }


def scenario_from_json(obj) -> IndefiniteCausalScenario:
    if not isinstance(obj, dict):
        raise InputError("scenario: expected an object")
    events = _require(obj, "events", list, "scenario")
    ids, ins, outs, ci, co = [], {}, {}, {}, {}
    for n, ev in enumerate(events):
        where = f"events[{n}]"
        w = _require(ev, "id", str, where)
        ids.append(w)
        ins[w] = _labels(ev.get("inputs", []), f"{where}.inputs")
        outs[w] = _labels(ev.get("outputs", []), f"{where}.outputs")
        ci[w] = _classical(ev.get("classical_in", ["0"]), f"{where}.classical_in")
        co[w] = _classical(ev.get("classical_out", ["0"]), f"{where}.classical_out")
    b_in = _labels(obj.get("boundary_in", []), "boundary_in")
    b_out = _labels(obj.get("boundary_out", []), "boundary_out")
    labels = None
    if "labels" in obj:
        labels = _labels(obj["labels"], "labels")
    try:
        return IndefiniteCausalScenario(tuple(ids), ins, outs, b_in, b_out, labels, ci, co)
    except ValueError as exc:
        raise InputError(f"scenario: {exc}") from None


def diagram_to_json(phi: IndefiniteCausalScenario, delta: DiagramAssignment) -> dict:
    out = scenario_to_json(phi)
    out["sys"] = {l: int(d) for l, d in delta.sys.items()}
    out["proc"] = {w: instrument_to_json(inst) for w, inst in delta.proc.items()}
    return out


def diagram_from_json(obj) -> tuple[IndefiniteCausalScenario, DiagramAssignment]:
    phi = scenario_from_json(obj)
    sys_obj = _require(obj, "sys", dict, "diagram")
    sys = {}
    for label, d in sys_obj.items():
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise InputError(f"sys[{label!r}]: expected a positive integer dimension")
        sys[label] = d
    proc_obj = _require(obj, "proc", dict, "diagram")
    proc = {w: instrument_from_json(p, f"proc[{w!r}]") for w, p in proc_obj.items()}
    unknown = set(proc) - set(phi.events)
    if unknown:
        raise InputError(f"proc: processes given for unknown events {sorted(unknown)}")
    return phi, DiagramAssignment(sys, proc)


# ---------------------------------------------------------------------------
# Phases and measurements
# ---------------------------------------------------------------------------

def phases_from_json(obj, keys) -> PhaseVector:
    """Phase vector over ``keys``; keys missing from the file get phase 0."""
    raw = _require(obj, "phases", dict, "phases")
    unknown = sorted(set(raw) - set(keys))
    if unknown:
        raise InputError(f"phases: unknown causal-order keys {unknown}")
    values = {}
    for k in keys:
        v = raw.get(k, 0.0)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise InputError(f"phases[{k!r}]: expected a finite number")
        values[k] = float(v)
    return PhaseVector(values)


def measurement_from_json(obj):
    if obj == "fourier":
        return "fourier"
    if isinstance(obj, dict) and "measurement" in obj:
        obj = obj["measurement"]
        if obj == "fourier":
            return "fourier"
    return matrix_from_obj(obj, "measurement")
