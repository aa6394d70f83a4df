"""Command-line front end emitting deterministic JSON reports."""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .causal import DEFAULT_CAP, EnumerationCapExceeded, enumerate_compatible, graph_to_json, matching_bound
from .control import EQ1_TOL, PhaseVector, coherent_control_of_diagram, eq1_deviation, no_signalling_deviation, superpose
from .diagram import TypingError, check_typing, compile_order
from .formats import (
    BRANCH_SEP,
    InputError,
    diagram_from_json,
    load_json,
    matrix_from_obj,
    measurement_from_json,
    phases_from_json,
    scenario_from_json,
)
from .process import CHANNEL_TOL, RANK_TOL, trace_defect
from .tensor import matrix_to_json, max_abs, numerical_rank
from .verification import SUITES, TOLERANCES, DiagramSuites

SEED_ENV = "CAUSALORDER_SEED"
EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2


class Report:
    def __init__(self, command: str, inputs: list[Path]):
        self.command = command
        self.inputs = inputs
        self.results: dict = {}
        self.tolerances: dict[str, float] = {}
        self.violations: list[dict] = []
        self.input_error = False

    def violation(self, kind: str, message: str, **extra):
        self.violations.append({"kind": kind, "message": message, **extra})

    def digest(self) -> str:
        h = hashlib.sha256()
        for path in self.inputs:
            try:
                data = path.read_bytes()
            except OSError:
                data = b""
            h.update(len(data).to_bytes(8, "big"))
            h.update(data)
        return "sha256:" + h.hexdigest()

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "inputs_digest": self.digest(),
            "results": self.results,
            "tolerances_used": self.tolerances,
            "violations": self.violations,
        }

    def exit_code(self) -> int:
        if self.input_error:
            return EXIT_INPUT
        return EXIT_VERIFY if self.violations else EXIT_OK


def _branch_key(*labels: str) -> str:
    return BRANCH_SEP.join(labels)


def _load_diagram(path: Path):
    phi, delta = diagram_from_json(load_json(path))
    problems = check_typing(phi, delta)
    if problems:
        raise TypingError("; ".join(problems))
    return phi, delta


def _channel_summary(f) -> dict:
    return {"choi": matrix_to_json(f.choi), "rank": numerical_rank(f.choi)}


def cmd_enumerate(args, report: Report):
    obj = load_json(args.scenario)
    phi = scenario_from_json(obj)
    report.tolerances = {}
    report.results["bound"] = matching_bound(phi)
    orders = enumerate_compatible(phi, args.cap)
    report.results["count"] = len(orders)
    report.results["orders"] = [{"key": c.canonical_key, "graph": graph_to_json(c)} for c in orders]


def _select_orders(phi, args):
    orders = enumerate_compatible(phi, args.cap)
    if args.order is None:
        return orders
    for c in orders:
        if c.canonical_key == args.order:
            return [c]
    if args.order.isdigit() and int(args.order) < len(orders):
        return [orders[int(args.order)]]
    raise InputError(f"unknown causal order {args.order!r}; {len(orders)} compatible orders exist")


def cmd_compile(args, report: Report):
    phi, delta = _load_diagram(args.diagram)
    report.tolerances = {"normalisation": CHANNEL_TOL, "rank": RANK_TOL}
    local_ok = all(inst.is_normalised() for inst in delta.proc.values())
    out = []
    for c in _select_orders(phi, args):
        inst = compile_order(phi, delta, c).instrument
        normalised = inst.is_normalised()
        if local_ok and not normalised:
            report.violation("normalisation", f"order {c.canonical_key} is not trace-preserving",
                             defect=inst.max_trace_defect())
        out.append({
            "key": c.canonical_key,
            "normalised": normalised,
            "max_trace_defect": inst.max_trace_defect(),
            "dim_in": inst.dim_in.total,
            "dim_out": inst.dim_out.total,
            "branches": {_branch_key(i, o): _channel_summary(f) for (i, o), f in inst.branches.items()},
        })
    report.results["orders"] = out


def _load_phase(args, keys) -> PhaseVector:
    if args.phases in (None, "zeros"):
        return PhaseVector.zeros(keys)
    return phases_from_json(load_json(args.phases), keys)


def _load_state(path: Path, dim: int) -> np.ndarray:
    rho = matrix_from_obj(load_json(path), "state")
    if rho.shape == (dim, 1):
        rho = rho @ rho.conj().T
    if rho.shape != (dim, dim):
        raise InputError(f"state: expected a {dim}-dimensional ket or density matrix")
    if max_abs(rho - rho.conj().T) > 1e-9 or abs(np.trace(rho) - 1) > 1e-9:
        raise InputError("state: not a Hermitian unit-trace matrix")
    return rho


def cmd_superpose(args, report: Report):
    phi, delta = _load_diagram(args.diagram)
    keys = [c.canonical_key for c in enumerate_compatible(phi, args.cap)]
    if not keys:
        raise InputError("the scenario has no compatible causal order to superpose")
    phase = _load_phase(args, keys)
    measurement = "fourier" if args.measure == "fourier" else measurement_from_json(load_json(args.measure))
    try:
        s = superpose(phi, delta, phase, measurement, cap=args.cap)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report.tolerances = {"normalisation": CHANNEL_TOL, "unbiased": 1e-9}
    local_ok = all(inst.is_normalised() for inst in delta.proc.values())
    tp = {}
    for i in s.input_set:
        defect = float(max_abs(trace_defect(s.channel(i))))
        tp[i] = {"trace_preserving": defect <= CHANNEL_TOL, "max_trace_defect": defect}
        if local_ok and defect > CHANNEL_TOL:
            report.violation("normalisation", f"branch sum for input {i!r} is not trace-preserving",
                             defect=defect)
    report.results.update({
        "orders": keys,
        "phases": {k: phase.phases[k] for k in keys},
        "outcomes": list(s.measurement_outcomes.labels),
        "normalisation": tp,
        "branches": {_branch_key(i, o, k): _channel_summary(f) for (i, o, k), f in s.branches.items()},
    })
    if args.state is not None:
        rho = _load_state(args.state, s.branches[next(iter(s.branches))].dim_in.total)
        report.results["probabilities"] = {i: s.outcome_probabilities(rho, i) for i in s.input_set}
        report.results["joint_probabilities"] = {
            i: {_branch_key(o, k): p for (o, k), p in s.probabilities(rho, i).items()} for i in s.input_set}


def cmd_control(args, report: Report):
    phi, delta = _load_diagram(args.diagram)
    keys = [c.canonical_key for c in enumerate_compatible(phi, args.cap)]
    if not keys:
        raise InputError("the scenario has no compatible causal order to control")
    cp = coherent_control_of_diagram(phi, delta, _load_phase(args, keys), cap=args.cap)
    report.tolerances = {"eq1": EQ1_TOL, "nosig": CHANNEL_TOL}
    dev = eq1_deviation(cp)
    report.results.update({
        "orders": keys,
        "control_dim": cp.control_dim,
        "dim_in": cp.g.dim_in.total,
        "dim_out": cp.g.dim_out.total,
        "choi": matrix_to_json(cp.g.choi),
        "eq1_deviation": dev,
    })
    if dev > EQ1_TOL:
        report.violation("eq1", "controlled-process equations fail", deviation=dev)
    if all(inst.is_normalised() for inst in delta.proc.values()):
        nosig = no_signalling_deviation(cp)
        report.results["no_signalling_deviation"] = nosig
        if nosig > CHANNEL_TOL:
            report.violation("nosig", "control signals to the classical output", deviation=nosig)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def cmd_verify(args, report: Report):
    phi, delta = _load_diagram(args.diagram)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.trials < 1:
        raise InputError("--trials must be positive")
    suites = SUITES if args.suite == "all" else (args.suite,)
    runner = DiagramSuites(phi, delta, args.trials, seed, args.cap, args.corrupt_g)
    report.tolerances = {k: v for k, v in TOLERANCES.items() if k.split("_")[0] in suites}
    results = runner.run(suites)
    report.results.update({
        "seed": seed,
        "trials": args.trials,
        "orders": runner.keys,
        "suites": {name: r.to_json() for name, r in results.items()},
        "max_deviation": max(r.max_deviation for r in results.values()),
    })
    for name, r in results.items():
        if not r.passed:
            report.violation(name, f"suite {name} failed", deviation=r.max_deviation)


COMMANDS = {
    "enumerate": cmd_enumerate,
    "compile": cmd_compile,
    "superpose": cmd_superpose,
    "control": cmd_control,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="indent the JSON report")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration limit on candidate wirings")

    parser = argparse.ArgumentParser(prog="causalorder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="list the compatible definite causal orders")
    p.add_argument("scenario", type=Path)

    p = sub.add_parser("compile", parents=[common], help="compile a diagram along causal orders")
    p.add_argument("diagram", type=Path)
    p.add_argument("--order", help="canonical key or index of one order (default: all)")

    p = sub.add_parser("superpose", parents=[common], help="superposition of causal orders")
    p.add_argument("diagram", type=Path)
    p.add_argument("--phases", default="zeros", help="phase file or 'zeros'")
    p.add_argument("--measure", default="fourier", help="'fourier' or a unitary matrix file")
    p.add_argument("--state", type=Path, help="input state (ket or density matrix) for probabilities")

    p = sub.add_parser("control", parents=[common], help="coherent control of a diagram's causal orders")
    p.add_argument("diagram", type=Path)
    p.add_argument("--phases", default="zeros", help="phase file or 'zeros'")

    p = sub.add_parser("verify", parents=[common], help="run seeded verification suites")
    p.add_argument("diagram", type=Path)
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=None, help=f"default from ${SEED_ENV}, else 0")
    p.add_argument("--corrupt-g", action="store_true", help="relabel the control output to break the equations")
    return parser


def _input_paths(args) -> list[Path]:
    paths = [getattr(args, name, None) for name in ("scenario", "diagram", "state")]
    for name in ("phases", "measure"):
        value = getattr(args, name, None)
        if value not in (None, "zeros", "fourier"):
            paths.append(Path(value))
    return [p for p in paths if p is not None]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = Report(args.command, _input_paths(args))
    try:
        COMMANDS[args.command](args, report)
    except (ValueError, EnumerationCapExceeded) as exc:
        report.input_error = True
        report.violation(type(exc).__name__, str(exc))
        print(f"error: {exc}", file=sys.stderr)
    text = json.dumps(report.to_json(), sort_keys=True, indent=2 if args.pretty else None)
    print(text)
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
