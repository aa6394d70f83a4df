"""Seeded verification suites over a diagram, as run by the ``verify`` command."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .causal import DEFAULT_CAP, IndefiniteCausalScenario
from .control import (
    EQ1_TOL,
    PhaseVector,
    ProcessFamily,
    classical_control,
    coherent_control_cp,
    coherent_control_of_diagram,
    coherent_control_pure,
    diagram_control,
    eq1_deviation,
    extract_phase,
    no_signalling_deviation,
    nogo_witness,
    purification_dependence,
    shift_control_outputs,
)
from .diagram import DiagramAssignment, purify_diagram
from .process import CHANNEL_TOL, channel_distance
from .randomized import random_env_unitaries, random_pure_map, random_unitary

SUITES = ("eq1", "nosig", "prop1", "prop2", "prop3")

TOLERANCES = {
    "eq1": EQ1_TOL,
    "nosig": CHANNEL_TOL,
    "prop1": 1e-8,
    "prop2_witness_min": 0.05,
    "prop2_equal": 1e-9,
    "prop3": 1e-8,
}


@dataclass
class SuiteResult:
    name: str
    passed: bool
    max_deviation: float
    trials: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_deviation": self.max_deviation,
                "trials": self.trials, **self.details}


def _random_phase(keys, rng: np.random.Generator) -> PhaseVector:
    return PhaseVector.from_list(keys, rng.uniform(0, 2 * math.pi, len(keys)))


def _phase_error(a: float, b: float) -> float:
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


class DiagramSuites:
    """Runs the suites against one diagram; every suite draws from its own seeded stream."""

    def __init__(self, phi: IndefiniteCausalScenario, delta: DiagramAssignment,
                 trials: int, seed: int, cap: int = DEFAULT_CAP, corrupt_g: bool = False):
        self.phi, self.delta = phi, delta
        self.trials, self.seed, self.corrupt_g = trials, seed, corrupt_g
        self.cap = cap
        self.purified = purify_diagram(phi, delta)
        self.control = diagram_control(phi, delta, purified=self.purified, cap=cap)
        self.keys = self.control.keys
        self.family = ProcessFamily.of([inst.to_cpmap() for inst in self.control.compiled], self.keys)

    def _rng(self, suite: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, SUITES.index(suite)])

    def _diagram_control(self, phase=None, purified=None):
        cp = coherent_control_of_diagram(self.phi, self.delta, phase, purified or self.purified, self.cap)
        return shift_control_outputs(cp) if self.corrupt_g else cp

    def eq1(self) -> SuiteResult:
        rng = self._rng("eq1")
        cases = [classical_control(self.family), coherent_control_cp(self.family)]
        if self.corrupt_g:
            cases = [shift_control_outputs(c) for c in cases]
        worst = max(eq1_deviation(c) for c in cases)
        for _ in range(self.trials):
            phase = _random_phase(self.keys, rng)
            worst = max(worst, eq1_deviation(self._diagram_control(phase)))
        return SuiteResult("eq1", worst <= TOLERANCES["eq1"], worst, self.trials)

    def nosig(self) -> SuiteResult:
        if not all(inst.is_normalised() for inst in self.delta.proc.values()):
            return SuiteResult("nosig", True, 0.0, 0, {"skipped": "local instruments are not normalised"})
        rng = self._rng("nosig")
        worst = no_signalling_deviation(classical_control(self.family))
        for _ in range(self.trials):
            phase = _random_phase(self.keys, rng)
            worst = max(worst, no_signalling_deviation(self._diagram_control(phase)))
        return SuiteResult("nosig", worst <= TOLERANCES["nosig"], worst, self.trials)

    def prop1(self) -> SuiteResult:
        """Phase round trip on random pure families shaped like the diagram's orders."""
        rng = self._rng("prop1")
        d_a, d_b = self.control.dim_in.total, self.control.dim_out.total
        worst_phase = worst_choi = 0.0
        for _ in range(self.trials):
            fam = ProcessFamily.of([random_pure_map(d_a, d_b, rng) for _ in self.keys], self.keys)
            phase = _random_phase(self.keys, rng)
            cp = coherent_control_pure(fam, phase)
            got = extract_phase(cp.g, fam)
            ref = self.keys[0]
            for k in self.keys:
                want = phase.phases[k] - phase.phases[ref]
                worst_phase = max(worst_phase, _phase_error(got.phases[k], want))
            worst_choi = max(worst_choi, channel_distance(coherent_control_pure(fam, got).g, cp.g))
        worst = max(worst_phase, worst_choi)
        return SuiteResult("prop1", worst <= TOLERANCES["prop1"], worst, self.trials,
                           {"max_phase_error": worst_phase, "max_reassembly_distance": worst_choi})

    def prop2(self) -> SuiteResult:
        """The no-go witness must separate; equal environment unitaries must not."""
        rng = self._rng("prop2")
        witness = nogo_witness().distance
        worst = 0.0
        for _ in range(self.trials):
            u = random_unitary(2, rng)
            _, _, d = purification_dependence(nogo_witness().family, [u, u])
            worst = max(worst, d)
        passed = witness > TOLERANCES["prop2_witness_min"] and worst <= TOLERANCES["prop2_equal"]
        return SuiteResult("prop2", passed, worst, self.trials, {"witness_distance": witness})

    def prop3(self) -> SuiteResult:
        rng = self._rng("prop3")
        phase = _random_phase(self.keys, rng)
        base = self._diagram_control(phase).g
        worst = 0.0
        for _ in range(self.trials):
            changed = self.purified.with_env_unitaries(random_env_unitaries(self.purified, rng))
            worst = max(worst, channel_distance(base, self._diagram_control(phase, changed).g))
        return SuiteResult("prop3", worst <= TOLERANCES["prop3"], worst, self.trials)

    def run(self, suites) -> dict[str, SuiteResult]:
        return {name: getattr(self, name)() for name in suites}
