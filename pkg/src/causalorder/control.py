"""Controlled processes, coherent control and superpositions of causal orders."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .causal import (
    DEFAULT_CAP,
    CompatibleScenario,
    IndefiniteCausalScenario,
    enumerate_compatible,
)
from .diagram import (
    DiagramAssignment,
    PurifiedDiagram,
    TypingError,
    check_typing,
    compile_order,
    contract_purified,
    purify_diagram,
)
from .process import (
    CPMap,
    ClassicalSet,
    Purification,
    QuantumInstrument,
    SPOPair,
    canonical_spo,
    channel_distance,
    classical_identity,
    compose,
    cp_sum,
    dbl,
    discard,
    is_pure,
    purify,
    tensor,
)
from .tensor import SystemDims, as_matrix, basis_vector, max_abs

EQ1_TOL = 1e-8
TWO_PI = 2 * math.pi


@dataclass(frozen=True, eq=False)
class ProcessFamily:
    index: ClassicalSet
    members: tuple[CPMap, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a process family must be non-empty")
        if len(members) != self.index.size:
            raise ValueError(f"{len(members)} members for an index set of size {self.index.size}")
        first = members[0]
        for f in members[1:]:
            if f.dim_in.total != first.dim_in.total or f.dim_out.total != first.dim_out.total:
                raise ValueError("family members must share input and output systems")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, maps: Sequence[CPMap], labels: Sequence[str] | None = None) -> "ProcessFamily":
        index = ClassicalSet.of_size(len(maps)) if labels is None else ClassicalSet(tuple(labels))
        return cls(index, tuple(maps))

    @property
    def dim_in(self) -> SystemDims:
        return self.members[0].dim_in

    @property
    def dim_out(self) -> SystemDims:
        return self.members[0].dim_out

    def __getitem__(self, label: str) -> CPMap:
        return self.members[self.index.index(label)]


@dataclass(frozen=True)
class PhaseVector:
    phases: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "phases", {k: float(v) % TWO_PI for k, v in self.phases.items()})

    @classmethod
    def zeros(cls, labels) -> "PhaseVector":
        return cls({l: 0.0 for l in labels})

    @classmethod
    def from_list(cls, labels, values) -> "PhaseVector":
        return cls(dict(zip(labels, values)))

    def factors(self, labels) -> np.ndarray:
        labels = list(labels)
        if set(labels) != set(self.phases):
            raise ValueError("phase vector is not defined on exactly the branch index set")
        return np.exp(1j * np.array([self.phases[l] for l in labels]))


@dataclass(frozen=True, eq=False)
class ControlledProcess:
    """A map ``g: H (x) A -> H (x) B`` with an SPO pair, controlling ``family``."""

    control_dim: int
    family: ProcessFamily
    g: CPMap
    spo: SPOPair

    def __post_init__(self):
        h = self.control_dim
        if self.spo.quantum_dim != h or self.spo.classical != self.family.index:
            raise ValueError("SPO pair does not match the control system and family index")
        if self.g.dim_in.total != h * self.family.dim_in.total:
            raise ValueError(f"g input {self.g.dim_in} does not match control {h} (x) {self.family.dim_in}")
        if self.g.dim_out.total != h * self.family.dim_out.total:
            raise ValueError(f"g output {self.g.dim_out} does not match control {h} (x) {self.family.dim_out}")


def _resolve_phase(phase: PhaseVector | None, labels) -> np.ndarray:
    if phase is None:
        return np.ones(len(labels), dtype=complex)
    return phase.factors(labels)


def _controlled_dims(h: int, family: ProcessFamily) -> tuple[SystemDims, SystemDims]:
    return SystemDims(h) + family.dim_in, SystemDims(h) + family.dim_out


def classical_control(family: ProcessFamily) -> ControlledProcess:
    """``G = sum_x dbl(|x><x|) (x) F_x``, with the canonical SPO pair."""
    n = family.index.size
    kraus = []
    for x, f in enumerate(family.members):
        proj = basis_vector(x, n) @ basis_vector(x, n).T
        kraus.extend(np.kron(proj, k) for k in f.kraus)
    din, dout = _controlled_dims(n, family)
    return ControlledProcess(n, family, CPMap(din, dout, tuple(kraus)), canonical_spo(family.index))


def assemble_pure(operators: Sequence[np.ndarray], factors: Sequence[complex]) -> np.ndarray:
    """``sum_x f_x |x><x| (x) L_x``."""
    n = len(operators)
    return sum(f * np.kron(basis_vector(x, n) @ basis_vector(x, n).T, as_matrix(op))
               for x, (op, f) in enumerate(zip(operators, factors)))


def _single_operator(f: CPMap) -> np.ndarray:
    kraus = f.canonical_kraus()
    if not kraus:
        return np.zeros((f.dim_out.total, f.dim_in.total), dtype=complex)
    return kraus[0]


def coherent_control_pure(family: ProcessFamily, phase: PhaseVector | None = None) -> ControlledProcess:
    """``G = dbl(sum_x e^{i a_x} |x><x| (x) L_x)`` for a family of pure maps."""
    for x, f in zip(family.index, family.members):
        if not is_pure(f):
            raise ValueError(f"family member {x!r} is not pure")
    ops = [_single_operator(f) for f in family.members]
    g = assemble_pure(ops, _resolve_phase(phase, family.index))
    din, dout = _controlled_dims(family.index.size, family)
    return ControlledProcess(family.index.size, family, CPMap(din, dout, (g,)),
                             canonical_spo(family.index))


def shared_purifications(family: ProcessFamily) -> list[Purification]:
    """Canonical purifications padded to one common environment."""
    raw = [purify(f) for f in family.members]
    env = max(p.env_dim for p in raw)
    return [p.padded(env) for p in raw]


def coherent_control_cp(family: ProcessFamily, phase: PhaseVector | None = None,
                        purifications: Sequence[Purification] | None = None) -> ControlledProcess:
    """Trace the environment off the coherent control of purifications of the family.

    Purifications default to the canonical ones; a supplied list must share
    one environment dimension. With a one-dimensional environment the only
    freedom left is a unit phase per member, which is dropped; otherwise the
    isometries are used as given, so a common environment unitary cancels in
    the trace.
    """
    if purifications is None:
        purifications = shared_purifications(family)
    purifications = list(purifications)
    if len(purifications) != family.index.size:
        raise ValueError("need one purification per family member")
    env = purifications[0].env_dim
    if any(p.env_dim != env for p in purifications):
        raise ValueError("purifications must share one environment")
    if env == 1:
        ops = [_single_operator(dbl(p.isometry)) for p in purifications]
    else:
        ops = [p.isometry for p in purifications]
    g_pure = assemble_pure(ops, _resolve_phase(phase, family.index))
    n = family.index.size
    d_b, d_a = family.dim_out.total, family.dim_in.total
    t = g_pure.reshape(n * d_b, env, n * d_a)
    din, dout = _controlled_dims(n, family)
    g = CPMap(din, dout, tuple(t[:, e, :] for e in range(env)))
    return ControlledProcess(n, family, g, canonical_spo(family.index))


def eq1_sides(cp: ControlledProcess) -> dict[str, tuple[CPMap, CPMap]]:
    """Both sides of the two defining equations of a controlled process.

    ``measure``: observing the control after ``g`` equals observing it before
    and applying the selected member. ``prepare``: ``g`` after preparing ``x``
    equals preparing ``x`` alongside the selected member.
    """
    fam, spo = cp.family, cp.spo
    n = fam.index.size
    id_a = CPMap.identity(fam.dim_in.total)
    id_b = CPMap.identity(fam.dim_out.total)
    m, p = spo.measure_map(), spo.prepare_map()
    meas_lhs = compose(tensor(m, id_b), cp.g)
    meas_rhs = cp_sum([tensor(CPMap.from_kraus([basis_vector(k, n) @ spo.measure[x]]), f)
                       for k, (x, f) in enumerate(zip(fam.index, fam.members))])
    prep_lhs = compose(cp.g, tensor(p, id_a))
    prep_rhs = cp_sum([tensor(CPMap.from_kraus([spo.prepare[x] @ basis_vector(k, n).T]), f)
                       for k, (x, f) in enumerate(zip(fam.index, fam.members))])
    return {"measure": (meas_lhs, meas_rhs), "prepare": (prep_lhs, prep_rhs)}


def eq1_deviation(cp: ControlledProcess) -> float:
    return max(channel_distance(l, r) for l, r in eq1_sides(cp).values())


def verify_eq1(cp: ControlledProcess, tol: float = EQ1_TOL) -> bool:
    return eq1_deviation(cp) <= tol


def no_signalling_deviation(cp: ControlledProcess) -> float:
    """Distance between ``(m (x) discard) . g . (p (x) 1)`` and ``1_X (x) discard``."""
    fam = cp.family
    n = fam.index.size
    lhs = compose(tensor(cp.spo.measure_map(), discard(fam.dim_out.total)),
                  compose(cp.g, tensor(cp.spo.prepare_map(), CPMap.identity(fam.dim_in.total))))
    rhs = tensor(classical_identity(n), discard(fam.dim_in.total))
    return channel_distance(lhs, rhs)


def shift_control_outputs(cp: ControlledProcess, shift: int = 1) -> ControlledProcess:
    """Cyclically relabel the control system on the output side of ``g``; breaks the controlled-process equations."""
    n = cp.control_dim
    s = np.roll(np.eye(n), shift, axis=0)
    d_b = cp.family.dim_out.total
    perm = np.kron(s, np.eye(d_b))
    g = CPMap(cp.g.dim_in, cp.g.dim_out, tuple(perm @ k for k in cp.g.kraus))
    return ControlledProcess(cp.control_dim, cp.family, g, cp.spo)


def extract_phase(g: CPMap, family: ProcessFamily, tol: float = EQ1_TOL) -> PhaseVector:
    """Relative phases of a pure controlled process of a pure family, first nonzero member at 0."""
    n = family.index.size
    spo = canonical_spo(family.index)
    cp = ControlledProcess(n, family, g, spo)
    dev = eq1_deviation(cp)
    if dev > tol:
        raise ValueError(f"g does not control the family (deviation {dev:.3g})")
    if not is_pure(g):
        raise ValueError("g is not pure")
    k = g.canonical_kraus()[0]
    d_b, d_a = family.dim_out.total, family.dim_in.total
    blocks = k.reshape(n, d_b, n, d_a)
    betas = []
    for x, f in enumerate(family.members):
        block = blocks[x, :, x, :]
        ref = _single_operator(f)
        norm = np.vdot(ref, ref).real
        if norm <= 1e-20:
            betas.append(None)
            continue
        c = np.vdot(ref, block) / norm
        if max_abs(block - c * ref) > max(tol, 1e-8 * math.sqrt(norm)):
            raise ValueError(f"block {x} is not proportional to the family member's Kraus operator")
        betas.append(float(np.angle(c)))
    ref_beta = next((b for b in betas if b is not None), 0.0)
    return PhaseVector({x: 0.0 if b is None else b - ref_beta for x, b in zip(family.index, betas)})


# ---------------------------------------------------------------------------
# No-go witness for purification-independent coherent control of CP families
# ---------------------------------------------------------------------------

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class NoGoWitness:
    family: ProcessFamily
    purifications: tuple[list[Purification], list[Purification]]
    distance: float


def purification_dependence(family: ProcessFamily, env_unitaries: Sequence[np.ndarray],
                            phase: PhaseVector | None = None) -> tuple[list[Purification], list[Purification], float]:
    """Choi distance between coherent controls built from canonical vs rotated purifications."""
    base = shared_purifications(family)
    if len(env_unitaries) != len(base):
        raise ValueError("need one environment unitary per family member")
    rotated = [p.rotated(u) for p, u in zip(base, env_unitaries)]
    a = coherent_control_cp(family, phase, base)
    b = coherent_control_cp(family, phase, rotated)
    return base, rotated, channel_distance(a.g, b.g)


def nogo_witness(env_unitaries: Sequence[np.ndarray] | None = None) -> NoGoWitness:
    """Identity channel and Z-dephasing: rotating only the dephasing's environment changes the control."""
    family = ProcessFamily.of([CPMap.identity(2), CPMap.from_kraus([np.diag([1, 0]), np.diag([0, 1])])])
    if env_unitaries is None:
        env_unitaries = [np.eye(2), PAULI_X]
    base, rotated, dist = purification_dependence(family, env_unitaries)
    return NoGoWitness(family, (base, rotated), dist)


# ---------------------------------------------------------------------------
# Switch and coherent control of diagrams
# ---------------------------------------------------------------------------

SWITCH_LABEL = "Z"


def party_names(n: int) -> list[str]:
    if n <= 26:
        return [chr(ord("A") + k) for k in range(n)]
    return [f"P{k}" for k in range(n)]


def switch_scenario(n: int, classical_inputs=None, classical_outputs=None,
                    names: Sequence[str] | None = None) -> IndefiniteCausalScenario:
    if n < 1:
        raise ValueError("a switch needs at least one party")
    names = party_names(n) if names is None else list(names)
    z = (SWITCH_LABEL,)
    return IndefiniteCausalScenario(
        events=tuple(names),
        in_labels={w: z for w in names},
        out_labels={w: z for w in names},
        boundary_in=z,
        boundary_out=z,
        labels=z,
        classical_inputs=classical_inputs or {},
        classical_outputs=classical_outputs or {},
    )


def build_switch(n: int, system_dim: int, instruments: Sequence[QuantumInstrument],
                 names: Sequence[str] | None = None) -> tuple[IndefiniteCausalScenario, DiagramAssignment]:
    """The n-partite switch: every party acts once on one shared system."""
    if len(instruments) != n:
        raise ValueError(f"need {n} instruments, got {len(instruments)}")
    names = party_names(n) if names is None else list(names)
    for w, inst in zip(names, instruments):
        if inst.dim_in.total != system_dim or inst.dim_out.total != system_dim:
            raise ValueError(f"instrument of party {w} is not a map on dimension {system_dim}")
    phi = switch_scenario(n, {w: i.input_set for w, i in zip(names, instruments)},
                          {w: i.output_set for w, i in zip(names, instruments)}, names)
    return phi, DiagramAssignment({SWITCH_LABEL: system_dim}, dict(zip(names, instruments)))


@dataclass(frozen=True, eq=False)
class DiagramControl:
    """Per-branch data of the coherent control of a diagram.

    ``kraus[(i, o)]`` are Kraus operators of ``H (x) A -> H (x) B`` after the
    global environment has been traced out; ``orders`` fixes the control basis.
    """

    orders: tuple[CompatibleScenario, ...]
    compiled: tuple[QuantumInstrument, ...]
    input_set: ClassicalSet
    output_set: ClassicalSet
    dim_in: SystemDims
    dim_out: SystemDims
    kraus: Mapping[tuple[str, str], tuple[np.ndarray, ...]]

    @property
    def keys(self) -> list[str]:
        return [c.canonical_key for c in self.orders]


def diagram_control(phi: IndefiniteCausalScenario, delta: DiagramAssignment,
                    phase: PhaseVector | None = None, purified: PurifiedDiagram | None = None,
                    cap: int = DEFAULT_CAP) -> DiagramControl:
    problems = check_typing(phi, delta)
    if problems:
        raise TypingError("; ".join(problems))
    orders = enumerate_compatible(phi, cap)
    if not orders:
        raise ValueError("the scenario has no compatible definite causal order")
    keys = [c.canonical_key for c in orders]
    factors = _resolve_phase(phase, keys)
    if purified is None:
        purified = purify_diagram(phi, delta)
    pure = [contract_purified(c, purified).instrument for c in orders]
    env_total = SystemDims(purified.env_dims[w] for w in phi.events).total
    first = pure[0]
    d_a = first.dim_in.total
    d_b = first.dim_out.total // env_total
    kraus = {}
    for key in first.branches:
        ws = [inst.branches[key].kraus[0] for inst in pure]
        g_pure = assemble_pure(ws, factors)
        t = g_pure.reshape(len(orders) * d_b, env_total, len(orders) * d_a)
        kraus[key] = tuple(t[:, e, :] for e in range(env_total))
    compiled = tuple(compile_order(phi, delta, c).instrument for c in orders)
    base = compiled[0]
    return DiagramControl(tuple(orders), compiled, base.input_set, base.output_set,
                          base.dim_in, base.dim_out, kraus)


def coherent_control_of_diagram(phi: IndefiniteCausalScenario, delta: DiagramAssignment,
                                phase: PhaseVector | None = None,
                                purified: PurifiedDiagram | None = None,
                                cap: int = DEFAULT_CAP) -> ControlledProcess:
    """Coherent control over the compatible causal orders, environments traced out.

    Classical inputs and outputs are embedded as dephased quantum factors, so
    ``g`` acts on ``H (x) I (x) A -> H (x) O (x) B`` and the family members are
    the compiled instruments of the individual orders.
    """
    dc = diagram_control(phi, delta, phase, purified, cap)
    n = len(dc.orders)
    ni, no = dc.input_set.size, dc.output_set.size
    kraus = []
    for a, i in enumerate(dc.input_set):
        for b, o in enumerate(dc.output_set):
            flip = basis_vector(b, no) @ basis_vector(a, ni).T
            for k in dc.kraus[(i, o)]:
                blocks = k.reshape(n, dc.dim_out.total, n, dc.dim_in.total)
                full = np.zeros((n, no * dc.dim_out.total, n, ni * dc.dim_in.total), dtype=complex)
                for x in range(n):
                    full[x, :, x, :] = np.kron(flip, blocks[x, :, x, :])
                kraus.append(full.reshape(n * no * dc.dim_out.total, n * ni * dc.dim_in.total))
    family = ProcessFamily(ClassicalSet(tuple(dc.keys)), tuple(inst.to_cpmap() for inst in dc.compiled))
    din, dout = _controlled_dims(n, family)
    return ControlledProcess(n, family, CPMap(din, dout, tuple(kraus)), canonical_spo(family.index))


def fourier_basis(n: int) -> np.ndarray:
    """Columns are the Fourier basis of the cyclic group of order ``n``."""
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def check_unbiased(basis, tol: float = 1e-9) -> None:
    b = as_matrix(basis)
    n = b.shape[0]
    if b.shape != (n, n):
        raise ValueError("measurement basis must be a square matrix")
    if max_abs(b.conj().T @ b - np.eye(n)) > tol:
        raise ValueError("measurement basis is not orthonormal")
    if max_abs(np.abs(b) ** 2 - 1.0 / n) > tol:
        raise ValueError("measurement basis is not unbiased with respect to the computational basis")


def outcome_labels(n: int) -> tuple[str, ...]:
    if n == 2:
        return ("+", "-")
    return tuple(str(k) for k in range(n))


@dataclass(frozen=True, eq=False)
class SuperpositionInstrument:
    scenario: IndefiniteCausalScenario
    diagram: DiagramAssignment
    phase: PhaseVector
    measurement_outcomes: ClassicalSet
    input_set: ClassicalSet
    output_set: ClassicalSet
    branches: Mapping[tuple[str, str, str], CPMap] = field(default_factory=dict)

    def channel(self, i: str) -> CPMap:
        return cp_sum([f for (ii, _, _), f in self.branches.items() if ii == i])

    def probabilities(self, rho, i: str) -> dict[tuple[str, str], float]:
        """Probability of each (classical output, control outcome) pair for input ``i``."""
        rho = as_matrix(rho)
        if rho.shape[1] == 1:
            rho = rho @ rho.conj().T
        return {(o, k): float(np.real(np.trace(f(rho))))
                for (ii, o, k), f in self.branches.items() if ii == i}

    def outcome_probabilities(self, rho, i: str) -> dict[str, float]:
        out = {k: 0.0 for k in self.measurement_outcomes}
        for (_, k), p in self.probabilities(rho, i).items():
            out[k] += p
        return out


def superpose(phi: IndefiniteCausalScenario, delta: DiagramAssignment,
              phase: PhaseVector | None = None, measurement="fourier",
              purified: PurifiedDiagram | None = None,
              cap: int = DEFAULT_CAP) -> SuperpositionInstrument:
    """Prepare the control in the uniform superposition, apply the coherent control,
    and measure the control in a basis unbiased to the causal-order basis."""
    dc = diagram_control(phi, delta, phase, purified, cap)
    n = len(dc.orders)
    if isinstance(measurement, str):
        if measurement != "fourier":
            raise ValueError(f"unknown measurement {measurement!r}")
        basis = fourier_basis(n)
    else:
        basis = as_matrix(measurement)
        if basis.shape != (n, n):
            raise ValueError(f"measurement basis must be {n}x{n}")
    check_unbiased(basis)
    labels = outcome_labels(n)
    plus = np.ones((n, 1), dtype=complex) / np.sqrt(n)
    d_a, d_b = dc.dim_in.total, dc.dim_out.total
    prep = np.kron(plus, np.eye(d_a))
    branches = {}
    for (i, o), ks in dc.kraus.items():
        for col, lab in enumerate(labels):
            eff = np.kron(basis[:, col:col + 1].conj().T, np.eye(d_b))
            branches[(i, o, lab)] = CPMap(dc.dim_in, dc.dim_out, tuple(eff @ k @ prep for k in ks))
    if phase is None:
        phase = PhaseVector.zeros(dc.keys)
    return SuperpositionInstrument(phi, delta, phase, ClassicalSet(labels), dc.input_set,
                                   dc.output_set, branches)


def discard_control_mixture(cp: ControlledProcess, weights: Mapping[str, float] | Sequence[float]) -> CPMap:
    """Convex mixture ``sum_x w_x F_x`` of the controlled family."""
    w = _weights(cp, weights)
    return cp_sum([f.scaled(p) for f, p in zip(cp.family.members, w)])


def discard_control(cp: ControlledProcess, weights: Mapping[str, float] | Sequence[float]) -> CPMap:
    """Prepare the classical mixture on the control, apply ``g``, discard the control."""
    w = _weights(cp, weights)
    n = cp.control_dim
    mix = cp_sum([CPMap.from_kraus([cp.spo.prepare[x]]).scaled(p) for x, p in zip(cp.family.index, w)])
    a = CPMap.identity(cp.family.dim_in.total)
    b = CPMap.identity(cp.family.dim_out.total)
    return compose(tensor(discard(n), b), compose(cp.g, tensor(mix, a))).with_dims(
        cp.family.dim_in, cp.family.dim_out)


def _weights(cp: ControlledProcess, weights) -> list[float]:
    if isinstance(weights, Mapping):
        w = [float(weights.get(x, 0.0)) for x in cp.family.index]
        unknown = set(weights) - set(cp.family.index)
        if unknown:
            raise ValueError(f"weights given for unknown branches {sorted(unknown)}")
    else:
        w = [float(x) for x in weights]
    if len(w) != cp.family.index.size:
        raise ValueError("one weight per branch is required")
    if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
        raise ValueError("weights must be a probability vector")
    return w
