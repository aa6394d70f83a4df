"""Diagrams over causal scenarios and their compilation into processes.

Contraction evolves a "frontier" of open wires along a topological order of
the events: before each event its input wires are permuted to the front (in
framing order), the event's operator is applied, and its output wires replace
them at the front. Boundary outputs are finally permuted into output-node order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .causal import (
    CompatibleScenario,
    DefiniteCausalScenario,
    Edge,
    FramedMultigraph,
    IndefiniteCausalScenario,
    check_compatible,
    is_topological,
    output_node,
    topological_order,
)
from .process import CPMap, ClassicalSet, Purification, QuantumInstrument, purify
from .tensor import SystemDims, as_matrix, permute_factors


class TypingError(ValueError):
    """A diagram's processes do not fit the wires of its scenario."""


@dataclass(frozen=True, eq=False)
class DiagramAssignment:
    """``sys`` maps labels (or edge ids) to dimensions; ``proc`` maps events to instruments."""

    sys: Mapping[str, int]
    proc: Mapping[str, QuantumInstrument]

    def __post_init__(self):
        object.__setattr__(self, "sys", {k: int(v) for k, v in self.sys.items()})
        object.__setattr__(self, "proc", dict(self.proc))
        for k, v in self.sys.items():
            if v < 1:
                raise ValueError(f"system {k!r} has non-positive dimension {v}")


@dataclass(frozen=True, eq=False)
class CompiledProcess:
    """Process of a diagram; ``env_dims`` lists trailing environment outputs (if any)."""

    instrument: QuantumInstrument
    env_dims: tuple[int, ...] = ()

    def branch(self, i: str, o: str) -> CPMap:
        return self.instrument.branch(i, o)

    def traced(self) -> "CompiledProcess":
        """Discard the environment outputs."""
        if not self.env_dims:
            return self
        inst = self.instrument
        n_env = len(self.env_dims)
        boundary = inst.dim_out[: len(inst.dim_out) - n_env]
        d_b = SystemDims(boundary).total
        e_tot = SystemDims(self.env_dims).total
        branches = {}
        for key, f in inst.branches.items():
            kraus = []
            for k in f.kraus:
                t = k.reshape(d_b, e_tot, -1)
                kraus.extend(t[:, e, :] for e in range(e_tot))
            branches[key] = CPMap(inst.dim_in, boundary, tuple(kraus))
        return CompiledProcess(QuantumInstrument(inst.input_set, inst.output_set, inst.dim_in,
                                                 boundary, branches))


def _check_event_types(events, in_wires, out_wires, sys, proc, classical_in, classical_out) -> list[str]:
    problems = []
    for w in events:
        if w not in proc:
            problems.append(f"event {w}: no process assigned")
            continue
        inst = proc[w]
        for side, have, wires in (("input", inst.dim_in, in_wires[w]), ("output", inst.dim_out, out_wires[w])):
            dims = tuple(sys[x] for x in wires)
            if have.total != SystemDims(dims).total:
                listing = ", ".join(f"{x}={d}" for x, d in zip(wires, dims)) or "none"
                problems.append(f"event {w}: quantum {side} dimension {have.total} does not match "
                                f"wires [{listing}]")
        if inst.input_set != classical_in[w]:
            problems.append(f"event {w}: classical inputs {inst.input_set.labels} != "
                            f"{classical_in[w].labels}")
        if inst.output_set != classical_out[w]:
            problems.append(f"event {w}: classical outputs {inst.output_set.labels} != "
                            f"{classical_out[w].labels}")
    return problems


def check_typing(phi: IndefiniteCausalScenario, delta: DiagramAssignment) -> list[str]:
    """Typing violations of a diagram over an indefinite scenario."""
    missing = [l for l in phi.labels if l not in delta.sys]
    if missing:
        return [f"wire label {l!r}: no system assigned" for l in missing]
    return _check_event_types(phi.events, phi.in_labels, phi.out_labels, delta.sys, delta.proc,
                              phi.classical_inputs, phi.classical_outputs)


def check_typing_definite(theta: DefiniteCausalScenario, delta: DiagramAssignment) -> list[str]:
    g = theta.graph
    missing = [e.id for e in g.edges if e.id not in delta.sys]
    if missing:
        return [f"wire {e}: no system assigned" for e in missing]
    in_wires = {w: g.incoming(w) for w in theta.events}
    out_wires = {w: g.outgoing(w) for w in theta.events}
    return _check_event_types(theta.events, in_wires, out_wires, delta.sys, delta.proc,
                              theta.classical_inputs, theta.classical_outputs)


def contract_operators(graph: FramedMultigraph, ops: Mapping[str, np.ndarray],
                       edge_dims: Mapping[str, int], order: Sequence[str] | None = None) -> np.ndarray:
    """Wire linear maps together along ``graph``.

    ``ops[w]`` maps the tensor product of the event's incoming wires (framing
    order) to that of its outgoing wires. The result maps boundary inputs (in
    input-node order) to boundary outputs (in output-node order).
    """
    if order is None:
        order = topological_order(graph)
    elif not is_topological(graph, order):
        raise ValueError(f"{list(order)} is not a topological order of the events")
    open_wires = [graph.outgoing(n)[0] for n in graph.input_nodes]
    d_in = SystemDims(edge_dims[e] for e in open_wires).total
    state = np.eye(d_in, dtype=complex)

    for w in order:
        ins, outs = graph.incoming(w), graph.outgoing(w)
        rest = [e for e in open_wires if e not in ins]
        perm = [open_wires.index(e) for e in ins] + [open_wires.index(e) for e in rest]
        dims_now = [edge_dims[e] for e in open_wires]
        state = permute_factors(state, (d_in,), dims_now, [0], perm)
        op = as_matrix(ops[w])
        d_rest = SystemDims(edge_dims[e] for e in rest).total
        state = np.kron(op, np.eye(d_rest)) @ state
        open_wires = list(outs) + rest

    final = [graph.incoming(n)[0] for n in graph.output_nodes]
    perm = [open_wires.index(e) for e in final]
    return permute_factors(state, (d_in,), [edge_dims[e] for e in open_wires], [0], perm)


def _compile(theta: DefiniteCausalScenario, edge_dims: Mapping[str, int],
             branch_kraus: Callable[[str, str, str], Sequence[np.ndarray]],
             order: Sequence[str] | None, compress: bool) -> QuantumInstrument:
    g = theta.graph
    events = theta.events
    in_sets = [theta.classical_inputs[w] for w in events]
    out_sets = [theta.classical_outputs[w] for w in events]
    dim_in = SystemDims(edge_dims[g.outgoing(n)[0]] for n in g.input_nodes)
    dim_out = SystemDims(edge_dims[g.incoming(n)[0]] for n in g.output_nodes)
    if order is None:
        order = topological_order(g)
    branches = {}
    for ivec in itertools.product(*(s.labels for s in in_sets)):
        for ovec in itertools.product(*(s.labels for s in out_sets)):
            per_event = [branch_kraus(w, i, o) for w, i, o in zip(events, ivec, ovec)]
            kraus = [contract_operators(g, dict(zip(events, choice)), edge_dims, order)
                     for choice in itertools.product(*per_event)]
            f = CPMap(dim_in, dim_out, tuple(kraus))
            if compress and len(kraus) > dim_in.total * dim_out.total:
                f = f.compressed()
            branches[(",".join(ivec), ",".join(ovec))] = f
    return QuantumInstrument(ClassicalSet.product(in_sets), ClassicalSet.product(out_sets),
                             dim_in, dim_out, branches)


def contract(theta: DefiniteCausalScenario, delta: DiagramAssignment,
             order: Sequence[str] | None = None) -> CompiledProcess:
    """The process of a diagram over a definite scenario (``delta.sys`` keyed by edge id).

    Global classical inputs/outputs are ordered by the scenario's event order;
    each branch is the wire contraction of the local branches.
    """
    problems = check_typing_definite(theta, delta)
    if problems:
        raise TypingError("; ".join(problems))

    def branch_kraus(w, i, o):
        return delta.proc[w].branch(i, o).kraus

    return CompiledProcess(_compile(theta, delta.sys, branch_kraus, order, compress=True))


def induce(phi: IndefiniteCausalScenario, delta: DiagramAssignment,
           theta: CompatibleScenario) -> DiagramAssignment:
    """Diagram over ``theta`` whose edge systems are read through the labelling."""
    problems = check_compatible(phi, theta)
    if problems:
        raise ValueError("scenario is not compatible: " + "; ".join(problems))
    problems = check_typing(phi, delta)
    if problems:
        raise TypingError("; ".join(problems))
    return DiagramAssignment({e: delta.sys[l] for e, l in theta.labelling.items()}, delta.proc)


def compile_order(phi: IndefiniteCausalScenario, delta: DiagramAssignment,
                  theta: CompatibleScenario, order: Sequence[str] | None = None) -> CompiledProcess:
    return contract(theta.scenario, induce(phi, delta, theta), order)


def env_label(event: str) -> str:
    return f"env:{event}"


@dataclass(frozen=True, eq=False)
class PurifiedDiagram:
    """Every branch of every event replaced by one linear map with an environment output.

    ``purifications[w][(i, o)]`` holds the purifying map of branch ``F_w(o|i)``;
    all branches of an event share the environment dimension ``env_dims[w]``.
    """

    base: DiagramAssignment
    env_dims: Mapping[str, int]
    purifications: Mapping[str, Mapping[tuple[str, str], Purification]] = field(default_factory=dict)

    @property
    def purified_proc(self) -> dict[str, QuantumInstrument]:
        out = {}
        for w, inst in self.base.proc.items():
            branches = {key: p.as_cpmap() for key, p in self.purifications[w].items()}
            out[w] = QuantumInstrument(inst.input_set, inst.output_set, inst.dim_in,
                                       inst.dim_out + (self.env_dims[w],), branches)
        return out

    def operator(self, event: str, i: str, o: str) -> np.ndarray:
        return self.purifications[event][(i, o)].isometry

    def max_trace_error(self) -> float:
        """Largest Choi distance between a traced purification and its source branch."""
        from .process import channel_distance

        return max(channel_distance(p.traced(), self.base.proc[w].branch(*key))
                   for w, ps in self.purifications.items() for key, p in ps.items())

    def with_env_unitaries(self, unitaries: Mapping[tuple[str, str, str], np.ndarray]) -> "PurifiedDiagram":
        """Change purification by unitaries keyed ``(event, i, o)`` acting on the environments."""
        new = {w: dict(ps) for w, ps in self.purifications.items()}
        for (w, i, o), u in unitaries.items():
            new[w][(i, o)] = new[w][(i, o)].rotated(u)
        return PurifiedDiagram(self.base, self.env_dims, new)


def purify_diagram(phi: IndefiniteCausalScenario, delta: DiagramAssignment) -> PurifiedDiagram:
    """Canonically purify every branch; each event gets the largest branch rank as environment."""
    problems = check_typing(phi, delta)
    if problems:
        raise TypingError("; ".join(problems))
    env_dims, purifications = {}, {}
    for w in phi.events:
        inst = delta.proc[w]
        raw = {key: purify(f) for key, f in inst.branches.items()}
        env = max(p.env_dim for p in raw.values())
        env_dims[w] = env
        purifications[w] = {key: p.padded(env) for key, p in raw.items()}
    return PurifiedDiagram(delta, env_dims, purifications)


def purify_scenario(phi: IndefiniteCausalScenario) -> IndefiniteCausalScenario:
    """Add a fresh environment label to each event's outputs and to the boundary outputs."""
    envs = [env_label(w) for w in phi.events]
    clash = set(envs) & set(phi.labels)
    if clash:
        raise ValueError(f"environment labels {sorted(clash)} already in use")
    return IndefiniteCausalScenario(
        events=phi.events,
        in_labels=phi.in_labels,
        out_labels={w: phi.out_labels[w] + (env_label(w),) for w in phi.events},
        boundary_in=phi.boundary_in,
        boundary_out=phi.boundary_out + tuple(envs),
        labels=phi.labels + tuple(envs),
        classical_inputs=phi.classical_inputs,
        classical_outputs=phi.classical_outputs,
    )


def with_environment_outputs(theta: CompatibleScenario) -> CompatibleScenario:
    """Extend ``theta`` with one environment wire per event, ending at new trailing output nodes."""
    scen, g = theta.scenario, theta.scenario.graph
    n_out = len(g.output_nodes)
    new_outputs = tuple(output_node(n_out + k) for k in range(len(scen.events)))
    edges = list(g.edges)
    labelling = dict(theta.labelling)
    out_framing = dict(g.out_framing)
    in_framing = dict(g.in_framing)
    for w, node in zip(scen.events, new_outputs):
        eid = env_label(w)
        edges.append(Edge(eid, w, node))
        labelling[eid] = eid
        out_framing[w] = g.outgoing(w) + (eid,)
        in_framing[node] = (eid,)
    graph = FramedMultigraph(g.nodes + new_outputs, tuple(edges), g.input_nodes,
                             g.output_nodes + new_outputs, in_framing, out_framing)
    return CompatibleScenario(DefiniteCausalScenario(graph, scen.classical_inputs,
                                                     scen.classical_outputs), labelling)


def contract_purified(theta: CompatibleScenario, pdelta: PurifiedDiagram,
                      order: Sequence[str] | None = None) -> CompiledProcess:
    """Compile the purified diagram with environments left open, appended in event order."""
    ext = with_environment_outputs(theta)
    edge_dims = {}
    for e, l in ext.labelling.items():
        if l.startswith("env:") and l not in pdelta.base.sys:
            edge_dims[e] = pdelta.env_dims[l[4:]]
        else:
            edge_dims[e] = pdelta.base.sys[l]

    def branch_kraus(w, i, o):
        return [pdelta.operator(w, i, o)]

    inst = _compile(ext.scenario, edge_dims, branch_kraus, order, compress=False)
    return CompiledProcess(inst, tuple(pdelta.env_dims[w] for w in theta.scenario.events))
