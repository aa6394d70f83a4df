"""Framed multigraphs, causal scenarios and enumeration of compatible causal orders."""
from __future__ import annotations

import heapq
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .process import ClassicalSet

DEFAULT_CAP = 10**6


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, bound: int, cap: int):
        super().__init__(f"worst-case matching count {bound} exceeds the enumeration cap {cap}")
        self.bound = bound
        self.cap = cap


class Edge(NamedTuple):
    id: str
    tail: str
    head: str


def input_node(k: int) -> str:
    return f"in:{k}"


def output_node(k: int) -> str:
    return f"out:{k}"


@dataclass(frozen=True, eq=False)
class FramedMultigraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    input_nodes: tuple[str, ...]
    output_nodes: tuple[str, ...]
    in_framing: Mapping[str, tuple[str, ...]]
    out_framing: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(Edge(*e) for e in self.edges))
        object.__setattr__(self, "input_nodes", tuple(self.input_nodes))
        object.__setattr__(self, "output_nodes", tuple(self.output_nodes))
        object.__setattr__(self, "in_framing", {n: tuple(v) for n, v in self.in_framing.items()})
        object.__setattr__(self, "out_framing", {n: tuple(v) for n, v in self.out_framing.items()})

    @property
    def internal_nodes(self) -> tuple[str, ...]:
        boundary = set(self.input_nodes) | set(self.output_nodes)
        return tuple(n for n in self.nodes if n not in boundary)

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def incoming(self, node: str) -> tuple[str, ...]:
        return self.in_framing.get(node, ())

    def outgoing(self, node: str) -> tuple[str, ...]:
        return self.out_framing.get(node, ())


def validate_framed(graph: FramedMultigraph) -> list[str]:
    """Structural violations of a framed multigraph; an empty list means valid."""
    problems = []
    nodes = set(graph.nodes)
    if len(nodes) != len(graph.nodes):
        problems.append("duplicate node ids")
    ids = [e.id for e in graph.edges]
    if len(set(ids)) != len(ids):
        problems.append("duplicate edge ids")
    inc, out = defaultdict(list), defaultdict(list)
    for e in graph.edges:
        for end in (e.tail, e.head):
            if end not in nodes:
                problems.append(f"edge {e.id}: endpoint {end!r} is not a node")
        inc[e.head].append(e.id)
        out[e.tail].append(e.id)
    for n in graph.input_nodes:
        if n not in nodes:
            problems.append(f"input node {n!r} is not a node")
        if inc[n]:
            problems.append(f"input node {n}: has incoming edges {inc[n]}")
        if len(out[n]) != 1:
            problems.append(f"input node {n}: needs exactly one outgoing edge, has {len(out[n])}")
    for n in graph.output_nodes:
        if n not in nodes:
            problems.append(f"output node {n!r} is not a node")
        if out[n]:
            problems.append(f"output node {n}: has outgoing edges {out[n]}")
        if len(inc[n]) != 1:
            problems.append(f"output node {n}: needs exactly one incoming edge, has {len(inc[n])}")
    both = set(graph.input_nodes) & set(graph.output_nodes)
    if both:
        problems.append(f"nodes {sorted(both)} are both input and output nodes")
    for n in graph.nodes:
        for kind, framing, actual in (("in", graph.in_framing, inc), ("out", graph.out_framing, out)):
            listed = list(framing.get(n, ()))
            if sorted(listed) != sorted(actual[n]) or len(set(listed)) != len(listed):
                problems.append(
                    f"node {n}: {kind}-framing {listed} is not an ordering of its edges {actual[n]}"
                )
    return problems


def is_acyclic(graph: FramedMultigraph) -> bool:
    indeg = {n: 0 for n in graph.nodes}
    succ = defaultdict(list)
    for e in graph.edges:
        if e.tail == e.head:
            return False
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    ready = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen == len(indeg)


def topological_order(graph: FramedMultigraph) -> list[str]:
    """Internal nodes in a topological order, smallest node id first among ready nodes."""
    indeg = {n: 0 for n in graph.nodes}
    succ = defaultdict(list)
    for e in graph.edges:
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(indeg):
        raise ValueError("graph has a directed cycle")
    internal = set(graph.internal_nodes)
    return [n for n in order if n in internal]


def is_topological(graph: FramedMultigraph, order: Sequence[str]) -> bool:
    if sorted(order) != sorted(graph.internal_nodes):
        return False
    pos = {n: k for k, n in enumerate(order)}
    return all(pos[e.tail] < pos[e.head] for e in graph.edges
               if e.tail in pos and e.head in pos)


@dataclass(frozen=True, eq=False)
class DefiniteCausalScenario:
    graph: FramedMultigraph
    classical_inputs: Mapping[str, ClassicalSet] = field(default_factory=dict)
    classical_outputs: Mapping[str, ClassicalSet] = field(default_factory=dict)

    def __post_init__(self):
        problems = validate_framed(self.graph)
        if problems:
            raise ValueError("invalid framed multigraph: " + "; ".join(problems))
        if not is_acyclic(self.graph):
            raise ValueError("a definite causal scenario needs an acyclic graph")
        events = self.graph.internal_nodes
        ins = {w: self.classical_inputs.get(w, ClassicalSet.singleton()) for w in events}
        outs = {w: self.classical_outputs.get(w, ClassicalSet.singleton()) for w in events}
        extra = (set(self.classical_inputs) | set(self.classical_outputs)) - set(events)
        if extra:
            raise ValueError(f"classical sets given for non-events {sorted(extra)}")
        object.__setattr__(self, "classical_inputs", ins)
        object.__setattr__(self, "classical_outputs", outs)

    @property
    def events(self) -> tuple[str, ...]:
        return self.graph.internal_nodes


@dataclass(frozen=True, eq=False)
class IndefiniteCausalScenario:
    events: tuple[str, ...]
    in_labels: Mapping[str, tuple[str, ...]]
    out_labels: Mapping[str, tuple[str, ...]]
    boundary_in: tuple[str, ...] = ()
    boundary_out: tuple[str, ...] = ()
    labels: tuple[str, ...] | None = None
    classical_inputs: Mapping[str, ClassicalSet] = field(default_factory=dict)
    classical_outputs: Mapping[str, ClassicalSet] = field(default_factory=dict)

    def __post_init__(self):
        events = tuple(self.events)
        if len(set(events)) != len(events):
            raise ValueError("duplicate event ids")
        for w in events:
            if w.startswith(("in:", "out:")):
                raise ValueError(f"event id {w!r} clashes with boundary node names")
        ins = {w: tuple(self.in_labels.get(w, ())) for w in events}
        outs = {w: tuple(self.out_labels.get(w, ())) for w in events}
        b_in, b_out = tuple(self.boundary_in), tuple(self.boundary_out)
        used = {l for seq in [*ins.values(), *outs.values(), b_in, b_out] for l in seq}
        labels = tuple(sorted(used)) if self.labels is None else tuple(self.labels)
        missing = used - set(labels)
        if missing:
            raise ValueError(f"labels {sorted(missing)} are not in the label set")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "in_labels", ins)
        object.__setattr__(self, "out_labels", outs)
        object.__setattr__(self, "boundary_in", b_in)
        object.__setattr__(self, "boundary_out", b_out)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classical_inputs",
                           {w: self.classical_inputs.get(w, ClassicalSet.singleton()) for w in events})
        object.__setattr__(self, "classical_outputs",
                           {w: self.classical_outputs.get(w, ClassicalSet.singleton()) for w in events})


@dataclass(frozen=True, eq=False)
class CompatibleScenario:
    scenario: DefiniteCausalScenario
    labelling: Mapping[str, str]
    canonical_key: str = ""

    def __post_init__(self):
        object.__setattr__(self, "labelling", dict(self.labelling))
        if not self.canonical_key:
            object.__setattr__(self, "canonical_key", canonical_key(self))


def _tail_spec(graph: FramedMultigraph, edge: Edge) -> str:
    if edge.tail in graph.input_nodes:
        return f"IN[{graph.input_nodes.index(edge.tail)}]"
    return f"{edge.tail}.out[{graph.outgoing(edge.tail).index(edge.id)}]"


def _head_spec(graph: FramedMultigraph, edge: Edge) -> str:
    if edge.head in graph.output_nodes:
        return f"OUT[{graph.output_nodes.index(edge.head)}]"
    return f"{edge.head}.in[{graph.incoming(edge.head).index(edge.id)}]"


def _key_from_triples(triples) -> str:
    return ";".join(f"{label}:{tail}->{head}" for label, tail, head in sorted(triples))


def canonical_key(c: CompatibleScenario) -> str:
    """Edge-id independent serialization of the wiring: sorted ``label:tail->head`` items."""
    graph = c.scenario.graph
    return _key_from_triples((c.labelling[e.id], _tail_spec(graph, e), _head_spec(graph, e))
                             for e in graph.edges)


def definite_to_indefinite(theta: DefiniteCausalScenario) -> IndefiniteCausalScenario:
    """Indefinite scenario whose labels are the edges of ``theta``."""
    g = theta.graph
    return IndefiniteCausalScenario(
        events=theta.events,
        in_labels={w: g.incoming(w) for w in theta.events},
        out_labels={w: g.outgoing(w) for w in theta.events},
        boundary_in=tuple(g.outgoing(n)[0] for n in g.input_nodes),
        boundary_out=tuple(g.incoming(n)[0] for n in g.output_nodes),
        labels=tuple(e.id for e in g.edges),
        classical_inputs=theta.classical_inputs,
        classical_outputs=theta.classical_outputs,
    )


def as_compatible(theta: DefiniteCausalScenario) -> CompatibleScenario:
    """``theta`` labelled by its own edge ids (compatible with ``definite_to_indefinite(theta)``)."""
    return CompatibleScenario(theta, {e.id: e.id for e in theta.graph.edges})


def _endpoints(phi: IndefiniteCausalScenario):
    """Out-endpoints (edge tails) and in-endpoints (edge heads), as (label, node, slot) triples."""
    tails = [(l, input_node(k), 0) for k, l in enumerate(phi.boundary_in)]
    heads = []
    for w in phi.events:
        tails += [(l, w, s) for s, l in enumerate(phi.out_labels[w])]
        heads += [(l, w, s) for s, l in enumerate(phi.in_labels[w])]
    heads += [(l, output_node(k), 0) for k, l in enumerate(phi.boundary_out)]
    return tails, heads


def matching_bound(phi: IndefiniteCausalScenario) -> int:
    """Worst-case number of label-respecting pairings (0 when labels cannot balance)."""
    tails, heads = _endpoints(phi)
    ct, ch = defaultdict(int), defaultdict(int)
    for l, *_ in tails:
        ct[l] += 1
    for l, *_ in heads:
        ch[l] += 1
    if ct != ch:
        return 0
    return math.prod(math.factorial(c) for c in ct.values())


def _build_scenario(phi: IndefiniteCausalScenario, pairs) -> CompatibleScenario:
    """Definite scenario for a list of ((label, tail node, slot), (label, head node, slot)) pairs."""
    n_in, n_out = len(phi.boundary_in), len(phi.boundary_out)
    ins_nodes = tuple(input_node(k) for k in range(n_in))
    outs_nodes = tuple(output_node(k) for k in range(n_out))

    def spec(node, slot, side):
        if node.startswith("in:"):
            return f"IN[{node[3:]}]"
        if node.startswith("out:"):
            return f"OUT[{node[4:]}]"
        return f"{node}.{side}[{slot}]"

    items = sorted(((t[0], spec(t[1], t[2], "out"), spec(h[1], h[2], "in")), t, h) for t, h in pairs)
    edges, labelling = [], {}
    out_slots = {w: [None] * len(phi.out_labels[w]) for w in phi.events}
    in_slots = {w: [None] * len(phi.in_labels[w]) for w in phi.events}
    in_framing = {n: () for n in ins_nodes}
    out_framing = {n: () for n in outs_nodes}
    for k, ((label, _, _), (_, tnode, tslot), (_, hnode, hslot)) in enumerate(items):
        eid = f"e{k}"
        edges.append(Edge(eid, tnode, hnode))
        labelling[eid] = label
        if tnode in out_slots:
            out_slots[tnode][tslot] = eid
        else:
            out_framing[tnode] = (eid,)
        if hnode in in_slots:
            in_slots[hnode][hslot] = eid
        else:
            in_framing[hnode] = (eid,)
    for w in phi.events:
        in_framing[w] = tuple(in_slots[w])
        out_framing[w] = tuple(out_slots[w])
    graph = FramedMultigraph(tuple(phi.events) + ins_nodes + outs_nodes, tuple(edges),
                             ins_nodes, outs_nodes, in_framing, out_framing)
    theta = DefiniteCausalScenario(graph, phi.classical_inputs, phi.classical_outputs)
    return CompatibleScenario(theta, labelling, _key_from_triples(t for t, _, _ in items))


def _event_acyclic(events, pairs) -> bool:
    succ = defaultdict(set)
    for (_, t, _), (_, h, _) in pairs:
        if t == h:
            return False
        succ[t].add(h)
    state = {}

    def visit(n):
        state[n] = 1
        for m in succ[n]:
            s = state.get(m, 0)
            if s == 1 or (s == 0 and not visit(m)):
                return False
        state[n] = 2
        return True

    return all(state.get(w, 0) == 2 or visit(w) for w in events)


def enumerate_compatible(phi: IndefiniteCausalScenario, cap: int = DEFAULT_CAP) -> list[CompatibleScenario]:
    """All definite scenarios compatible with ``phi``, sorted by canonical key.

    Pairings are enumerated independently within each label class, then
    filtered for acyclicity.
    """
    tails, heads = _endpoints(phi)
    bound = matching_bound(phi)
    if bound == 0:
        return []
    if bound > cap:
        raise EnumerationCapExceeded(bound, cap)
    t_by, h_by = defaultdict(list), defaultdict(list)
    for t in tails:
        t_by[t[0]].append(t)
    for h in heads:
        h_by[h[0]].append(h)
    labels = sorted(t_by)
    per_label = [[list(zip(t_by[l], perm)) for perm in itertools.permutations(h_by[l])]
                 for l in labels]
    found: dict[str, CompatibleScenario] = {}
    for combo in itertools.product(*per_label):
        pairs = [p for group in combo for p in group]
        if not _event_acyclic(phi.events, pairs):
            continue
        c = _build_scenario(phi, pairs)
        found.setdefault(c.canonical_key, c)
    return [found[k] for k in sorted(found)]


def check_compatible(phi: IndefiniteCausalScenario, c: CompatibleScenario) -> list[str]:
    """Violations of the compatibility conditions between ``c`` and ``phi`` (empty if compatible)."""
    theta, g = c.scenario, c.scenario.graph
    problems = []
    if set(theta.events) != set(phi.events):
        problems.append(f"events {sorted(theta.events)} differ from {sorted(phi.events)}")
        return problems
    for w in phi.events:
        if theta.classical_inputs[w] != phi.classical_inputs[w]:
            problems.append(f"event {w}: classical inputs differ")
        if theta.classical_outputs[w] != phi.classical_outputs[w]:
            problems.append(f"event {w}: classical outputs differ")
        if len(g.incoming(w)) != len(phi.in_labels[w]):
            problems.append(f"event {w}: wrong number of incoming edges")
        if len(g.outgoing(w)) != len(phi.out_labels[w]):
            problems.append(f"event {w}: wrong number of outgoing edges")
    if len(g.input_nodes) != len(phi.boundary_in):
        problems.append("wrong number of input nodes")
    if len(g.output_nodes) != len(phi.boundary_out):
        problems.append("wrong number of output nodes")
    if problems:
        return problems
    for e in g.edges:
        if e.tail in g.input_nodes:
            tail_label = phi.boundary_in[g.input_nodes.index(e.tail)]
        else:
            tail_label = phi.out_labels[e.tail][g.outgoing(e.tail).index(e.id)]
        if e.head in g.output_nodes:
            head_label = phi.boundary_out[g.output_nodes.index(e.head)]
        else:
            head_label = phi.in_labels[e.head][g.incoming(e.head).index(e.id)]
        if tail_label != head_label:
            problems.append(f"edge {e.id}: tail label {tail_label!r} != head label {head_label!r}")
        elif c.labelling.get(e.id) != tail_label:
            problems.append(f"edge {e.id}: labelled {c.labelling.get(e.id)!r}, expected {tail_label!r}")
    return problems


def graph_to_json(c: CompatibleScenario) -> dict:
    g = c.scenario.graph
    return {
        "canonical_key": c.canonical_key,
        "events": list(c.scenario.events),
        "order": topological_order(g),
        "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "label": c.labelling[e.id]}
                  for e in g.edges],
        "in_framing": {n: list(v) for n, v in g.in_framing.items()},
        "out_framing": {n: list(v) for n, v in g.out_framing.items()},
    }
