"""Seeded random generators for maps, instruments, scenarios and diagrams."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .causal import FramedMultigraph, IndefiniteCausalScenario
from .diagram import DiagramAssignment, PurifiedDiagram
from .process import CPMap, ClassicalSet, QuantumInstrument
from .tensor import SystemDims


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(d, d, rng))
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    if d_out < d_in:
        raise ValueError("an isometry cannot shrink the dimension")
    return random_unitary(d_out, rng)[:, :d_in]


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    a = ginibre(d, rank or d, rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_ket(d: int, rng: np.random.Generator) -> np.ndarray:
    v = ginibre(d, 1, rng)
    return v / np.linalg.norm(v)


def random_cp_map(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> CPMap:
    """Unnormalised CP map with Ginibre Kraus operators."""
    return CPMap.from_kraus([ginibre(d_out, d_in, rng) / np.sqrt(d_in) for _ in range(n_kraus)])


def random_channel(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> CPMap:
    v = random_isometry(d_in, d_out * n_kraus, rng)
    t = v.reshape(n_kraus, d_out, d_in)
    return CPMap.from_kraus(list(t))


def random_pure_map(d_in: int, d_out: int, rng: np.random.Generator) -> CPMap:
    return CPMap.from_kraus([ginibre(d_out, d_in, rng)])


def random_instrument(dim_in, dim_out, n_inputs: int, n_outputs: int, rng: np.random.Generator,
                      max_kraus: int = 2) -> QuantumInstrument:
    """Normalised instrument: each classical input splits one random isometry across outcomes."""
    din, dout = SystemDims(dim_in), SystemDims(dim_out)
    ins, outs = ClassicalSet.of_size(n_inputs), ClassicalSet.of_size(n_outputs)
    counts = {(i, o): int(rng.integers(1, max_kraus + 1)) for i in ins for o in outs}
    needed = -(-din.total // dout.total)
    branches = {}
    for i in ins:
        total = sum(counts[(i, o)] for o in outs)
        if total < needed:
            counts[(i, outs.labels[0])] += needed - total
            total = needed
        v = random_isometry(din.total, dout.total * total, rng)
        t = v.reshape(total, dout.total, din.total)
        start = 0
        for o in outs:
            c = counts[(i, o)]
            branches[(i, o)] = CPMap(din, dout, tuple(t[start:start + c]))
            start += c
    return QuantumInstrument(ins, outs, din, dout, branches, normalised=True)


def random_unitary_instrument(d: int, rng: np.random.Generator) -> QuantumInstrument:
    return QuantumInstrument.from_channel(CPMap.from_kraus([random_unitary(d, rng)]), normalised=True)


def random_indefinite_scenario(rng: np.random.Generator, n_events: int = 3, n_labels: int = 2,
                               max_wires: int = 3) -> IndefiniteCausalScenario:
    """A scenario built from a random wiring, so it has at least one compatible order.

    Wires are drawn event by event from a pool of open wires; each wire gets a
    random label from a small set, which lets other wirings match too.
    """
    labels = [chr(ord("a") + k) for k in range(n_labels)]
    events = [f"w{k}" for k in range(n_events)]
    pool = [str(rng.choice(labels)) for _ in range(int(rng.integers(1, 3)))]
    boundary_in = list(pool)
    in_labels, out_labels = {}, {}
    for w in events:
        n_take = int(rng.integers(0, min(2, len(pool)) + 1))
        take = sorted(rng.choice(len(pool), size=n_take, replace=False).tolist(), reverse=True)
        ins = [pool.pop(k) for k in take]
        room = max_wires - len(pool)
        n_new = int(rng.integers(1, min(2, room) + 1)) if room > 0 else 0
        outs = [str(rng.choice(labels)) for _ in range(n_new)]
        in_labels[w] = tuple(ins)
        out_labels[w] = tuple(outs)
        pool.extend(outs)
    order = rng.permutation(len(pool)).tolist()
    boundary_out = [pool[k] for k in order]
    ci = {w: ClassicalSet.of_size(int(rng.integers(1, 3))) for w in events}
    co = {w: ClassicalSet.of_size(int(rng.integers(1, 3))) for w in events}
    return IndefiniteCausalScenario(tuple(events), in_labels, out_labels, tuple(boundary_in),
                                    tuple(boundary_out), tuple(labels), ci, co)


def random_diagram(phi: IndefiniteCausalScenario, rng: np.random.Generator,
                   dims=(1, 2), max_kraus: int = 2) -> DiagramAssignment:
    sys = {l: int(rng.choice(dims)) for l in phi.labels}
    proc = {}
    for w in phi.events:
        din = SystemDims(sys[l] for l in phi.in_labels[w])
        dout = SystemDims(sys[l] for l in phi.out_labels[w])
        proc[w] = random_instrument(din, dout, phi.classical_inputs[w].size,
                                    phi.classical_outputs[w].size, rng, max_kraus)
    return DiagramAssignment(sys, proc)


def random_env_unitaries(pdelta: PurifiedDiagram, rng: np.random.Generator) -> dict:
    return {(w, i, o): random_unitary(pdelta.env_dims[w], rng)
            for w, ps in pdelta.purifications.items() for (i, o) in ps}


def random_topological_order(graph: FramedMultigraph, rng: np.random.Generator) -> list[str]:
    indeg = {n: 0 for n in graph.nodes}
    succ = defaultdict(list)
    for e in graph.edges:
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    ready = [n for n, d in indeg.items() if d == 0]
    order = []
    while ready:
        n = ready.pop(int(rng.integers(len(ready))))
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    internal = set(graph.internal_nodes)
    return [n for n in order if n in internal]


