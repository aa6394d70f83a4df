"""CP maps, quantum instruments, purification and sharp preparation-observation pairs.

Classical systems are embedded as dephased quantum systems: a classical set
``X`` lives on ``C^|X|`` and only its diagonal is meaningful.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tensor import (
    RANK_TOL,
    SystemDims,
    as_matrix,
    basis_vector,
    choi_to_kraus,
    kraus_to_choi,
    max_abs,
    numerical_rank,
)

CHANNEL_TOL = 1e-9


@dataclass(frozen=True)
class ClassicalSet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ValueError("a classical set needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in classical set {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in classical set {self.labels}") from None

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def singleton(cls, label: str = "0") -> "ClassicalSet":
        return cls((label,))

    @classmethod
    def of_size(cls, n: int) -> "ClassicalSet":
        return cls(tuple(str(k) for k in range(n)))

    @classmethod
    def product(cls, sets: Sequence["ClassicalSet"]) -> "ClassicalSet":
        """Cartesian product with labels joined by commas (first set varies slowest)."""
        if not sets:
            return cls.singleton()
        return cls(tuple(",".join(t) for t in itertools.product(*(s.labels for s in sets))))


@dataclass(frozen=True, eq=False)
class CPMap:
    """Completely positive map in Kraus form; need not be trace-preserving."""

    dim_in: SystemDims
    dim_out: SystemDims
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        din, dout = SystemDims(self.dim_in), SystemDims(self.dim_out)
        kraus = tuple(as_matrix(k) for k in self.kraus)
        for k in kraus:
            if k.shape != (dout.total, din.total):
                raise ValueError(
                    f"Kraus operator of shape {k.shape} does not fit a map {din} -> {dout}"
                )
        object.__setattr__(self, "dim_in", din)
        object.__setattr__(self, "dim_out", dout)
        object.__setattr__(self, "kraus", kraus)

    @classmethod
    def from_kraus(cls, kraus: Iterable, dim_in=None, dim_out=None) -> "CPMap":
        kraus = [as_matrix(k) for k in kraus]
        if not kraus:
            raise ValueError("need dims to build a map from an empty Kraus list")
        rows, cols = kraus[0].shape
        return cls(SystemDims(cols if dim_in is None else dim_in),
                   SystemDims(rows if dim_out is None else dim_out), tuple(kraus))

    @classmethod
    def zero(cls, dim_in, dim_out) -> "CPMap":
        din, dout = SystemDims(dim_in), SystemDims(dim_out)
        return cls(din, dout, (np.zeros((dout.total, din.total), dtype=complex),))

    @classmethod
    def identity(cls, dims) -> "CPMap":
        dims = SystemDims(dims)
        return cls(dims, dims, (np.eye(dims.total, dtype=complex),))

    @cached_property
    def choi(self) -> np.ndarray:
        if not self.kraus:
            n = self.dim_in.total * self.dim_out.total
            return np.zeros((n, n), dtype=complex)
        return kraus_to_choi(self.kraus)

    def canonical_kraus(self, rank_tol: float = RANK_TOL) -> list[np.ndarray]:
        return choi_to_kraus(self.choi, self.dim_in.total, self.dim_out.total, rank_tol)

    def compressed(self) -> "CPMap":
        """Same map with a minimal canonical Kraus set (zero map keeps one zero operator)."""
        kraus = self.canonical_kraus()
        if not kraus:
            return CPMap.zero(self.dim_in, self.dim_out)
        return CPMap(self.dim_in, self.dim_out, tuple(kraus))

    def __call__(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        out = np.zeros((self.dim_out.total,) * 2, dtype=complex)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out

    def scaled(self, weight: float) -> "CPMap":
        if weight < 0:
            raise ValueError("CP maps can only be scaled by nonnegative weights")
        s = np.sqrt(weight)
        return CPMap(self.dim_in, self.dim_out, tuple(s * k for k in self.kraus))

    def with_dims(self, dim_in, dim_out) -> "CPMap":
        return CPMap(SystemDims(dim_in), SystemDims(dim_out), self.kraus)

    def __repr__(self) -> str:
        return f"CPMap({tuple(self.dim_in)} -> {tuple(self.dim_out)}, {len(self.kraus)} Kraus)"


def dbl(u, dim_in=None, dim_out=None) -> CPMap:
    """The CP map ``rho -> U rho U^H`` of a linear map ``U``."""
    return CPMap.from_kraus([u], dim_in, dim_out)


def cp_sum(maps: Sequence[CPMap]) -> CPMap:
    if not maps:
        raise ValueError("cannot sum an empty list of maps")
    first = maps[0]
    for f in maps[1:]:
        if f.dim_in.total != first.dim_in.total or f.dim_out.total != first.dim_out.total:
            raise ValueError("cannot sum maps of different types")
    return CPMap(first.dim_in, first.dim_out, tuple(k for f in maps for k in f.kraus))


def compose(f: CPMap, g: CPMap) -> CPMap:
    """Sequential composition ``f . g`` (apply ``g`` first)."""
    if g.dim_out.total != f.dim_in.total:
        raise ValueError(f"cannot compose: {g.dim_out} does not match {f.dim_in}")
    return CPMap(g.dim_in, f.dim_out, tuple(kf @ kg for kf in f.kraus for kg in g.kraus))


def tensor(f: CPMap, g: CPMap) -> CPMap:
    return CPMap(f.dim_in + g.dim_in, f.dim_out + g.dim_out,
                 tuple(np.kron(kf, kg) for kf in f.kraus for kg in g.kraus))


def tensor_all(maps: Sequence[CPMap]) -> CPMap:
    out = CPMap.identity(())
    for f in maps:
        out = tensor(out, f)
    return out


def discard(dims) -> CPMap:
    """The trace effect on ``dims``, as a map to the trivial system."""
    dims = SystemDims(dims)
    d = dims.total
    return CPMap(dims, SystemDims(()), tuple(basis_vector(b, d).T for b in range(d)))


def classical_identity(n: int) -> CPMap:
    """Identity on a classical system of size ``n`` (dephasing in the embedding)."""
    return CPMap(SystemDims(n), SystemDims(n), tuple(basis_vector(x, n) @ basis_vector(x, n).T
                                                     for x in range(n)))


def channel_distance(f: CPMap, g: CPMap) -> float:
    """Max-abs entry of the Choi difference."""
    if f.dim_in.total != g.dim_in.total or f.dim_out.total != g.dim_out.total:
        raise ValueError(f"maps have different types: {f} vs {g}")
    return max_abs(f.choi - g.choi)


def channels_equal(f: CPMap, g: CPMap, tol: float = CHANNEL_TOL) -> bool:
    return channel_distance(f, g) <= tol


def trace_defect(f: CPMap) -> np.ndarray:
    """``sum_j K_j^H K_j - 1``; zero exactly for trace-preserving maps."""
    s = sum((k.conj().T @ k for k in f.kraus), np.zeros((f.dim_in.total,) * 2, dtype=complex))
    return s - np.eye(f.dim_in.total)


def is_normalised(f: CPMap, tol: float = CHANNEL_TOL) -> bool:
    return max_abs(trace_defect(f)) <= tol


def is_pure(f: CPMap, tol: float = RANK_TOL) -> bool:
    return numerical_rank(f.choi, tol) == 1


def partial_trace_output(f: CPMap, traced: Iterable[int]) -> CPMap:
    """Discard some output factors of ``f``."""
    traced = sorted(set(traced))
    keep = [d for i, d in enumerate(f.dim_out) if i not in traced]
    effect = tensor_all([discard(d) if i in traced else CPMap.identity(d)
                         for i, d in enumerate(f.dim_out)])
    return compose(effect, f).with_dims(f.dim_in, keep)


@dataclass(frozen=True, eq=False)
class Purification:
    """A single linear map ``V: A -> B (x) E`` with ``Tr_E dbl(V) == source``.

    The environment is the last output factor.
    """

    source: CPMap
    env_dim: int
    isometry: np.ndarray

    def __post_init__(self):
        v = as_matrix(self.isometry)
        expected = (self.source.dim_out.total * self.env_dim, self.source.dim_in.total)
        if v.shape != expected:
            raise ValueError(f"purifying map has shape {v.shape}, expected {expected}")
        object.__setattr__(self, "isometry", v)

    def environment_kraus(self) -> list[np.ndarray]:
        d_out, d_in = self.source.dim_out.total, self.source.dim_in.total
        t = self.isometry.reshape(d_out, self.env_dim, d_in)
        return [t[:, e, :] for e in range(self.env_dim)]

    def traced(self) -> CPMap:
        return CPMap(self.source.dim_in, self.source.dim_out, tuple(self.environment_kraus()))

    def as_cpmap(self) -> CPMap:
        return CPMap(self.source.dim_in, self.source.dim_out + (self.env_dim,), (self.isometry,))

    def padded(self, env_dim: int) -> "Purification":
        """Embed the environment into a larger one (extra basis states unused)."""
        if env_dim < self.env_dim:
            raise ValueError("cannot shrink an environment by padding")
        kraus = self.environment_kraus()
        kraus += [np.zeros_like(kraus[0])] * (env_dim - self.env_dim)
        return Purification(self.source, env_dim, _stack_environment(kraus))

    def rotated(self, u) -> "Purification":
        """Apply a unitary on the environment: ``(1 (x) U) V``."""
        u = as_matrix(u)
        if u.shape != (self.env_dim, self.env_dim):
            raise ValueError(f"environment unitary must be {self.env_dim}x{self.env_dim}")
        v = np.kron(np.eye(self.source.dim_out.total), u) @ self.isometry
        return Purification(self.source, self.env_dim, v)


def _stack_environment(kraus: Sequence[np.ndarray]) -> np.ndarray:
    env = len(kraus)
    return sum(np.kron(k, basis_vector(j, env)) for j, k in enumerate(kraus))


def purify(f: CPMap) -> Purification:
    """Canonical purification ``V = sum_j K_j (x) |j>`` from the canonical Kraus set.

    The zero map gets a one-dimensional environment and ``V = 0``.
    """
    if not f.kraus:
        raise ValueError("cannot purify a map with an empty Kraus list")
    kraus = f.canonical_kraus()
    if not kraus:
        kraus = [np.zeros((f.dim_out.total, f.dim_in.total), dtype=complex)]
    return Purification(f, len(kraus), _stack_environment(kraus))


def environment_isometry(p1: Purification, p2: Purification) -> tuple[np.ndarray, float]:
    """Least-squares ``W`` with ``V2 = (1 (x) W) V1``, and the max-abs residual."""
    d_out, d_in = p1.source.dim_out.total, p1.source.dim_in.total
    m1 = p1.isometry.reshape(d_out, p1.env_dim, d_in).transpose(1, 0, 2).reshape(p1.env_dim, -1)
    m2 = p2.isometry.reshape(d_out, p2.env_dim, d_in).transpose(1, 0, 2).reshape(p2.env_dim, -1)
    w = np.linalg.lstsq(m1.T, m2.T, rcond=None)[0].T
    return w, max_abs(w @ m1 - m2)


@dataclass(frozen=True, eq=False)
class SPOPair:
    """Sharp preparation-observation pair between a classical set and ``C^quantum_dim``."""

    classical: ClassicalSet
    quantum_dim: int
    prepare: Mapping[str, np.ndarray]
    measure: Mapping[str, np.ndarray]

    def __post_init__(self):
        prep = {x: as_matrix(self.prepare[x]).reshape(self.quantum_dim, 1) for x in self.classical}
        meas = {x: as_matrix(self.measure[x]).reshape(1, self.quantum_dim) for x in self.classical}
        for x in self.classical:
            for y in self.classical:
                val = (meas[x] @ prep[y])[0, 0]
                if abs(val - (1.0 if x == y else 0.0)) > 1e-10:
                    raise ValueError(f"not a sharp pair: measure({x}) . prepare({y}) = {val}")
        object.__setattr__(self, "prepare", prep)
        object.__setattr__(self, "measure", meas)

    def prepare_map(self) -> CPMap:
        n = self.classical.size
        kraus = [self.prepare[x] @ basis_vector(k, n).T for k, x in enumerate(self.classical)]
        return CPMap(SystemDims(n), SystemDims(self.quantum_dim), tuple(kraus))

    def measure_map(self) -> CPMap:
        n = self.classical.size
        kraus = [basis_vector(k, n) @ self.measure[x] for k, x in enumerate(self.classical)]
        return CPMap(SystemDims(self.quantum_dim), SystemDims(n), tuple(kraus))


def canonical_spo(x: ClassicalSet) -> SPOPair:
    n = x.size
    return SPOPair(x, n, {lab: basis_vector(k, n) for k, lab in enumerate(x)},
                   {lab: basis_vector(k, n).T for k, lab in enumerate(x)})


def check_no_signalling(f: CPMap, classical_dim: int = 1, tol: float = CHANNEL_TOL) -> bool:
    """Discarding the quantum output leaves classical identity (x) discard.

    The first input and output factors of ``f`` are taken to be a classical
    system of size ``classical_dim``; classical inputs are dephased first.
    With ``classical_dim == 1`` this is just ``discard . f == discard``.
    """
    if not is_normalised(f, tol):
        raise ValueError("no-signalling check requires a normalised map")
    n = classical_dim
    a_total, b_total = f.dim_in.total // n, f.dim_out.total // n
    if a_total * n != f.dim_in.total or b_total * n != f.dim_out.total:
        raise ValueError(f"classical dimension {n} does not divide the map's dimensions")
    lhs = compose(tensor(classical_identity(n), discard(b_total)),
                  compose(f, tensor(classical_identity(n), CPMap.identity(a_total))))
    rhs = tensor(classical_identity(n), discard(a_total))
    return channel_distance(lhs, rhs) <= tol


@dataclass(frozen=True, eq=False)
class QuantumInstrument:
    """Family of CP maps ``F(o|i)`` stored densely over ``I x O``; missing branches are zero."""

    input_set: ClassicalSet
    output_set: ClassicalSet
    dim_in: SystemDims
    dim_out: SystemDims
    branches: Mapping[tuple[str, str], CPMap] = field(default_factory=dict)
    normalised: bool = False

    def __post_init__(self):
        din, dout = SystemDims(self.dim_in), SystemDims(self.dim_out)
        object.__setattr__(self, "dim_in", din)
        object.__setattr__(self, "dim_out", dout)
        given = dict(self.branches)
        for (i, o) in given:
            if i not in self.input_set.labels or o not in self.output_set.labels:
                raise ValueError(f"branch ({i!r}, {o!r}) is outside the instrument's classical sets")
        dense = {}
        for i in self.input_set:
            for o in self.output_set:
                f = given.get((i, o))
                if f is None:
                    f = CPMap.zero(din, dout)
                elif f.dim_in.total != din.total or f.dim_out.total != dout.total:
                    raise ValueError(f"branch ({i}, {o}) has type {f}, expected {din} -> {dout}")
                else:
                    f = f.with_dims(din, dout)
                dense[(i, o)] = f
        object.__setattr__(self, "branches", dense)
        if self.normalised and not self.is_normalised():
            raise ValueError("instrument flagged normalised but sum over outcomes is not trace-preserving")

    @classmethod
    def from_channel(cls, f: CPMap, normalised: bool = False) -> "QuantumInstrument":
        one = ClassicalSet.singleton()
        return cls(one, one, f.dim_in, f.dim_out, {("0", "0"): f}, normalised)

    def branch(self, i: str, o: str) -> CPMap:
        return self.branches[(i, o)]

    def channel(self, i: str) -> CPMap:
        return cp_sum([self.branches[(i, o)] for o in self.output_set])

    def is_normalised(self, tol: float = CHANNEL_TOL) -> bool:
        return all(is_normalised(self.channel(i), tol) for i in self.input_set)

    def max_trace_defect(self) -> float:
        return max(max_abs(trace_defect(self.channel(i))) for i in self.input_set)

    def to_cpmap(self) -> CPMap:
        """Embed as a single map ``I (x) A -> O (x) B`` with dephased classical factors."""
        ni, no = self.input_set.size, self.output_set.size
        kraus = []
        for a, i in enumerate(self.input_set):
            for b, o in enumerate(self.output_set):
                flip = basis_vector(b, no) @ basis_vector(a, ni).T
                kraus.extend(np.kron(flip, k) for k in self.branches[(i, o)].kraus)
        return CPMap(SystemDims(ni) + self.dim_in, SystemDims(no) + self.dim_out, tuple(kraus))

    def __repr__(self) -> str:
        return (f"QuantumInstrument({self.input_set.labels} -> {self.output_set.labels}, "
                f"{tuple(self.dim_in)} -> {tuple(self.dim_out)})")


__all__ = [
    "CHANNEL_TOL",
    "CPMap",
    "ClassicalSet",
    "Purification",
    "QuantumInstrument",
    "SPOPair",
    "canonical_spo",
    "channel_distance",
    "channels_equal",
    "check_no_signalling",
    "classical_identity",
    "compose",
    "cp_sum",
    "dbl",
    "discard",
    "environment_isometry",
    "is_normalised",
    "is_pure",
    "partial_trace_output",
    "purify",
    "tensor",
    "tensor_all",
    "trace_defect",
]
