"""Dense complex-matrix algebra with tensor-factor bookkeeping.

Matrices are plain 2-D ``numpy`` arrays of dtype ``complex128``. Factor 0 is
always the leftmost (outermost) Kronecker factor.

Choi convention: for a map with Kraus operators ``K_j`` of shape
``(d_out, d_in)`` the Choi matrix is ``sum_j vec(K_j) vec(K_j)^H`` where
``vec`` flattens row-major. Equivalently ``C = sum_ij f(|i><j|) (x) |i><j|``,
i.e. the output factor comes first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

RANK_TOL = 1e-10
PSD_TOL = 1e-9
HERMITIAN_TOL = 1e-9


class SystemDims(tuple):
    """Ordered tensor factors of a composite system.

    An empty factor list is the trivial system, with ``total == 1``.
    """

    def __new__(cls, factors: int | Iterable[int] = ()):
        if isinstance(factors, (int, np.integer)):
            factors = (factors,)
        factors = tuple(int(d) for d in factors)
        if any(d < 1 for d in factors):
            raise ValueError(f"dimensions must be positive, got {factors}")
        return super().__new__(cls, factors)

    @property
    def factors(self) -> tuple[int, ...]:
        return tuple(self)

    @property
    def total(self) -> int:
        return math.prod(self)

    def __add__(self, other):
        return SystemDims(tuple(self) + tuple(other))

    def __repr__(self) -> str:
        return f"SystemDims({tuple(self)!r})"


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns orthonormal

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    a = np.array(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def basis_vector(k: int, dim: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=complex)
    v[k, 0] = 1.0
    return v


def _check_perm(perm: Sequence[int], n: int, which: str) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if len(perm) != n:
        raise ValueError(f"{which} permutation has length {len(perm)}, expected {n}")
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{which} permutation {perm} is not a permutation of 0..{n - 1}")
    return perm


def permute_factors(m, dims_in, dims_out, perm_in: Sequence[int], perm_out: Sequence[int]) -> np.ndarray:
    """Reindex the tensor factors of a linear map.

    ``perm_out[k]`` is the old output factor that ends up at position ``k``
    (numpy ``transpose`` semantics); likewise for ``perm_in``.
    """
    m = as_matrix(m)
    dims_in, dims_out = SystemDims(dims_in), SystemDims(dims_out)
    if m.shape != (dims_out.total, dims_in.total):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims_out} <- {dims_in}")
    perm_in = _check_perm(perm_in, len(dims_in), "input")
    perm_out = _check_perm(perm_out, len(dims_out), "output")
    n_out = len(dims_out)
    t = m.reshape(tuple(dims_out) + tuple(dims_in))
    axes = list(perm_out) + [n_out + p for p in perm_in]
    t = t.transpose(axes)
    return t.reshape(dims_out.total, dims_in.total)


def partial_trace(m, dims, traced: Iterable[int]) -> np.ndarray:
    """Trace out the factors listed in ``traced``; tracing everything gives a 1x1 matrix."""
    m = as_matrix(m)
    dims = SystemDims(dims)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"partial trace needs a square matrix, got {m.shape}")
    if m.shape[0] != dims.total:
        raise ValueError(f"matrix side {m.shape[0]} does not match dims {dims}")
    traced = sorted(set(int(i) for i in traced))
    n = len(dims)
    for i in traced:
        if not 0 <= i < n:
            raise ValueError(f"invalid factor index {i} for {n} factors")
    keep = [i for i in range(n) if i not in traced]
    t = m.reshape(tuple(dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ValueError("too many tensor factors")
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in traced:
        cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    r = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    side = math.prod(dims[i] for i in keep)
    return r.reshape(side, side)


def hermitian_spectrum(m) -> HermitianSpectrum:
    m = as_matrix(m)
    if max_abs(m - m.conj().T) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return HermitianSpectrum(vals[::-1].copy(), vecs[:, ::-1].copy())


def canonical_phase(v: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Multiply ``v`` by a unit phase making its first significant entry real positive."""
    flat = v.reshape(-1)
    scale = max(max_abs(flat), 1.0)
    for x in flat:
        if abs(x) > tol * scale:
            return v * (abs(x) / x)
    return v


def _lex_key(v: np.ndarray) -> tuple:
    flat = v.reshape(-1)
    return tuple(np.round(flat.real, 12)) + tuple(np.round(flat.imag, 12))


def choi_to_kraus(choi, dim_in: int, dim_out: int, rank_tol: float = RANK_TOL) -> list[np.ndarray]:
    """Canonical Kraus operators from an eigendecomposition of the Choi matrix.

    Ordered by descending eigenvalue; within a degenerate cluster, by descending
    lexicographic order of (real parts, imaginary parts) of the phase-fixed
    eigenvector.
    """
    choi = as_matrix(choi)
    n = dim_in * dim_out
    if choi.shape != (n, n):
        raise ValueError(f"Choi shape {choi.shape} does not match {dim_out}x{dim_in} map")
    spec = hermitian_spectrum(choi)
    if spec.eigenvalues.size and spec.eigenvalues[-1] < -PSD_TOL:
        raise ValueError(
            f"Choi matrix has eigenvalue {spec.eigenvalues[-1]:.3g}: map is not completely positive"
        )
    pairs = []
    for lam, k in zip(spec.eigenvalues, range(spec.eigenvectors.shape[1])):
        if lam > rank_tol:
            pairs.append((float(lam), canonical_phase(spec.eigenvectors[:, k])))

    # group near-equal eigenvalues, then order each group lexicographically
    ordered: list[tuple[float, np.ndarray]] = []
    i = 0
    while i < len(pairs):
        j = i + 1
        while j < len(pairs) and pairs[i][0] - pairs[j][0] <= 1e-9 * max(1.0, pairs[i][0]):
            j += 1
        group = sorted(pairs[i:j], key=lambda p: _lex_key(p[1]), reverse=True)
        ordered.extend(group)
        i = j
    return [np.sqrt(lam) * v.reshape(dim_out, dim_in) for lam, v in ordered]


def kraus_to_choi(kraus: Sequence) -> np.ndarray:
    kraus = [as_matrix(k) for k in kraus]
    if not kraus:
        raise ValueError("empty Kraus list")
    shape = kraus[0].shape
    for k in kraus:
        if k.shape != shape:
            raise ValueError(f"Kraus operators have mismatched shapes {shape} and {k.shape}")
    vecs = np.stack([k.reshape(-1) for k in kraus], axis=1)
    return vecs @ vecs.conj().T


def numerical_rank(choi, rank_tol: float = RANK_TOL) -> int:
    spec = hermitian_spectrum(choi)
    return int(np.sum(spec.eigenvalues > rank_tol))


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in m.real.reshape(-1)],
        "im": [float(x) for x in m.imag.reshape(-1)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = obj["re"]
        im = obj.get("im", [0.0] * len(re))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from None
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    if len(re) != rows * cols or len(im) != rows * cols:
        raise ValueError(f"matrix entry count does not match {rows}x{cols}")
    m = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m.reshape(rows, cols)
