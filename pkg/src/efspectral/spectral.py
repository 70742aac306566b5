"""Leading eigenvectors by absolute eigenvalue and spectral embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator, eigsh

from .graph import Graph
from .privacy import PrivacyBudget, downshift

DENSE_LIMIT = 2048
SYMMETRY_TOL = 1e-10
ZERO_ROW_TOL = 1e-12
LANCZOS_EXTRA = 2
LANCZOS_MIN_NCV = 40
LANCZOS_TOL = 1e-8
LANCZOS_MAXITER = 300
_ROW_CHUNK = 512


@dataclass(frozen=True, eq=False)
class Embedding:
    """``vectors`` is ``n x k`` with orthonormal columns; ``values`` sorted by descending ``|lambda|``."""

    vectors: np.ndarray
    values: np.ndarray

    @property
    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    @property
    def zero_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_norms < ZERO_ROW_TOL)

    @property
    def positive_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_norms >= ZERO_ROW_TOL)


class AdjacencyOperator(LinearOperator):
    """Matrix-free ``A - s (1 1^T - I)`` for a packed graph.

    Rows are kept bit-packed and expanded a chunk at a time, so the dense
    shifted matrix is never formed.
    """

    def __init__(self, graph: Graph, shift: float = 0.0):
        dense = graph.to_dense(np.uint8)
        self._rows = np.packbits(dense, axis=1)
        del dense
        self._n = graph.n
        self._shift = float(shift)
        super().__init__(dtype=np.float64, shape=(graph.n, graph.n))

    def _matvec(self, v):
        v = np.asarray(v, dtype=np.float64).ravel()
        out = np.empty(self._n)
        for r0 in range(0, self._n, _ROW_CHUNK):
            block = np.unpackbits(self._rows[r0 : r0 + _ROW_CHUNK], axis=1, count=self._n)
            out[r0 : r0 + block.shape[0]] = block @ v
        if self._shift:
            out -= self._shift * v.sum()
            out += self._shift * v
        return out

    def _rmatvec(self, v):
        return self._matvec(v)


def _check_symmetric(matrix: np.ndarray) -> np.ndarray:
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric")
    return a


def _select(values: np.ndarray, vectors: np.ndarray, k: int) -> Embedding:
    """Top ``k`` by ``|lambda|``; ties go to the positive value, then the lower column."""
    mags = np.abs(values)
    scale = max(1.0, float(mags.max())) if mags.size else 1.0
    quantized = np.round(mags / scale, 12)
    order = np.lexsort((np.arange(values.size), values < 0, -quantized))[:k]
    vals = values[order]
    vecs = vectors[:, order].copy()
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(k)])
    signs[signs == 0] = 1.0
    return Embedding(vecs * signs, vals)


def _lanczos(op: LinearOperator, k: int) -> Embedding:
    n = op.shape[0]
    # a couple of spare Ritz pairs so ties at the k-th magnitude are seen
    nev = min(k + LANCZOS_EXTRA, n - 1)
    ncv = min(n, max(2 * nev + 1, LANCZOS_MIN_NCV))
    v0 = np.random.default_rng(0).standard_normal(n)
    vals, vecs = eigsh(op, k=nev, which="LM", ncv=ncv, tol=LANCZOS_TOL, maxiter=LANCZOS_MAXITER, v0=v0)
    return _select(vals, vecs, k)


def leading_eigvecs(matrix, k: int, method: str = "auto") -> Embedding:
    """``k`` eigenpairs of a symmetric matrix with the largest ``|lambda|``.

    ``method`` is ``"dense"`` (full decomposition), ``"lanczos"`` or
    ``"auto"`` (dense up to ``n = 2048``). A ``LinearOperator`` input always
    uses Lanczos. Each vector is signed so its largest-magnitude entry is
    positive.
    """
    if isinstance(matrix, LinearOperator):
        n = matrix.shape[0]
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}]")
        return _lanczos(matrix, k)
    a = _check_symmetric(matrix)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT or k + LANCZOS_EXTRA >= n else "lanczos"
    if method == "dense":
        vals, vecs = np.linalg.eigh(a)
        return _select(vals, vecs, k)
    if method == "lanczos":
        return _lanczos(aslinearoperator(a), k)
    raise ValueError(f"unknown method {method!r}")


def spectral_embed(graph: Graph, k: int, budget: PrivacyBudget, method: str = "auto") -> Embedding:
    """Leading-``k`` embedding of the downshifted adjacency matrix."""
    if method == "auto":
        method = "dense" if graph.n <= DENSE_LIMIT else "lanczos"
    if method == "dense":
        return leading_eigvecs(downshift(graph, budget).values, k, method="dense")
    return leading_eigvecs(AdjacencyOperator(graph, budget.flip_probability), k)


def row_normalize(embedding: Embedding | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normalise the nonzero rows.

    Returns the ``|I+| x k`` normalised matrix and the index map ``f`` with
    ``f[i]`` the original row of output row ``i``.
    """
    vectors = embedding.vectors if isinstance(embedding, Embedding) else np.asarray(embedding, dtype=float)
    norms = np.linalg.norm(vectors, axis=1)
    keep = np.flatnonzero(norms >= ZERO_ROW_TOL)
    return vectors[keep] / norms[keep, None], keep


def procrustes_distance(observed: np.ndarray, expected: np.ndarray) -> tuple[np.ndarray, float]:
    """Orthogonal ``Q`` minimising ``||observed - expected Q||_F`` and that distance."""
    observed = np.asarray(observed, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if observed.shape != expected.shape:
        raise ValueError(f"shape mismatch: {observed.shape} vs {expected.shape}")
    w, _, vt = np.linalg.svd(expected.T @ observed)
    q = w @ vt
    return q, float(np.linalg.norm(observed - expected @ q))
