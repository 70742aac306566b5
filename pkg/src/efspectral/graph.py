"""Undirected binary graphs stored as a packed upper triangle, plus file I/O.

Only the strict upper triangle ``i < j`` is stored, one bit per pair in
row-major order, so symmetry and the empty diagonal hold by construction.
At ``n = 12800`` this is about 10 MB, which matters because edge-flipped
graphs are dense.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

# Upper bound on pairs materialised at once by the blockwise helpers.
_MAX_BLOCK_PAIRS = 1 << 22


class GraphFormatError(ValueError):
    """Raised when an edge-list or label file cannot be parsed."""


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def row_offset(n: int, i: int) -> int:
    """Position of pair ``(i, i + 1)`` in the row-major upper triangle."""
    return i * n - i * (i + 1) // 2


def row_blocks(n: int, max_pairs: int = _MAX_BLOCK_PAIRS) -> Iterator[tuple[int, int]]:
    """Split rows ``0..n-1`` into contiguous blocks of bounded pair count.

    The split depends on ``n`` only, so consumers that draw random numbers
    block by block stay reproducible.
    """
    r0 = 0
    while r0 < n - 1:
        r1 = r0
        count = 0
        while r1 < n - 1 and (count == 0 or count + (n - 1 - r1) <= max_pairs):
            count += n - 1 - r1
            r1 += 1
        yield r0, r1
        r0 = r1


def triu_block_indices(n: int, r0: int, r1: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the upper-triangle pairs in rows ``r0..r1-1``."""
    rows = np.arange(r0, r1, dtype=np.int64)
    lengths = n - 1 - rows
    row_idx = np.repeat(rows, lengths)
    starts = np.cumsum(lengths) - lengths
    within = np.arange(int(lengths.sum()), dtype=np.int64) - np.repeat(starts, lengths)
    return row_idx, row_idx + 1 + within


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric 0/1 adjacency structure with zero diagonal.

    Parameters
    ----------
    n : int
        Number of nodes.
    bits : ndarray of uint8
        ``np.packbits`` of the row-major strict upper triangle.
    """

    n: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        expected = (num_pairs(self.n) + 7) // 8
        if bits.shape != (expected,):
            raise ValueError(f"expected {expected} packed bytes for n={self.n}, got {bits.shape}")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    # construction -------------------------------------------------------

    @classmethod
    def from_upper(cls, n: int, upper: np.ndarray) -> "Graph":
        upper = np.asarray(upper, dtype=bool)
        if upper.shape != (num_pairs(n),):
            raise ValueError(f"upper triangle must have {num_pairs(n)} entries")
        return cls(n, np.packbits(upper))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros((num_pairs(n) + 7) // 8, dtype=np.uint8))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls.from_upper(n, np.ones(num_pairs(n), dtype=bool))

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]] | np.ndarray) -> "Graph":
        """Build from 0-based node pairs; orientation and duplicates are ignored."""
        upper = np.zeros(num_pairs(n), dtype=bool)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            i = e.min(axis=1)
            j = e.max(axis=1)
            upper[i * n - i * (i + 1) // 2 + (j - i - 1)] = True
        return cls.from_upper(n, upper)

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "Graph":
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency matrix must be binary")
        n = a.shape[0]
        return cls.from_upper(n, a[np.triu_indices(n, 1)].astype(bool))

    # access -------------------------------------------------------------

    @property
    def num_pairs(self) -> int:
        return num_pairs(self.n)

    def upper(self) -> np.ndarray:
        """Unpacked strict upper triangle as a boolean vector."""
        return np.unpackbits(self.bits, count=self.num_pairs).astype(bool)

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        i, j = min(i, j), max(i, j)
        if i < 0 or j >= self.n:
            raise IndexError(f"node pair ({i}, {j}) out of range for n={self.n}")
        pos = row_offset(self.n, i) + (j - i - 1)
        return bool((self.bits[pos >> 3] >> (7 - (pos & 7))) & 1)

    @property
    def num_edges(self) -> int:
        return int(np.unpackbits(self.bits, count=self.num_pairs).sum())

    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of 0-based pairs ``i < j`` in row-major order."""
        upper = self.upper()
        out = []
        for r0, r1 in row_blocks(self.n):
            lo, hi = row_offset(self.n, r0), row_offset(self.n, r1)
            sel = upper[lo:hi]
            if sel.any():
                rows, cols = triu_block_indices(self.n, r0, r1)
                out.append(np.column_stack([rows[sel], cols[sel]]))
        if not out:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(out)

    def to_dense(self, dtype=np.uint8) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        upper = self.upper()
        for r0, r1 in row_blocks(self.n):
            lo, hi = row_offset(self.n, r0), row_offset(self.n, r1)
            rows, cols = triu_block_indices(self.n, r0, r1)
            a[rows, cols] = upper[lo:hi]
        a += a.T
        return a

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        e = self.edges()
        np.add.at(deg, e[:, 0], 1)
        np.add.at(deg, e[:, 1], 1)
        return deg

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Block memberships, stored 0-based: ``labels[i]`` is in ``range(k)``."""

    labels: np.ndarray
    k: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if self.k < 1:
            raise ValueError("k must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_sequence(cls, labels: Sequence[int] | np.ndarray, k: int | None = None) -> "LabelVector":
        arr = np.asarray(labels, dtype=np.int64)
        if k is None:
            k = int(arr.max()) + 1 if arr.size else 1
        return cls(arr, k)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelVector):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class CommunityStats:
    block_sizes: tuple[int, ...]
    n_min: int
    n_max: int
    n_max_prime: int
    # True when k == 1 and n_max_prime was set to n_max.
    single_block: bool = False


def community_stats(labels: LabelVector) -> CommunityStats:
    sizes = labels.block_sizes()
    ordered = np.sort(sizes)[::-1]
    single = labels.k == 1
    return CommunityStats(
        block_sizes=tuple(int(s) for s in sizes),
        n_min=int(ordered[-1]),
        n_max=int(ordered[0]),
        n_max_prime=int(ordered[0] if single else ordered[1]),
        single_block=single,
    )


def block_densities(graph: Graph, labels: LabelVector) -> np.ndarray:
    """Empirical edge density for every pair of blocks (``k x k``)."""
    if labels.n != graph.n:
        raise ValueError("label vector length does not match graph")
    k = labels.k
    counts = np.zeros((k, k), dtype=np.float64)
    e = graph.edges()
    if len(e):
        a = labels.labels[e[:, 0]]
        b = labels.labels[e[:, 1]]
        np.add.at(counts, (a, b), 1)
        np.add.at(counts, (b, a), 1)
        counts[np.diag_indices(k)] /= 2
    sizes = labels.block_sizes().astype(np.float64)
    pairs = np.outer(sizes, sizes)
    pairs[np.diag_indices(k)] = sizes * (sizes - 1) / 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(pairs > 0, counts / np.where(pairs > 0, pairs, 1), np.nan)


# --------------------------------------------------------------------------
# file formats

_BASE_RE = re.compile(r"^#\s*base\s*[:=]\s*([01])\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class EdgeListReport:
    """Counts of lines the loader absorbed instead of failing on."""

    edges_read: int
    self_loops: int
    duplicates: int
    reciprocal: int = 0


def _data_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def _collect(pairs: list[tuple[int, int, int]], n: int, symmetrize: bool) -> tuple[Graph, EdgeListReport]:
    if not pairs:
        raise GraphFormatError("edge list contains no edges")
    self_loops = 0
    seen_directed: set[tuple[int, int]] = set()
    seen: set[tuple[int, int]] = set()
    duplicates = reciprocal = 0
    for _, i, j in pairs:
        if i == j:
            self_loops += 1
            continue
        key = (min(i, j), max(i, j))
        if symmetrize:
            if (i, j) in seen_directed:
                duplicates += 1
                continue
            seen_directed.add((i, j))
            if key in seen:
                reciprocal += 1
                continue
        elif key in seen:
            duplicates += 1
            continue
        seen.add(key)
    graph = Graph.from_edges(n, sorted(seen)) if seen else Graph.empty(n)
    report = EdgeListReport(len(pairs), self_loops, duplicates, reciprocal)
    return graph, report


def load_edge_list(
    text: str, n: int, symmetrize: bool = False, base: int | None = None
) -> tuple[Graph, EdgeListReport]:
    """Parse a whitespace-separated integer edge list.

    Node ids are 1-based unless ``base=0`` is passed or the file carries a
    ``# base: 0`` comment. Without ``symmetrize`` each line is an unordered
    pair and a repeated pair in either orientation counts as a duplicate.
    With ``symmetrize`` lines are directed arcs and ``Y_ij = max(Y_ij, Y_ji)``;
    the second arc of a reciprocated pair is counted in ``reciprocal``.
    Self-loops are dropped and counted.
    """
    if n < 1:
        raise GraphFormatError("n must be positive")
    if base is None:
        base = 1
        for raw in text.splitlines():
            m = _BASE_RE.match(raw.strip())
            if m:
                base = int(m.group(1))
                break
    pairs = []
    for lineno, tokens in _data_lines(text):
        if len(tokens) < 2:
            raise GraphFormatError(f"line {lineno}: expected two node ids, got {len(tokens)}")
        try:
            a, b = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: node ids must be integers") from None
        for v in (a, b):
            if not base <= v < n + base:
                raise GraphFormatError(
                    f"line {lineno}: node id {v} outside [{base}, {n + base - 1}]"
                )
        pairs.append((lineno, a - base, b - base))
    return _collect(pairs, n, symmetrize)


def load_named_edge_list(
    text: str, symmetrize: bool = False
) -> tuple[Graph, EdgeListReport, dict[str, int]]:
    """Parse an edge list whose vertices are arbitrary string tokens.

    Vertices receive dense 0-based ids in first-appearance order; the id map
    is returned so it can be written next to the results.
    """
    ids: dict[str, int] = {}
    pairs = []
    for lineno, tokens in _data_lines(text):
        if len(tokens) < 2:
            raise GraphFormatError(f"line {lineno}: expected two vertex names")
        a = ids.setdefault(tokens[0], len(ids))
        b = ids.setdefault(tokens[1], len(ids))
        pairs.append((lineno, a, b))
    if not pairs:
        raise GraphFormatError("edge list contains no edges")
    graph, report = _collect(pairs, len(ids), symmetrize)
    return graph, report, ids


def format_id_map(ids: dict[str, int]) -> str:
    return "".join(f"{idx}\t{name}\n" for name, idx in sorted(ids.items(), key=lambda kv: kv[1]))


def format_edge_list(graph: Graph, base: int = 1) -> str:
    lines = [f"# n: {graph.n}", f"# base: {base}"]
    lines.extend(f"{i + base} {j + base}" for i, j in graph.edges())
    return "\n".join(lines) + "\n"


def load_labels(text: str, n: int) -> tuple[LabelVector, list[str]]:
    """One label token per line; tokens become blocks in first-appearance order.

    Returns the label vector and the token for each block index.
    """
    tokens = [line.strip() for line in text.splitlines() if line.strip() and not line.strip().startswith("#")]
    if len(tokens) != n:
        raise GraphFormatError(f"expected {n} labels, found {len(tokens)}")
    names: dict[str, int] = {}
    labels = [names.setdefault(t, len(names)) for t in tokens]
    return LabelVector(np.asarray(labels, dtype=np.int64), max(len(names), 1)), list(names)
