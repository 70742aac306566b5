"""k-means / k-medians solvers and the edge-flip spectral clustering pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Graph, LabelVector
from .models import as_generator
from .privacy import PrivacyBudget
from .spectral import Embedding, row_normalize, spectral_embed

WEISZFELD_TOL = 1e-9
WEISZFELD_MAXITER = 200
COLLISION_TOL = 1e-12
BRUTE_FORCE_MAX_POINTS = 12


@dataclass(frozen=True)
class ClusterConfig:
    """Solver settings. ``gamma`` is the declared approximation budget and is
    only reported, never enforced."""

    k: int
    restarts: int = 20
    max_iterations: int = 300
    tolerance: float = 1e-9
    gamma: float = 0.05

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: LabelVector
    centroids: np.ndarray
    objective: float
    # objective after each assignment step of the winning restart
    history: tuple[float, ...] = field(default=(), repr=False)


# --------------------------------------------------------------------------
# shared pieces


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (points**2).sum(1)[:, None] - 2 * points @ centroids.T + (centroids**2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.sqrt(((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1))


def _seed(points: np.ndarray, k: int, rng: np.random.Generator, power: int) -> np.ndarray:
    """k-means++ style seeding; ``power=2`` for k-means, ``1`` for k-medians."""
    m = points.shape[0]
    chosen = [int(rng.integers(m))]
    closest = ((points - points[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        weights = closest ** (power / 2)
        total = weights.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
            idx = min(idx, m - 1)
        else:
            idx = int(rng.integers(m))
        chosen.append(idx)
        closest = np.minimum(closest, ((points - points[idx]) ** 2).sum(1))
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, dist_to_own: np.ndarray) -> bool:
    """Reseed empty clusters at the point farthest from its own centroid."""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return False
    dist_to_own = dist_to_own.copy()
    for j in empty:
        far = int(np.argmax(dist_to_own))
        centroids[j] = points[far]
        labels[far] = j
        dist_to_own[far] = -np.inf
    return True


def _check_points(points, k: int) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be a 2-d array")
    if x.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {x.shape[0]}")
    return x


def _converged(prev: float, cur: float, tol: float) -> bool:
    return cur == 0.0 or abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny)


def _best(results: list[ClusterResult]) -> ClusterResult:
    # ties resolved by restart index, independent of scheduling
    return min(enumerate(results), key=lambda t: (t[1].objective, t[0]))[1]


def _restart_generators(rng: np.random.Generator, restarts: int) -> list[np.random.Generator]:
    seeds = rng.integers(0, 2**63 - 1, size=restarts)
    return [np.random.default_rng(int(s)) for s in seeds]


# --------------------------------------------------------------------------
# k-means


def _lloyd(points: np.ndarray, config: ClusterConfig, rng: np.random.Generator) -> ClusterResult:
    k = config.k
    centroids = _seed(points, k, rng, power=2)
    history: list[float] = []
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(config.max_iterations):
        d = _sq_dists(points, centroids)
        labels = np.argmin(d, axis=1)
        own = d[np.arange(points.shape[0]), labels]
        if _repair_empty(points, labels, centroids, own):
            d = _sq_dists(points, centroids)
            labels = np.argmin(d, axis=1)
            own = d[np.arange(points.shape[0]), labels]
        obj = float(own.sum())
        history.append(obj)
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = points[members].mean(axis=0)
        if len(history) > 1 and _converged(history[-2], obj, config.tolerance):
            break
    objective = float(((points - centroids[labels]) ** 2).sum())
    return ClusterResult(LabelVector(labels, k), centroids, objective, tuple(history))


def kmeans(points, config: ClusterConfig, rng=None) -> ClusterResult:
    """Best of ``config.restarts`` k-means++ seeded Lloyd runs (squared-error objective)."""
    x = _check_points(points, config.k)
    rng = as_generator(rng)
    return _best([_lloyd(x, config, g) for g in _restart_generators(rng, config.restarts)])


# --------------------------------------------------------------------------
# k-medians


def weiszfeld(points: np.ndarray, weights: np.ndarray, init: np.ndarray,
              tol: float = WEISZFELD_TOL, max_iter: int = WEISZFELD_MAXITER) -> np.ndarray:
    """Batched geometric medians.

    Row ``b`` of the result minimises ``sum_i weights[b, i] * ||y - points[i]||``.
    Uses the Vardi-Zhang modification when an iterate lands on a data point.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    y = np.atleast_2d(np.asarray(init, dtype=np.float64)).copy()
    active = np.ones(y.shape[0], dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        yb, wb = y[idx], w[idx]
        d = np.sqrt(((yb[:, None, :] - points[None, :, :]) ** 2).sum(-1))
        at = d < COLLISION_TOL
        inv = np.where(at, 0.0, wb / np.where(at, 1.0, d))
        denom = inv.sum(1)
        num = inv @ points
        eta = (wb * at).sum(1)
        new = yb.copy()
        free = denom > 0
        t = np.zeros_like(yb)
        t[free] = num[free] / denom[free, None]
        r = np.linalg.norm(num - denom[:, None] * yb, axis=1)
        plain = free & (eta == 0)
        new[plain] = t[plain]
        stuck = free & (eta > 0)
        if stuck.any():
            g = np.where(r[stuck] > 0, np.minimum(1.0, eta[stuck] / np.where(r[stuck] > 0, r[stuck], 1.0)), 1.0)
            new[stuck] = (1 - g)[:, None] * t[stuck] + g[:, None] * yb[stuck]
        step = np.linalg.norm(new - yb, axis=1)
        y[idx] = new
        active[idx[step < tol]] = False
    return y


def geometric_median(points, init=None) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    start = x.mean(axis=0) if init is None else init
    return weiszfeld(x, np.ones((1, x.shape[0])), start)[0]


def _alternate_medians(points: np.ndarray, config: ClusterConfig, rng: np.random.Generator) -> ClusterResult:
    k = config.k
    m = points.shape[0]
    centroids = _seed(points, k, rng, power=1)
    history: list[float] = []
    labels = np.zeros(m, dtype=np.int64)
    for _ in range(config.max_iterations):
        d = _dists(points, centroids)
        labels = np.argmin(d, axis=1)
        own = d[np.arange(m), labels]
        if _repair_empty(points, labels, centroids, own):
            d = _dists(points, centroids)
            labels = np.argmin(d, axis=1)
            own = d[np.arange(m), labels]
        obj = float(own.sum())
        history.append(obj)
        membership = (labels[None, :] == np.arange(k)[:, None]).astype(np.float64)
        centroids = weiszfeld(points, membership, centroids)
        if len(history) > 1 and _converged(history[-2], obj, config.tolerance):
            break
    d = _dists(points, centroids)
    objective = float(d[np.arange(m), labels].sum())
    return ClusterResult(LabelVector(labels, k), centroids, objective, tuple(history))


def kmedians(points, config: ClusterConfig, rng=None) -> ClusterResult:
    """Best-of-restarts alternating k-medians; objective is the (2,1) norm."""
    x = _check_points(points, config.k)
    rng = as_generator(rng)
    return _best([_alternate_medians(x, config, g) for g in _restart_generators(rng, config.restarts)])


# --------------------------------------------------------------------------
# brute force oracle


def set_partitions(m: int, k: int) -> np.ndarray:
    """All restricted-growth strings of length ``m`` using at most ``k`` labels."""
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, m):
        new_rows, new_top = [], []
        for v in range(k):
            ok = v <= top + 1
            if ok.any():
                new_rows.append(np.column_stack([rows[ok], np.full(ok.sum(), v, dtype=np.int8)]))
                new_top.append(np.maximum(top[ok], v))
        rows = np.concatenate(new_rows)
        top = np.concatenate(new_top).astype(np.int8)
    return rows


def brute_force_cluster(points, k: int, objective: str = "kmeans") -> ClusterResult:
    """Exact optimum by enumerating every partition into at most ``k`` parts.

    Costs are tabulated once per subset (``2^m`` of them), then each
    partition is scored by lookup. Unused labels get NaN centroids.
    """
    x = np.asarray(points, dtype=np.float64)
    m = x.shape[0]
    if m > BRUTE_FORCE_MAX_POINTS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_POINTS} points, got {m}")
    if objective not in {"kmeans", "kmedians"}:
        raise ValueError(f"unknown objective {objective!r}")
    masks = np.arange(1, 2**m)
    member = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(np.float64)
    sizes = member.sum(1)
    if objective == "kmeans":
        sums = member @ x
        cost = member @ (x**2).sum(1) - (sums**2).sum(1) / sizes
        centers = sums / sizes[:, None]
    else:
        centers = weiszfeld(x, member, (member @ x) / sizes[:, None])
        cost = (member * np.sqrt(((centers[:, None, :] - x[None, :, :]) ** 2).sum(-1))).sum(1)
    cost = np.concatenate([[0.0], np.maximum(cost, 0.0)])
    centers = np.vstack([np.full(x.shape[1], np.nan), centers])

    parts = set_partitions(m, k).astype(np.int64)
    weights = 1 << np.arange(m)
    part_masks = np.stack([((parts == j) * weights).sum(1) for j in range(k)], axis=1)
    totals = cost[part_masks].sum(1)
    best = int(np.argmin(totals))
    labels = parts[best]
    return ClusterResult(LabelVector(labels, k), centers[part_masks[best]], float(totals[best]))


# --------------------------------------------------------------------------
# end-to-end pipelines


def _config_for(k: int, gamma: float, config: ClusterConfig | None) -> ClusterConfig:
    if config is None:
        return ClusterConfig(k=k, gamma=gamma)
    return replace(config, k=k, gamma=gamma)


def ef_spectral_kmeans(graph: Graph, k: int, gamma: float, budget: PrivacyBudget,
                       config: ClusterConfig | None = None, rng=None) -> LabelVector:
    """Downshift, embed into the leading ``k`` eigenvectors, then k-means the rows."""
    embedding = spectral_embed(graph, k, budget)
    return kmeans(embedding.vectors, _config_for(k, gamma, config), rng).labels


def normalized_kmedians_labels(embedding: Embedding, config: ClusterConfig, rng=None) -> LabelVector:
    """Cluster unit-normalised nonzero rows; zero rows get the first label."""
    n = embedding.vectors.shape[0]
    normalized, index = row_normalize(embedding)
    labels = np.zeros(n, dtype=np.int64)
    if index.size >= config.k:
        labels[index] = kmedians(normalized, config, rng).labels.labels
    else:
        labels[index] = np.arange(index.size)
    return LabelVector(labels, config.k)


def ef_spectral_kmedians(graph: Graph, k: int, gamma: float, budget: PrivacyBudget,
                         config: ClusterConfig | None = None, rng=None) -> LabelVector:
    """Downshift, embed, normalise nonzero rows, then k-medians."""
    embedding = spectral_embed(graph, k, budget)
    return normalized_kmedians_labels(embedding, _config_for(k, gamma, config), rng)
