"""Stochastic block model (SBM) and degree-corrected block model (DCBM).

An SBM is the DCBM with every degree parameter equal to one, so a single
parameter container covers both: ``Y_ij ~ Bernoulli(psi_i psi_j B[theta_i, theta_j])``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, LabelVector, num_pairs, row_blocks, row_offset, triu_block_indices

LAMBDA_ZERO_TOL = 1e-12


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class BlockModelParams:
    """Memberships ``labels``, degree parameters ``psi`` and connectivity ``B``.

    ``bounds_applicable`` is False when some block has ``max psi < 1``; the
    DCBM misclassification bound assumes that normalisation.
    """

    labels: LabelVector
    psi: np.ndarray
    B: np.ndarray
    bounds_applicable: bool = field(default=True)

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.float64).copy()
        B = np.asarray(self.B, dtype=np.float64).copy()
        k = self.labels.k
        if psi.shape != (self.labels.n,):
            raise ValueError("psi must have one entry per node")
        if B.shape != (k, k):
            raise ValueError(f"B must be {k}x{k}")
        if not np.allclose(B, B.T, atol=0, rtol=0):
            raise ValueError("B must be symmetric")
        if np.any(B < 0) or np.any(B > 1):
            raise ValueError("B entries must lie in [0, 1]")
        if np.any(psi <= 0) or np.any(psi > 1):
            raise ValueError("psi entries must lie in (0, 1]")
        psi.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.labels.n

    @property
    def k(self) -> int:
        return self.labels.k

    @property
    def is_sbm(self) -> bool:
        return bool(np.all(self.psi == 1.0))


@dataclass(frozen=True)
class SymmetricSpec:
    """``k`` equal blocks, ``B = p I + r 1 1^T``; ``a`` bounds psi from below (DCBM only)."""

    n: int
    k: int
    p: float
    r: float
    a: float = 1.0

    def validate(self) -> None:
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if self.n % self.k:
            raise ValueError(f"k={self.k} does not divide n={self.n}; blocks must be equal-sized")
        if not (self.p > 0 and self.r > 0):
            raise ValueError("p and r must be positive (B must be full rank)")
        if self.p + self.r > 1:
            raise ValueError(f"p + r = {self.p + self.r} exceeds 1")
        if not 0 < self.a <= 1:
            raise ValueError("a must lie in (0, 1]")

    def connectivity(self) -> np.ndarray:
        return self.p * np.eye(self.k) + self.r * np.ones((self.k, self.k))

    def labels(self) -> LabelVector:
        return LabelVector(np.repeat(np.arange(self.k), self.n // self.k), self.k)


def make_symmetric_sbm(spec: SymmetricSpec) -> BlockModelParams:
    spec.validate()
    return BlockModelParams(spec.labels(), np.ones(spec.n), spec.connectivity())


def make_symmetric_dcbm(spec: SymmetricSpec, rng) -> BlockModelParams:
    """Symmetric DCBM: psi is 1 on each block's first node, Uniform[a, 1) elsewhere.

    Draws are taken in block-major, node-index order before any edge
    randomness, so pass a generator dedicated to psi.
    """
    spec.validate()
    rng = as_generator(rng)
    labels = spec.labels()
    psi = np.ones(spec.n)
    size = spec.n // spec.k
    for j in range(spec.k):
        start = j * size
        psi[start + 1 : start + size] = rng.uniform(spec.a, 1.0, size=size - 1)
    return BlockModelParams(labels, psi, spec.connectivity())


def make_dcbm(labels: LabelVector, psi: np.ndarray, B: np.ndarray) -> BlockModelParams:
    """DCBM with unconstrained psi; flags when the bound normalisation fails."""
    psi = np.asarray(psi, dtype=np.float64)
    block_max = np.array([psi[labels.labels == j].max() if np.any(labels.labels == j) else 1.0
                          for j in range(labels.k)])
    ok = bool(np.all(block_max == 1.0))
    if not ok:
        warnings.warn("some block has max psi < 1; DCBM bounds are inapplicable", stacklevel=2)
    return BlockModelParams(labels, psi, B, bounds_applicable=ok)


def sample(params: BlockModelParams, rng) -> Graph:
    """Draw one graph; uniforms are consumed in row-major upper-triangle order."""
    rng = as_generator(rng)
    n = params.n
    lab = params.labels.labels
    psi = params.psi
    B = params.B
    upper = np.empty(num_pairs(n), dtype=bool)
    for r0, r1 in row_blocks(n):
        rows, cols = triu_block_indices(n, r0, r1)
        prob = psi[rows] * psi[cols] * B[lab[rows], lab[cols]]
        upper[row_offset(n, r0) : row_offset(n, r1)] = rng.random(rows.size) < prob
    return Graph.from_upper(n, upper)


def expected_matrix(params: BlockModelParams) -> np.ndarray:
    """``P_ij = psi_i psi_j B[theta_i, theta_j]``, diagonal included."""
    lab = params.labels.labels
    return np.outer(params.psi, params.psi) * params.B[np.ix_(lab, lab)]


@dataclass(frozen=True)
class ModelDerived:
    effective_sizes: np.ndarray
    heterogeneity: np.ndarray
    n_tilde_min: float
    lambda_B: float
    max_B: float


def smallest_nonzero_abs_eigenvalue(B: np.ndarray, tol: float = LAMBDA_ZERO_TOL) -> float:
    vals = np.abs(np.linalg.eigvalsh(np.asarray(B, dtype=np.float64)))
    nonzero = vals[vals >= tol]
    if nonzero.size == 0:
        raise ValueError("B is numerically zero; no nonzero eigenvalue")
    return float(nonzero.min())


def model_derived(params: BlockModelParams) -> ModelDerived:
    lab = params.labels.labels
    k = params.k
    psi2 = params.psi**2
    sizes = params.labels.block_sizes().astype(np.float64)
    eff = np.bincount(lab, weights=psi2, minlength=k)
    inv = np.bincount(lab, weights=1.0 / psi2, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        nu = np.where(sizes > 0, inv * eff / sizes**2, np.nan)
    return ModelDerived(
        effective_sizes=eff,
        heterogeneity=nu,
        n_tilde_min=float(eff.min()),
        lambda_B=smallest_nonzero_abs_eigenvalue(params.B),
        max_B=float(params.B.max()),
    )


def format_params(params: BlockModelParams) -> str:
    """Plain-text dump of a parameter set, for audit trails."""
    lines = [f"n = {params.n}", f"k = {params.k}", f"sbm = {str(params.is_sbm).lower()}"]
    for row in params.B:
        lines.append("B = " + " ".join(f"{x:.17g}" for x in row))
    lines.append("labels = " + " ".join(str(int(x)) for x in params.labels.labels))
    lines.append("psi = " + " ".join(f"{x:.17g}" for x in params.psi))
    return "\n".join(lines) + "\n"
