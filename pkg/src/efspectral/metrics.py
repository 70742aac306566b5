"""Misclassification rates and the finite-sample bound quantities.

The universal constants in the bounds have no known numeric value, so every
report carries the raw condition value next to the threshold it was compared
against, for the chosen constant.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import LabelVector, community_stats
from .models import BlockModelParams, model_derived
from .privacy import PrivacyBudget

ENUMERATION_MAX_K = 6


def _as_array(labels) -> np.ndarray:
    if isinstance(labels, LabelVector):
        return labels.labels
    return np.asarray(labels, dtype=np.int64)


def _k_of(labels, arr: np.ndarray) -> int:
    declared = labels.k if isinstance(labels, LabelVector) else 0
    return max(declared, int(arr.max()) + 1 if arr.size else 1)


def confusion(truth, estimate) -> np.ndarray:
    """``C[a, b]`` counts nodes with estimated label ``a`` and true label ``b``."""
    t, e = _as_array(truth), _as_array(estimate)
    if t.shape != e.shape:
        raise ValueError(f"label vectors differ in length: {t.size} vs {e.size}")
    size = max(_k_of(truth, t), _k_of(estimate, e))
    c = np.zeros((size, size), dtype=np.int64)
    np.add.at(c, (e, t), 1)
    return c


def _best_agreement(c: np.ndarray, method: str) -> int:
    size = c.shape[0]
    if method == "auto":
        method = "enumerate" if size <= ENUMERATION_MAX_K else "hungarian"
    if method == "enumerate":
        cols = np.arange(size)
        return max(int(c[cols, list(p)].sum()) for p in itertools.permutations(range(size)))
    if method == "hungarian":
        rows, cols = linear_sum_assignment(c, maximize=True)
        return int(c[rows, cols].sum())
    raise ValueError(f"unknown method {method!r}")


def overall_misclassification(truth, estimate, method: str = "auto") -> float:
    """Fraction of nodes misclassified under the best relabelling of ``estimate``."""
    c = confusion(truth, estimate)
    n = int(c.sum())
    if n == 0:
        return 0.0
    return (n - _best_agreement(c, method)) / n


def worstcase_misclassification(truth, estimate, method: str = "auto") -> float:
    """Largest per-block error rate, each block with its own best relabelling.

    For a single block only the label mapped onto it matters, so the inner
    minimum is attained by the most frequent estimated label within the
    block. ``method="enumerate"`` checks every permutation instead.
    """
    c = confusion(truth, estimate)
    sizes = c.sum(axis=0)
    worst = 0.0
    if method == "enumerate":
        perms = list(itertools.permutations(range(c.shape[0])))
    for j in np.flatnonzero(sizes):
        if method == "enumerate":
            # sigma(a) = j for exactly one a, namely the preimage p.index(j)
            hit = max(int(c[p.index(j), j]) for p in perms)
        else:
            hit = int(c[:, j].max())
        worst = max(worst, (int(sizes[j]) - hit) / int(sizes[j]))
    return worst


def zeta(budget: PrivacyBudget) -> float:
    return budget.zeta


def g_eps(B, budget: PrivacyBudget) -> float:
    """Cost-of-privacy factor multiplying the misclassification bounds."""
    max_b = float(np.max(B))
    if budget.is_infinite:
        return max_b
    eps = budget.epsilon
    return (max_b + 1.0 / math.expm1(eps)) / math.tanh(eps / 2.0)


def g_eps_upper(B, budget: PrivacyBudget) -> float:
    """``max B + 3/zeta + 2/zeta^2``, an upper bound on ``g_eps`` when ``max B <= 1``."""
    z = budget.zeta
    return float(np.max(B)) + 3.0 / z + 2.0 / z**2


@dataclass(frozen=True)
class BoundReport:
    model: str
    condition_value: float
    threshold: float
    condition_met: bool
    l_bound: float
    l_tilde_bound: float
    # DCBM has no direct worst-case bound; l_tilde_bound = (n / n_min) * l_bound
    l_tilde_fallback: bool
    constant: float
    gamma: float
    single_block: bool = False


def sbm_bound_report(params: BlockModelParams, gamma: float, budget: PrivacyBudget,
                     c1: float = 1.0) -> BoundReport:
    if not params.is_sbm:
        raise ValueError("SBM bound requires psi == 1 for every node")
    stats = community_stats(params.labels)
    derived = model_derived(params)
    k, n = params.k, params.n
    g = g_eps(params.B, budget)
    denom = stats.n_min**2 * derived.lambda_B**2
    cond = (2 + gamma) * k * n * g / denom
    return BoundReport(
        model="sbm",
        condition_value=cond,
        threshold=1.0 / c1,
        condition_met=cond < 1.0 / c1,
        l_bound=c1 * (2 + gamma) * k * stats.n_max_prime * g / denom,
        l_tilde_bound=c1 * cond,
        l_tilde_fallback=False,
        constant=c1,
        gamma=gamma,
        single_block=stats.single_block,
    )


def dcbm_bound_report(params: BlockModelParams, gamma: float, budget: PrivacyBudget,
                      c2: float = 1.0) -> BoundReport:
    lab = params.labels.labels
    block_max = np.array([params.psi[lab == j].max() for j in range(params.k) if np.any(lab == j)])
    if not np.all(block_max == 1.0):
        warnings.warn("max psi within some block is not 1; DCBM bound assumptions fail", stacklevel=2)
    stats = community_stats(params.labels)
    derived = model_derived(params)
    k, n = params.k, params.n
    g = g_eps(params.B, budget)
    sizes = np.asarray(stats.block_sizes, dtype=np.float64)
    spread = float(np.nansum(sizes**2 * derived.heterogeneity))
    lhs = (2.5 + gamma) * math.sqrt(k * n * g) / (derived.n_tilde_min * derived.lambda_B)
    rhs = stats.n_min / (c2 * math.sqrt(spread))
    l_bound = c2 * (2.5 + gamma) / (derived.n_tilde_min * derived.lambda_B) * math.sqrt(k / n * spread * g)
    return BoundReport(
        model="dcbm",
        condition_value=lhs,
        threshold=rhs,
        condition_met=lhs < rhs,
        l_bound=l_bound,
        l_tilde_bound=n / stats.n_min * l_bound,
        l_tilde_fallback=True,
        constant=c2,
        gamma=gamma,
        single_block=stats.single_block,
    )


def frobenius_reference(params: BlockModelParams, budget: PrivacyBudget) -> float:
    """``2 sqrt(2 k n g) / (n_tilde_min lambda_B)``: the embedding-deviation bound without its constant."""
    derived = model_derived(params)
    g = g_eps(params.B, budget)
    return 2 * math.sqrt(2 * params.k * params.n * g) / (derived.n_tilde_min * derived.lambda_B)


def dcbm_rate(params: BlockModelParams, budget: PrivacyBudget, a: float) -> float:
    """``k sqrt(g) / (a^3 lambda_B sqrt(n))``, the DCBM rate for balanced blocks and ``psi >= a``."""
    derived = model_derived(params)
    return params.k * math.sqrt(g_eps(params.B, budget)) / (a**3 * derived.lambda_B * math.sqrt(params.n))


@dataclass(frozen=True)
class RegimeCheck:
    psi_bounded: bool
    balanced: bool
    # k^2 sqrt(g) / (a^3 lambda_B sqrt(n)); must vanish along the sequence
    vanishing_term: float
    rate: float

    @property
    def holds(self) -> bool:
        return self.psi_bounded and self.balanced


def dcbm_regime_check(params: BlockModelParams, budget: PrivacyBudget, a: float,
                      balance_factor: float = 2.0) -> RegimeCheck:
    """Check ``a <= psi <= 1`` and ``n_j`` within ``balance_factor`` of ``n/k``."""
    sizes = params.labels.block_sizes()
    target = params.n / params.k
    balanced = bool(np.all(sizes >= target / balance_factor) and np.all(sizes <= target * balance_factor))
    rate = dcbm_rate(params, budget, a)
    return RegimeCheck(
        psi_bounded=bool(np.all(params.psi >= a) and np.all(params.psi <= 1)),
        balanced=balanced,
        vanishing_term=params.k * rate,
        rate=rate,
    )
