"""Symmetric edge-flip mechanism (randomized response on node pairs).

Each node ``i`` privatizes its own upper neighbour list ``(Y_ij)_{j>i}`` by
flipping every entry independently with probability ``1 / (1 + e^eps)``; the
released graph is the symmetrisation of those rows. This gives
``eps``-relationship differential privacy.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import Graph, num_pairs, row_offset
from .models import as_generator

# Beyond this the flip probability is below the generator's resolution.
IDENTITY_CUTOFF = 36.0
AUDIT_MAX_NODES = 4


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy-loss budget; ``PrivacyBudget.infinite()`` means no privacy.

    The infinite budget carries no float, so arithmetic on it has to go
    through the explicit properties below.
    """

    _epsilon: float | None

    def __post_init__(self) -> None:
        if self._epsilon is not None:
            eps = float(self._epsilon)
            if not (eps > 0 and math.isfinite(eps)):
                raise ValueError(f"epsilon must be positive and finite, got {self._epsilon!r}")
            object.__setattr__(self, "_epsilon", eps)

    @classmethod
    def of(cls, epsilon: float) -> "PrivacyBudget":
        return cls(epsilon)

    @classmethod
    def infinite(cls) -> "PrivacyBudget":
        return cls(None)

    @classmethod
    def parse(cls, value: "str | float | PrivacyBudget") -> "PrivacyBudget":
        if isinstance(value, PrivacyBudget):
            return value
        if isinstance(value, str):
            text = value.strip().lower()
            if text in {"inf", "infinity", "+inf", "∞"}:
                return cls.infinite()
            value = float(text)
        if math.isinf(value) and value > 0:
            return cls.infinite()
        return cls(float(value))

    @property
    def is_infinite(self) -> bool:
        return self._epsilon is None

    @property
    def epsilon(self) -> float:
        if self._epsilon is None:
            raise ValueError("infinite budget has no numeric epsilon")
        return self._epsilon

    @property
    def flip_probability(self) -> float:
        """``1 / (1 + e^eps)``; also the downshift amount ``s``."""
        if self._epsilon is None:
            return 0.0
        return 1.0 / (1.0 + math.exp(self._epsilon))

    @property
    def retention(self) -> float:
        if self._epsilon is None:
            return 1.0
        return math.exp(self._epsilon) / (1.0 + math.exp(self._epsilon))

    @property
    def scale(self) -> float:
        """``(e^eps - 1) / (e^eps + 1)``, the factor relating E[downshifted] to E[Y]."""
        if self._epsilon is None:
            return 1.0
        return math.tanh(self._epsilon / 2.0)

    @property
    def zeta(self) -> float:
        """``e^eps - 1``."""
        return math.expm1(self.epsilon)

    @property
    def mixture_weight(self) -> float:
        """Probability ``2 / (e^eps + 1)`` of replacing a pair by a fair coin."""
        return 2.0 * self.flip_probability

    def __str__(self) -> str:
        return "inf" if self._epsilon is None else f"{self._epsilon:.10g}"


INFINITY = PrivacyBudget.infinite()


def local_randomizer(row: np.ndarray, budget: PrivacyBudget, rng: np.random.Generator) -> np.ndarray:
    """Node-side flip of one upper neighbour list ``(Y_ij)_{j>i}``."""
    q = budget.flip_probability
    return row ^ (rng.random(row.size) < q)


def edge_flip(graph: Graph, budget: PrivacyBudget, rng) -> Graph:
    """Release ``T(Y) + T(Y)^T`` where row ``i`` of ``T`` comes from node ``i``.

    Randomness is consumed row by row in upper-triangle order.
    """
    if budget.is_infinite:
        return graph
    if budget.epsilon > IDENTITY_CUTOFF:
        warnings.warn(
            f"epsilon={budget.epsilon} > {IDENTITY_CUTOFF}: flip probability underflows, "
            "returning the input unchanged",
            stacklevel=2,
        )
        return graph
    rng = as_generator(rng)
    n = graph.n
    upper = graph.upper()
    out = np.empty_like(upper)
    for i in range(n - 1):
        lo = row_offset(n, i)
        hi = lo + n - 1 - i
        out[lo:hi] = local_randomizer(upper[lo:hi], budget, rng)
    return Graph.from_upper(n, out)


def mixture_sample(graph: Graph, budget: PrivacyBudget, rng) -> Graph:
    """Draw from the Erdos-Renyi mixture that is equal in law to ``edge_flip``.

    Each pair is replaced, with probability ``2 / (e^eps + 1)``, by a
    fair-coin edge and otherwise kept. Used as a distributional oracle.
    """
    if budget.is_infinite:
        raise ValueError("the mixture form is undefined for an infinite budget")
    rng = as_generator(rng)
    m = num_pairs(graph.n)
    replace = rng.random(m) < budget.mixture_weight
    coin = rng.random(m) < 0.5
    return Graph.from_upper(graph.n, np.where(replace, coin, graph.upper()))


@dataclass(frozen=True, eq=False)
class DownshiftedMatrix:
    values: np.ndarray
    budget: PrivacyBudget


def downshift(graph: Graph, budget: PrivacyBudget) -> DownshiftedMatrix:
    """``A - s (1 1^T - I)`` with ``s = 1 / (e^eps + 1)``; identity when eps is infinite."""
    values = graph.to_dense(np.float64)
    s = budget.flip_probability
    if s:
        values -= s
        np.fill_diagonal(values, 0.0)
    return DownshiftedMatrix(values, budget)


def tau_eps(B: np.ndarray, budget: PrivacyBudget) -> np.ndarray:
    """Connectivity matrix of the edge-flipped SBM."""
    B = np.asarray(B, dtype=np.float64)
    if budget.is_infinite:
        return B.copy()
    return budget.flip_probability + budget.scale * B


def _output_probabilities(states: np.ndarray, budget: PrivacyBudget) -> np.ndarray:
    # prob[y, a] = prod over pairs of P(flip output a_e | input y_e)
    q = budget.flip_probability
    keep = budget.retention
    per_pair = np.where(states[:, None, :] == states[None, :, :], keep, q)
    return per_pair.prod(axis=2)


def privacy_audit(n: int, budget: PrivacyBudget, per_pair: bool = False):
    """Largest likelihood ratio ``P(M(Y)=A) / P(M(Y')=A)`` over all neighbours.

    Enumerates every graph on ``n <= 4`` nodes, every graph differing from it
    in one pair, and every possible release. With ``per_pair`` the maximum
    is also returned separately for each pair position.
    """
    if budget.is_infinite:
        raise ValueError("privacy audit needs a finite epsilon")
    if not 2 <= n <= AUDIT_MAX_NODES:
        raise ValueError(f"audit supports 2 <= n <= {AUDIT_MAX_NODES}, got {n}")
    m = num_pairs(n)
    states = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int8)
    prob = _output_probabilities(states, budget)
    index = {tuple(s): i for i, s in enumerate(states)}
    pair_max = np.zeros(m)
    for y, s in enumerate(states):
        for e in range(m):
            t = s.copy()
            t[e] ^= 1
            ratio = prob[y] / prob[index[tuple(t)]]
            pair_max[e] = max(pair_max[e], float(ratio.max()))
    worst = float(pair_max.max())
    if per_pair:
        return worst, pair_max
    return worst
