import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from efspectral.graph import Graph
from efspectral.models import SymmetricSpec, expected_matrix, make_symmetric_sbm, sample
from efspectral.privacy import INFINITY, PrivacyBudget, downshift, edge_flip
from efspectral.spectral import (
    AdjacencyOperator,
    Embedding,
    leading_eigvecs,
    procrustes_distance,
    row_normalize,
    spectral_embed,
)


def _abs_cosines(u, v):
    return np.abs(np.sum(u * v, axis=0)) / (np.linalg.norm(u, axis=0) * np.linalg.norm(v, axis=0))


def _residuals(a, emb):
    return np.linalg.norm(a @ emb.vectors - emb.vectors * emb.values, axis=0)


def test_identity_matrix_residuals():
    emb = leading_eigvecs(np.eye(3), 2)
    np.testing.assert_allclose(emb.values, [1, 1])
    np.testing.assert_allclose(emb.vectors.T @ emb.vectors, np.eye(2), atol=1e-12)
    assert np.all(_residuals(np.eye(3), emb) < 1e-12)


def test_block_spectrum_closed_form():
    params = make_symmetric_sbm(SymmetricSpec(n=4, k=2, p=0.2, r=0.1))
    emb = leading_eigvecs(expected_matrix(params), 2)
    np.testing.assert_allclose(emb.values, [4 * (0.1 + 0.1), 4 * 0.1], atol=1e-12)
    np.testing.assert_allclose(emb.values, [0.8, 0.4], atol=1e-12)


def test_negation_same_vectors():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((30, 30))
    a = a + a.T
    pos = leading_eigvecs(a, 4)
    neg = leading_eigvecs(-a, 4)
    np.testing.assert_allclose(np.abs(pos.values), np.abs(neg.values))
    assert np.all(_abs_cosines(pos.vectors, neg.vectors) > 1 - 1e-10)


def test_selection_by_magnitude_and_tie_break():
    d = np.diag([3.0, -5.0, -3.0, 1.0])
    emb = leading_eigvecs(d, 3)
    np.testing.assert_allclose(emb.values, [-5.0, 3.0, -3.0])
    # each column signed so its largest entry is positive
    assert np.all(emb.vectors.max(axis=0) > 0)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        leading_eigvecs(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)
    with pytest.raises(ValueError):
        leading_eigvecs(np.eye(3), 4)
    with pytest.raises(ValueError):
        leading_eigvecs(np.eye(3), 0)


@pytest.mark.parametrize("c", [0.1, -2.5, (math.e - 1) / (math.e + 1)])
def test_scale_invariance_of_vectors(c):
    params = make_symmetric_sbm(SymmetricSpec(n=60, k=3, p=0.2, r=0.05))
    p = expected_matrix(params)
    a = leading_eigvecs(p, 3)
    b = leading_eigvecs(c * p, 3)
    np.testing.assert_allclose(b.values, c * a.values, atol=1e-9)
    # degenerate eigenspace: compare projectors rather than columns
    np.testing.assert_allclose(a.vectors @ a.vectors.T, b.vectors @ b.vectors.T, atol=1e-10)


def test_downshifted_expectation_spectrum():
    b = PrivacyBudget.of(1.3)
    params = make_symmetric_sbm(SymmetricSpec(n=40, k=2, p=0.3, r=0.1))
    p = expected_matrix(params)
    a = leading_eigvecs(p, 2)
    s = leading_eigvecs(b.scale * p, 2)
    np.testing.assert_allclose(s.values, b.scale * a.values, atol=1e-9)
    assert np.all(_abs_cosines(a.vectors, s.vectors) > 1 - 1e-10)


@pytest.mark.parametrize("n", [50, 400, 2000])
def test_residual_bound_random_symmetric(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n))
    a = (a + a.T) / 2
    emb = leading_eigvecs(a, 4)
    assert np.all(_residuals(a, emb) <= 1e-7 * np.maximum(1, np.abs(emb.values)))
    np.testing.assert_allclose(emb.vectors.T @ emb.vectors, np.eye(4), atol=1e-8)
    assert np.all(np.diff(np.abs(emb.values)) <= 1e-12)


def test_lanczos_matches_dense_on_flipped_graph():
    b = PrivacyBudget.of(1.0)
    params = make_symmetric_sbm(SymmetricSpec(n=300, k=3, p=0.3, r=0.05))
    g = edge_flip(sample(params, 1), b, 2)
    dense = spectral_embed(g, 3, b, method="dense")
    lanczos = spectral_embed(g, 3, b, method="lanczos")
    np.testing.assert_allclose(lanczos.values, dense.values, rtol=1e-8)
    np.testing.assert_allclose(lanczos.vectors @ lanczos.vectors.T, dense.vectors @ dense.vectors.T, atol=1e-6)


def test_operator_applies_downshift_implicitly():
    b = PrivacyBudget.of(0.8)
    g = edge_flip(sample(make_symmetric_sbm(SymmetricSpec(n=70, k=2, p=0.3, r=0.1)), 0), b, 1)
    op = AdjacencyOperator(g, b.flip_probability)
    v = np.random.default_rng(0).standard_normal(70)
    np.testing.assert_allclose(op.matvec(v), downshift(g, b).values @ v, atol=1e-12)


def test_infinite_budget_is_plain_adjacency():
    g = sample(make_symmetric_sbm(SymmetricSpec(n=60, k=2, p=0.4, r=0.05)), 3)
    a = leading_eigvecs(g.to_dense(np.float64), 2)
    b = spectral_embed(g, 2, INFINITY)
    np.testing.assert_allclose(a.vectors, b.vectors)


def test_row_normalize_example():
    emb = Embedding(np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 1.0]]), np.array([2.0, 1.0]))
    normalized, index = row_normalize(emb)
    np.testing.assert_allclose(normalized, [[0.6, 0.8], [0.0, 1.0]])
    assert index.tolist() == [0, 2]
    assert emb.zero_rows.tolist() == [1]
    assert emb.positive_rows.tolist() == [0, 2]


def test_row_normalize_all_zero():
    normalized, index = row_normalize(np.zeros((4, 2)))
    assert normalized.shape == (0, 2) and index.size == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_row_normalize_unit_rows(n, k, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, k))
    x[rng.random(n) < 0.3] = 0.0
    normalized, index = row_normalize(x)
    np.testing.assert_allclose(np.linalg.norm(normalized, axis=1), 1.0, atol=1e-12)
    zero = np.flatnonzero(np.linalg.norm(x, axis=1) < 1e-12)
    assert sorted(index.tolist() + zero.tolist()) == list(range(n))


def test_procrustes_identity_and_rotation():
    rng = np.random.default_rng(0)
    x = np.linalg.qr(rng.standard_normal((50, 3)))[0]
    q, d = procrustes_distance(x, x)
    assert d < 1e-12
    np.testing.assert_allclose(q, np.eye(3), atol=1e-12)
    r = ortho_group.rvs(3, random_state=1)
    q, d = procrustes_distance(x @ r, x)
    assert d < 1e-10
    np.testing.assert_allclose(q, r, atol=1e-10)


def test_procrustes_beats_identity_alignment():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 3))
    e = 0.01 * rng.standard_normal((40, 3))
    _, d = procrustes_distance(x + e, x)
    assert d <= np.linalg.norm(e) + 1e-12


def test_procrustes_shape_mismatch():
    with pytest.raises(ValueError):
        procrustes_distance(np.zeros((3, 2)), np.zeros((3, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_procrustes_orthogonal_invariance(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 20, 3))
    r1 = ortho_group.rvs(3, random_state=rng.integers(2**31))
    r2 = ortho_group.rvs(3, random_state=rng.integers(2**31))
    _, d = procrustes_distance(x, y)
    _, d1 = procrustes_distance(x @ r1, y)
    _, d2 = procrustes_distance(x, y @ r2)
    assert d1 == pytest.approx(d, abs=1e-9) and d2 == pytest.approx(d, abs=1e-9)


def test_disconnected_cliques_embedding_separates():
    edges = [(i, j) for i in range(10) for j in range(i + 1, 10)]
    edges += [(i + 10, j + 10) for i, j in edges]
    emb = spectral_embed(Graph.from_edges(20, edges), 2, INFINITY)
    rows = np.round(emb.vectors, 8)
    assert len({tuple(r) for r in rows[:10]}) == 1
    assert len({tuple(r) for r in rows[10:]}) == 1
    assert not np.allclose(rows[0], rows[10])
