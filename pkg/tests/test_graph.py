import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efspectral.graph import (
    Graph,
    GraphFormatError,
    LabelVector,
    block_densities,
    community_stats,
    format_edge_list,
    format_id_map,
    load_edge_list,
    load_labels,
    load_named_edge_list,
    num_pairs,
    row_blocks,
    row_offset,
    triu_block_indices,
)


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    bits = draw(st.lists(st.booleans(), min_size=num_pairs(n), max_size=num_pairs(n)))
    return Graph.from_upper(n, np.array(bits, dtype=bool))


def test_path_graph_from_edge_list():
    g, report = load_edge_list("1 2\n2 3", 3)
    a = g.to_dense()
    assert a[0, 1] == a[1, 2] == 1
    assert a[0, 2] == 0
    assert report.edges_read == 2 and report.self_loops == 0


def test_reciprocal_pair_symmetrized():
    g, report = load_edge_list("1 2\n2 1", 2, symmetrize=True)
    assert g.has_edge(0, 1) and g.num_edges == 1
    assert report.reciprocal == 1 and report.duplicates == 0


def test_reversed_repeat_is_duplicate_without_symmetrize():
    g, report = load_edge_list("1 2\n2 1", 2)
    assert g.num_edges == 1
    assert report.duplicates == 1


def test_self_loop_dropped_and_counted():
    g, report = load_edge_list("1 1\n1 2", 2)
    assert g.has_edge(0, 1)
    assert report.self_loops == 1


def test_zero_based_header():
    g, _ = load_edge_list("# base: 0\n0 1\n1 2\n", 3)
    assert g.has_edge(0, 1) and g.has_edge(1, 2)


@pytest.mark.parametrize("text", ["1 4", "0 1", "1 x", "1"])
def test_bad_lines_report_line_number(text):
    with pytest.raises(GraphFormatError, match="line 2"):
        load_edge_list("1 2\n" + text, 3)


def test_empty_input_rejected():
    with pytest.raises(GraphFormatError):
        load_edge_list("", 3)
    with pytest.raises(GraphFormatError):
        load_edge_list("# only a comment\n", 3)


def test_named_edge_list_ids_follow_first_appearance():
    g, _, ids = load_named_edge_list("alice bob\nbob carol\n")
    assert ids == {"alice": 0, "bob": 1, "carol": 2}
    assert g.n == 3 and g.num_edges == 2
    assert format_id_map(ids).splitlines()[1] == "1\tbob"


def test_labels_first_appearance():
    lab, names = load_labels("M\nF\nM", 3)
    assert lab.labels.tolist() == [0, 1, 0] and lab.k == 2
    assert names == ["M", "F"]


def test_single_class_labels():
    lab, _ = load_labels("a\na\na", 3)
    assert lab.labels.tolist() == [0, 0, 0] and lab.k == 1


def test_two_class_roster_of_27():
    text = "\n".join(["male"] * 13 + ["female"] * 14)
    lab, _ = load_labels(text, 27)
    assert lab.k == 2
    assert sorted(lab.block_sizes().tolist()) == [13, 14]


def test_label_count_mismatch():
    with pytest.raises(GraphFormatError):
        load_labels("a\nb", 3)


@pytest.mark.parametrize(
    "labels, sizes, n_min, n_max, n_max_prime",
    [
        ([0, 0, 1, 2], (2, 1, 1), 1, 2, 1),
        ([0] * 4 + [1] * 4 + [2] * 4, (4, 4, 4), 4, 4, 4),
        ([0, 0, 0, 1], (3, 1), 1, 3, 1),
    ],
)
def test_community_stats(labels, sizes, n_min, n_max, n_max_prime):
    s = community_stats(LabelVector.from_sequence(labels))
    assert s.block_sizes == sizes
    assert (s.n_min, s.n_max, s.n_max_prime) == (n_min, n_max, n_max_prime)


def test_single_block_stats_flagged():
    s = community_stats(LabelVector.from_sequence([0, 0, 0]))
    assert s.single_block and s.n_max_prime == s.n_max == 3


def test_block_densities_two_cliques():
    lab = LabelVector.from_sequence([0, 0, 0, 1, 1, 1])
    g = Graph.from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (0, 3)])
    d = block_densities(g, lab)
    np.testing.assert_allclose(d, [[1.0, 1 / 9], [1 / 9, 1.0]])


def test_row_blocks_cover_upper_triangle():
    n = 37
    covered = []
    for r0, r1 in row_blocks(n, max_pairs=50):
        rows, cols = triu_block_indices(n, r0, r1)
        assert rows.size == row_offset(n, r1) - row_offset(n, r0)
        covered.extend(zip(rows.tolist(), cols.tolist()))
    assert covered == list(zip(*[x.tolist() for x in np.triu_indices(n, 1)]))


def test_graph_is_read_only():
    g = Graph.complete(4)
    with pytest.raises(ValueError):
        g.bits[0] = 0


def test_from_dense_validation():
    with pytest.raises(ValueError):
        Graph.from_dense(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        Graph.from_dense(np.eye(2, dtype=int))


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_dense_view_symmetric_zero_diagonal(g):
    a = g.to_dense()
    assert np.array_equal(a, a.T)
    assert not a.diagonal().any()
    assert Graph.from_dense(a) == g
    assert a.sum() == 2 * g.num_edges
    assert np.array_equal(g.degrees(), a.sum(1))


@settings(max_examples=60, deadline=None)
@given(graphs(), st.sampled_from([0, 1]))
def test_edge_list_round_trip(g, base):
    if g.num_edges == 0:
        return
    back, report = load_edge_list(format_edge_list(g, base), g.n)
    assert back == g
    assert report.duplicates == 0
