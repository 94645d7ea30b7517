import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhqrc.graph import (
    MAX_RESTARTS,
    GraphSamplingError,
    RegularGraph,
    edge_list,
    from_edge_list,
    read_edge_list,
    sample_regular_graph,
    write_edge_list,
)


def test_default_size_is_four_regular():
    g = sample_regular_graph(8, 4, seed=3)
    assert np.all(g.adjacency.sum(axis=0) == 4)
    assert np.all(g.adjacency.sum(axis=1) == 4)


def test_k_equals_n_minus_one_is_complete():
    g = sample_regular_graph(5, 4, seed=0)
    expected = np.ones((5, 5), dtype=int) - np.eye(5, dtype=int)
    np.testing.assert_array_equal(g.adjacency, expected)


@pytest.mark.parametrize("seed", range(30))
def test_two_regular_graphs_are_unions_of_cycles(seed):
    g = sample_regular_graph(6, 2, seed=seed)
    # independent check with networkx: every component is a simple cycle
    nxg = nx.from_numpy_array(g.adjacency)
    for comp in nx.connected_components(nxg):
        sub = nxg.subgraph(comp)
        assert sub.number_of_edges() == sub.number_of_nodes() >= 3
        assert len(nx.cycle_basis(sub)) == 1


@given(st.integers(2, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))), st.integers(0, 2**32 - 1))
def test_sampled_graphs_are_simple_and_regular(nk, seed):
    n, k = nk
    if (n * k) % 2:
        with pytest.raises(ValueError):
            sample_regular_graph(n, k, seed)
        return
    g = sample_regular_graph(n, k, seed)
    a = g.adjacency
    assert np.array_equal(a, a.T)
    assert not np.any(np.diag(a))
    assert set(np.unique(a)) <= {0, 1}
    assert np.all(a.sum(axis=0) == k)
    assert len(edge_list(g)) == n * k // 2


def test_same_seed_same_graph():
    a = sample_regular_graph(8, 4, seed=99).adjacency
    b = sample_regular_graph(8, 4, seed=99).adjacency
    np.testing.assert_array_equal(a, b)


def test_different_seeds_explore_several_graphs():
    keys = {sample_regular_graph(8, 4, seed=s).adjacency.tobytes() for s in range(20)}
    assert len(keys) > 5


@pytest.mark.parametrize("n,k", [(5, 3), (4, 4), (4, 5), (0, 0), (3, -1)])
def test_invalid_parameters(n, k):
    with pytest.raises(ValueError):
        sample_regular_graph(n, k, seed=0)


def test_single_vertex_without_edges_is_allowed():
    g = sample_regular_graph(1, 0, seed=0)
    assert g.n_vertices == 1 and edge_list(g) == []


def test_retry_budget_exhaustion(monkeypatch):
    class AlwaysLoop:
        def permutation(self, x):
            return np.zeros_like(x)  # every pair is a self-loop

    monkeypatch.setattr(np.random, "default_rng", lambda seed=None: AlwaysLoop())
    with pytest.raises(GraphSamplingError, match=str(MAX_RESTARTS)):
        sample_regular_graph(6, 2, seed=0)


def test_edge_counts():
    assert len(edge_list(sample_regular_graph(5, 4, 0))) == 10
    assert len(edge_list(sample_regular_graph(8, 4, 0))) == 16


def test_edge_list_sorted_and_round_trips():
    g = sample_regular_graph(8, 4, seed=5)
    edges = edge_list(g)
    assert all(l < m for l, m in edges)
    assert edges == sorted(edges)
    np.testing.assert_array_equal(from_edge_list(8, edges).adjacency, g.adjacency)


def test_edge_file_round_trip(tmp_path):
    g = sample_regular_graph(8, 4, seed=6)
    path = tmp_path / "g.txt"
    write_edge_list(path, g, seed=6)
    text = path.read_text().splitlines()
    assert text[0] == "# n=8 k=4 seed=6"
    assert len(text) == 1 + 16
    np.testing.assert_array_equal(read_edge_list(path).adjacency, g.adjacency)


def test_graph_type_rejects_irregular_adjacency():
    a = np.zeros((3, 3), dtype=np.int8)
    a[0, 1] = a[1, 0] = 1
    with pytest.raises(ValueError):
        RegularGraph(3, 1, a)
    a[0, 0] = 1
    with pytest.raises(ValueError):
        RegularGraph(3, 1, a)


@pytest.mark.parametrize("n, k", [(12, 6), (12, 5), (10, 5), (11, 6)])
def test_dense_half_degree_graphs(n, k):
    # rejection sampling almost never succeeds here; the incremental pairing must
    for seed in range(20):
        g = sample_regular_graph(n, k, seed)
        assert np.all(g.adjacency.sum(axis=0) == k)
        assert not np.any(np.diag(g.adjacency))
