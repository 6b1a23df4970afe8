import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goblin.graph import (Partition, UserGraph, block_graph, build_sharing_transform,
                          compound_vector, inject_graph_noise, laplacian, lift_context,
                          macro_graph, make_4cliques, read_graph, read_partition,
                          spectral_cluster, write_graph, write_partition)


def triangle():
    return UserGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return UserGraph.from_edges(n, chosen)


class TestLaplacian:
    def test_single_edge(self):
        np.testing.assert_array_equal(laplacian(UserGraph.from_edges(2, [(0, 1)])),
                                      [[1, -1], [-1, 1]])

    def test_triangle(self):
        L = laplacian(triangle())
        np.testing.assert_array_equal(np.diag(L), 2)
        np.testing.assert_array_equal(L[~np.eye(3, dtype=bool)], -1)

    def test_path(self):
        np.testing.assert_array_equal(laplacian(UserGraph.from_edges(3, [(0, 1), (1, 2)])),
                                      [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_weighted_degree(self):
        L = laplacian(UserGraph.from_edges(3, [(0, 1, 2.5), (1, 2, 1.0)]))
        np.testing.assert_array_equal(np.diag(L), [2.5, 3.5, 1.0])

    @settings(max_examples=50, deadline=None)
    @given(graphs())
    def test_properties(self, g):
        L = laplacian(g)
        assert np.abs(L.sum(axis=1)).max() == 0
        assert np.linalg.eigvalsh(L)[0] >= -1e-10
        assert np.linalg.eigvalsh(np.eye(g.n) + L)[0] >= 1 - 1e-10

    def test_invariants_rejected(self):
        with pytest.raises(ValueError):
            UserGraph.from_edges(2, [(1, 1)])
        with pytest.raises(ValueError):
            UserGraph(2, {(0, 1): 0.0})
        with pytest.raises(ValueError):
            UserGraph(2, {(1, 0): 1.0})


class TestSharingTransform:
    def test_edgeless_is_identity(self):
        st_ = build_sharing_transform(UserGraph(5, {}))
        np.testing.assert_allclose(st_.a_inv_sqrt, np.eye(5), atol=1e-15)

    def test_triangle(self):
        r = build_sharing_transform(triangle()).a_inv_sqrt
        np.testing.assert_allclose(np.diag(r), 2 / 3, atol=1e-14)
        np.testing.assert_allclose(r[0, 1], 1 / 6, atol=1e-14)

    def test_two_disconnected_edges_block_diagonal(self):
        g = UserGraph.from_edges(4, [(0, 1), (2, 3)])
        r = build_sharing_transform(g).a_inv_sqrt
        # per-component oracle: one edge gives A = [[2,-1],[-1,2]]
        lam, v = np.linalg.eigh(np.array([[2.0, -1.0], [-1.0, 2.0]]))
        block = v @ np.diag(lam ** -0.5) @ v.T
        np.testing.assert_allclose(r[:2, :2], block, atol=1e-14)
        np.testing.assert_allclose(r[2:, 2:], block, atol=1e-14)
        np.testing.assert_allclose(r[:2, 2:], 0, atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(graphs())
    def test_invariants(self, g):
        s = build_sharing_transform(g)
        np.testing.assert_array_equal(s.a, np.eye(g.n) + laplacian(g))
        np.testing.assert_allclose(s.a_inv_sqrt @ s.a_inv_sqrt @ s.a, np.eye(g.n), atol=1e-8)


class TestLiftContext:
    def test_edgeless_sparse_layout(self):
        s = build_sharing_transform(UserGraph(4, {}))
        x = np.array([0.3, -1.2, 0.5])
        np.testing.assert_allclose(lift_context(s, 2, x), compound_vector(4, 2, x), atol=1e-15)

    def test_triangle_blocks(self):
        s = build_sharing_transform(triangle())
        x = np.array([0.6, 0.8])
        v = lift_context(s, 0, x)
        np.testing.assert_allclose(v[:2], 2 / 3 * x, atol=1e-14)
        np.testing.assert_allclose(v[2:4], 1 / 6 * x, atol=1e-14)
        np.testing.assert_allclose(v[4:], 1 / 6 * x, atol=1e-14)
        assert v @ v == pytest.approx(0.5, abs=1e-14)

    def test_matches_dense_kronecker(self):
        rng = np.random.default_rng(0)
        g = UserGraph.from_adjacency(np.triu(rng.random((6, 6)) < 0.5, 1).astype(float))
        s = build_sharing_transform(g)
        x = rng.standard_normal(3)
        dense = np.kron(s.a_inv_sqrt, np.eye(3)) @ compound_vector(6, 4, x)
        np.testing.assert_allclose(lift_context(s, 4, x), dense, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(graphs(), st.integers(0, 10_000))
    def test_norm_equals_inverse_diagonal(self, g, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(4)
        x /= np.linalg.norm(x)
        i = int(rng.integers(g.n))
        s = build_sharing_transform(g)
        v = lift_context(s, i, x)
        a_inv = np.linalg.inv(s.a)
        assert v @ v == pytest.approx(a_inv[i, i], abs=1e-12)
        assert 0 < v @ v <= 1 + 1e-12

    def test_bad_index(self):
        with pytest.raises(IndexError):
            lift_context(build_sharing_transform(triangle()), 3, np.ones(2))


class TestGraphNoise:
    def test_zero_noise(self):
        g = make_4cliques()
        assert inject_graph_noise(g, 0, seed=1).edges == g.edges

    def test_threshold_and_binomial_count(self):
        g = UserGraph(100, {})
        pairs = 4950
        p = 500 / pairs
        assert 1 - p == pytest.approx(0.89899, abs=1e-5)
        counts = [inject_graph_noise(g, 500, seed=s).edge_count for s in range(200)]
        sigma = np.sqrt(pairs * p * (1 - p))
        assert abs(np.mean(counts) - 500) <= 3 * sigma / np.sqrt(200)

    def test_rate_on_4cliques(self):
        assert 500 / make_4cliques().edge_count == pytest.approx(0.417, abs=5e-4)

    def test_xor_involution(self):
        g = make_4cliques()
        noisy = inject_graph_noise(g, 300, seed=42)
        assert noisy.edges != g.edges
        assert inject_graph_noise(noisy, 300, seed=42).edges == g.edges

    def test_rejects_excess(self):
        with pytest.raises(ValueError):
            inject_graph_noise(UserGraph(3, {}), 4, seed=0)


class TestFourCliques:
    def test_defaults(self):
        g = make_4cliques()
        assert (g.n, g.edge_count) == (100, 1200)

    def test_single_edge(self):
        assert make_4cliques(1, 2).edges == {(0, 1): 1.0}

    def test_two_triangles(self):
        g = make_4cliques(2, 3)
        assert (g.n, g.edge_count) == (6, 6)
        assert len(np.unique(g.components())) == 2


class TestClustering:
    def test_recovers_cliques(self):
        p = spectral_cluster(make_4cliques(), 4, seed=0)
        truth = np.repeat(np.arange(4), 25)
        for c in range(4):
            assert len(np.unique(truth[p.members(c)])) == 1
        assert sorted(np.bincount(p.assignment)) == [25] * 4

    def test_extremes(self):
        g = make_4cliques(2, 3)
        assert spectral_cluster(g, 1).m == 1
        np.testing.assert_array_equal(spectral_cluster(g, 6).assignment, np.arange(6))
        with pytest.raises(ValueError):
            spectral_cluster(g, 7)

    def test_deterministic(self):
        g = inject_graph_noise(make_4cliques(), 200, seed=3)
        a = spectral_cluster(g, 7, seed=11).assignment
        np.testing.assert_array_equal(a, spectral_cluster(g, 7, seed=11).assignment)

    def test_partition_validation(self):
        with pytest.raises(ValueError):
            Partition(np.array([0, 2]), 2)
        p = Partition.from_labels([7, 7, 3, 9])
        np.testing.assert_array_equal(p.assignment, [0, 0, 1, 2])


class TestMacroBlock:
    def test_macro_one_cluster(self):
        g = make_4cliques()
        mg, node_of = macro_graph(g, Partition(np.zeros(100, int), 1))
        assert (mg.n, mg.edge_count) == (1, 0)
        assert np.all(node_of == 0)

    def test_macro_singletons(self):
        g = inject_graph_noise(make_4cliques(2, 5), 6, seed=0)
        mg, _ = macro_graph(g, Partition(np.arange(10), 10))
        assert mg.edges == g.edges

    def test_macro_counts_crossing_edges(self):
        g = make_4cliques()
        extra = dict(g.edges)
        extra.update({(0, 25): 1.0, (1, 30): 1.0, (2, 49): 1.0})
        g = UserGraph(100, extra)
        mg, _ = macro_graph(g, Partition(np.repeat(np.arange(4), 25), 4))
        assert mg.edges == {(0, 1): 3.0}
        assert mg.total_weight == 3

    def test_block_singletons_and_single_cluster(self):
        g = make_4cliques(2, 4)
        assert block_graph(g, Partition(np.arange(8), 8)).edge_count == 0
        assert block_graph(g, Partition(np.zeros(8, int), 1)).edges == g.edges

    def test_block_removes_noise_between_cliques(self):
        g = make_4cliques()
        noisy = inject_graph_noise(g, 500, seed=5)
        truth = Partition(np.repeat(np.arange(4), 25), 4)
        blocked = block_graph(noisy, truth)
        assert set(blocked.edges) == set(noisy.edges) & set(g.edges)

    @settings(max_examples=30, deadline=None)
    @given(graphs(), st.integers(1, 4), st.integers(0, 1000))
    def test_invariants(self, g, m, seed):
        m = min(m, g.n)
        labels = np.random.default_rng(seed).integers(m, size=g.n)
        p = Partition.from_labels(labels)
        a = p.assignment
        crossing = sum(1 for i, j in g.edges if a[i] != a[j])
        assert set(block_graph(g, p).edges) <= set(g.edges)
        assert macro_graph(g, p)[0].total_weight == crossing


class TestFiles:
    def test_graph_roundtrip(self, tmp_path):
        g = UserGraph.from_edges(5, [(0, 1), (3, 4, 2.5)])
        write_graph(g, tmp_path / "g.tsv")
        text = (tmp_path / "g.tsv").read_text()
        assert text.splitlines()[0] == "nodes 5"
        back = read_graph(tmp_path / "g.tsv")
        assert back == g

    def test_graph_comments_and_errors(self, tmp_path):
        f = tmp_path / "g.tsv"
        f.write_text("# comment\nnodes 3\n0\t1\n1\t2\t0.5\n")
        assert read_graph(f).edges == {(0, 1): 1.0, (1, 2): 0.5}
        f.write_text("nodes 3\n0\tx\n")
        with pytest.raises(ValueError, match=":2:"):
            read_graph(f)

    def test_partition_roundtrip(self, tmp_path):
        p = Partition(np.array([0, 1, 0, 2]), 3)
        write_partition(p, tmp_path / "p.tsv")
        np.testing.assert_array_equal(read_partition(tmp_path / "p.tsv").assignment,
                                      p.assignment)
