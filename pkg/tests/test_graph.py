"""
Unit tests for poissonet graph metrics.
"""

import itertools
import os
import sys
import unittest
from collections import deque

import numpy as np

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from poissonet import graph


def directed(n, edges):
    adj = np.zeros((n, n), dtype=int)
    for i, j in edges:
        adj[i, j] = 1
    return adj


def bfs_counts(adj, source):
    """Distances and shortest-path counts from source."""
    n = adj.shape[0]
    dist = [None] * n
    sigma = [0] * n
    dist[source] = 0
    sigma[source] = 1
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(adj[v]):
            if dist[w] is None:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
    return dist, sigma


def betweenness_oracle(adj):
    """Pair-by-pair shortest path enumeration: sum of sigma_st(v) / sigma_st."""
    n = adj.shape[0]
    tables = [bfs_counts(adj, s) for s in range(n)]
    scores = np.zeros(n)
    for s, t in itertools.permutations(range(n), 2):
        dist_s, sigma_s = tables[s]
        if dist_s[t] is None:
            continue
        for v in range(n):
            if v in (s, t) or dist_s[v] is None:
                continue
            dist_v, sigma_v = tables[v]
            if dist_v[t] is not None and dist_s[v] + dist_v[t] == dist_s[t]:
                scores[v] += sigma_s[v] * sigma_v[t] / sigma_s[t]
    return scores


class TestComponents(unittest.TestCase):
    """Weakly connected components and out degree."""

    def test_empty_graph_singletons(self):
        self.assertEqual(graph.weakly_connected_components(np.zeros((3, 3), dtype=int)), [{0}, {1}, {2}])

    def test_directed_path_is_one_component(self):
        self.assertEqual(graph.weakly_connected_components(directed(3, [(0, 1), (1, 2)])), [{0, 1, 2}])

    def test_two_disjoint_edges(self):
        components = graph.weakly_connected_components(directed(4, [(0, 1), (3, 2)]))
        self.assertEqual(components, [{0, 1}, {2, 3}])

    def test_components_partition_nodes(self):
        rng = np.random.default_rng(0)
        adj = (rng.random((12, 12)) < 0.1).astype(int)
        np.fill_diagonal(adj, 0)
        components = graph.weakly_connected_components(adj)
        nodes = sorted(v for c in components for v in c)
        self.assertEqual(nodes, list(range(12)))
        sizes = [len(c) for c in components]
        self.assertEqual(sizes, sorted(sizes, reverse=True))

    def test_out_degree(self):
        np.testing.assert_array_equal(graph.out_degree(directed(4, [(0, 1), (0, 2), (0, 3)])), [3, 0, 0, 0])
        np.testing.assert_array_equal(graph.out_degree(np.zeros((3, 3), dtype=int)), [0, 0, 0])
        complete = np.ones((4, 4), dtype=int) - np.eye(4, dtype=int)
        np.testing.assert_array_equal(graph.out_degree(complete), [3, 3, 3, 3])

    def test_rejects_self_loops(self):
        with self.assertRaises(graph.GraphError):
            graph.out_degree(np.eye(2, dtype=int))


class TestBetweenness(unittest.TestCase):
    """Exact directed betweenness."""

    def test_directed_path(self):
        np.testing.assert_allclose(graph.betweenness(directed(3, [(0, 1), (1, 2)])), [0, 1, 0])

    def test_empty_graph(self):
        np.testing.assert_allclose(graph.betweenness(np.zeros((4, 4), dtype=int)), 0.0)

    def test_out_star_has_no_through_paths(self):
        np.testing.assert_allclose(graph.betweenness(directed(5, [(0, k) for k in range(1, 5)])), 0.0)

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(2, 9))
            adj = (rng.random((n, n)) < rng.uniform(0.1, 0.6)).astype(int)
            np.fill_diagonal(adj, 0)
            with self.subTest(trial=trial):
                np.testing.assert_allclose(graph.betweenness(adj), betweenness_oracle(adj), atol=1e-9)


class TestEigenvectorCentrality(unittest.TestCase):
    """Out-influence eigenvector centrality on the LWCC."""

    def residual(self, adj, scores):
        image = adj @ scores
        top = int(np.argmax(scores))
        eigenvalue = image[top] / scores[top]
        return float(np.max(np.abs(image - eigenvalue * scores)))

    def test_directed_cycle_is_uniform(self):
        scores = graph.eigenvector_centrality(directed(4, [(0, 1), (1, 2), (2, 3), (3, 0)]))
        np.testing.assert_allclose(scores, 1.0)

    def test_driver_is_maximal(self):
        scores = graph.eigenvector_centrality(directed(3, [(0, 1), (0, 2)]))
        self.assertEqual(int(np.argmax(scores)), 0)
        self.assertAlmostEqual(scores[0], 1.0)

    def test_empty_graph_rejected(self):
        with self.assertRaises(graph.GraphError):
            graph.eigenvector_centrality(np.zeros((3, 3), dtype=int))

    def test_nodes_outside_lwcc_score_zero(self):
        adj = directed(5, [(0, 1), (1, 2), (2, 0), (3, 4)])
        scores = graph.eigenvector_centrality(adj)
        np.testing.assert_allclose(scores[3:], 0.0)
        self.assertAlmostEqual(float(scores.max()), 1.0)

    def test_eigen_equation_residual(self):
        cases = {
            "cycle": directed(5, [(i, (i + 1) % 5) for i in range(5)]),
            "complete": np.ones((4, 4), dtype=int) - np.eye(4, dtype=int),
            "bidirected path": directed(4, [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]),
        }
        for name, adj in cases.items():
            with self.subTest(graph=name):
                scores = graph.eigenvector_centrality(adj)
                self.assertAlmostEqual(float(scores.max()), 1.0)
                self.assertLessEqual(self.residual(adj, scores), 1e-8)

    def test_iteration_cap_reported(self):
        with self.assertRaises(graph.CentralityConvergenceError) as ctx:
            graph.eigenvector_centrality(directed(3, [(0, 1), (0, 2)]), max_iter=5)
        self.assertIn("5 iterations", str(ctx.exception))


class TestTprFpr(unittest.TestCase):
    """Benchmark scoring relative to the true edge count."""

    def setUp(self):
        self.truth = directed(6, [(0, 1), (2, 3)])

    def test_perfect_estimate(self):
        self.assertEqual(graph.tpr_fpr(self.truth, self.truth), (1.0, 0.0))

    def test_empty_estimate(self):
        self.assertEqual(graph.tpr_fpr(self.truth, np.zeros((6, 6), dtype=int)), (0.0, 0.0))

    def test_three_times_as_many_edges(self):
        spurious = [(0, 2), (1, 3), (4, 5), (5, 0), (3, 4), (2, 5)]
        estimate = directed(6, [(0, 1), (2, 3)] + spurious)
        self.assertEqual(graph.tpr_fpr(self.truth, estimate), (1.0, 3.0))

    def test_empty_truth_is_undefined(self):
        with self.assertRaises(graph.GraphError):
            graph.tpr_fpr(np.zeros((3, 3), dtype=int), np.zeros((3, 3), dtype=int))

    def test_shape_mismatch(self):
        with self.assertRaises(graph.GraphError):
            graph.tpr_fpr(self.truth, np.zeros((3, 3), dtype=int))

    def test_undirected_matching(self):
        truth = directed(3, [(0, 1), (1, 0)])
        estimate = directed(3, [(1, 0), (1, 2), (2, 1)])
        self.assertEqual(graph.tpr_fpr(truth, estimate, undirected=True), (1.0, 1.0))
        self.assertEqual(graph.tpr_fpr(truth, estimate), (0.5, 1.0))

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        truth = (rng.random((7, 7)) < 0.3).astype(int)
        estimate = (rng.random((7, 7)) < 0.3).astype(int)
        np.fill_diagonal(truth, 0)
        np.fill_diagonal(estimate, 0)
        perm = rng.permutation(7)
        self.assertEqual(
            graph.tpr_fpr(truth, estimate),
            graph.tpr_fpr(truth[np.ix_(perm, perm)], estimate[np.ix_(perm, perm)]),
        )


class TestCentralityReport(unittest.TestCase):
    """Per-node measures and top-k tables."""

    def test_report_shape(self):
        adj = directed(4, [(0, 1), (1, 2), (2, 0), (0, 3)])
        report = graph.centrality_report(adj, ["a", "b", "c", "d"], top=2)
        self.assertEqual([node["label"] for node in report["nodes"]], ["a", "b", "c", "d"])
        self.assertEqual(report["rankings"]["out_degree"][0], "a")
        self.assertEqual(report["rankings"]["betweenness"], ["a", "c", "b", "d"])
        self.assertEqual(len(report["top"]["betweenness"]), 2)
        self.assertEqual(report["top"]["betweenness"][0], {"rank": 1, "label": "a", "value": 3.0})
        self.assertIsNone(report["eigenvector_error"])
        # d has no out-edges, so it influences nothing
        self.assertLess(report["nodes"][3]["eigenvector"], 1e-3)

    def test_edgeless_graph_records_eigenvector_error(self):
        report = graph.centrality_report(np.zeros((2, 2), dtype=int), ["x", "y"])
        self.assertIsNotNone(report["eigenvector_error"])
        self.assertIsNone(report["nodes"][0]["eigenvector"])
        self.assertEqual(report["top"]["eigenvector"], [])

    def test_label_count_must_match(self):
        with self.assertRaises(graph.GraphError):
            graph.centrality_report(np.zeros((2, 2), dtype=int), ["x"])


if __name__ == "__main__":
    unittest.main()
