import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from fngw.apps import KMeansConfig, farthest_point_seeds, gram_matrix, kmeans_cluster, pairwise_distance_matrix
from fngw.barycenter import BarycenterConfig, fngw_barycenter
from fngw.distance import FngwParams, fngw_distance
from fngw.experiments import FAST_PARAMS, clustering_dataset
from fngw.graph import Graph, ValidationError
from oracles import random_graph


def test_gram_identical_single_nodes():
    g = Graph([[1.0]], [[0.0]], [[[0.5]]], [1.0])
    np.testing.assert_array_equal(gram_matrix([g, g, g]), np.ones((3, 3)))


def test_gram_small_gamma():
    rng = np.random.default_rng(0)
    data = [random_graph(rng, int(rng.integers(2, 6))) for _ in range(4)]
    np.testing.assert_allclose(gram_matrix(data, gamma_kernel=1e-12), 1.0, atol=1e-9)


def test_gram_structure():
    rng = np.random.default_rng(1)
    data = [random_graph(rng, int(rng.integers(2, 6))) for _ in range(4)]
    K = gram_matrix(data, gamma_kernel=0.7)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    assert np.all((K > 0) & (K <= 1))


def test_gram_bad_gamma():
    with pytest.raises(ValidationError):
        gram_matrix([random_graph(np.random.default_rng(2), 2)], gamma_kernel=0.0)


def test_pairwise_identical_graphs():
    g = random_graph(np.random.default_rng(3), 4)
    D, meta = pairwise_distance_matrix([g, g])
    assert D[0, 0] == D[1, 1] == 0 and D[0, 1] >= 0
    assert meta[(0, 1)]["value"] == D[0, 1]


def test_pairwise_edge_only():
    rng = np.random.default_rng(4)
    data = [Graph.from_arrays(rng.random((n, n)), edges=rng.normal(size=(n, n, 2))) for n in (3, 4, 5)]
    D, _ = pairwise_distance_matrix(data, FngwParams(alpha=1.0, beta=0.0))
    assert np.all(D >= 0) and np.array_equal(D, D.T)


def test_pairwise_order_invariance():
    rng = np.random.default_rng(5)
    data = [random_graph(rng, int(rng.integers(2, 7))) for _ in range(5)]
    D, _ = pairwise_distance_matrix(data)
    perm = rng.permutation(5)
    Dp, _ = pairwise_distance_matrix([data[i] for i in perm])
    np.testing.assert_allclose(Dp, D[np.ix_(perm, perm)], atol=1e-9)


def test_pairwise_threads_identical():
    rng = np.random.default_rng(6)
    data = [random_graph(rng, int(rng.integers(2, 7))) for _ in range(5)]
    D1, _ = pairwise_distance_matrix(data, threads=1)
    D3, _ = pairwise_distance_matrix(data, threads=3)
    assert D1.tobytes() == D3.tobytes()


def test_farthest_point_distinct():
    rng = np.random.default_rng(7)
    data = [random_graph(rng, 3) for _ in range(6)]
    seeds = farthest_point_seeds(data, 6, 0)
    assert sorted(seeds) == list(range(6))


def test_kmeans_single_cluster_reduces_to_barycenter():
    rng = np.random.default_rng(8)
    data = [random_graph(rng, int(rng.integers(3, 6))) for _ in range(5)]
    cfg = KMeansConfig(max_iters=5, bary_iters=8, seed=3)
    assign, (centroid,), trace = kmeans_cluster(data, 1, 4, FAST_PARAMS, cfg)
    assert np.all(assign == 0)
    # the same barycenter call made directly
    start = fngw_barycenter([data[farthest_point_seeds(data, 1, 3)[0]]], FAST_PARAMS,
                            BarycenterConfig(n=4, outer_iters=8, seed=3))[0]
    plans = [fngw_distance(start, g, FAST_PARAMS)[1] for g in data]
    direct = fngw_barycenter(data, FAST_PARAMS, BarycenterConfig(n=4, outer_iters=8, seed=3, init=start),
                             init_plans=plans)[0]
    assert centroid == direct


def test_kmeans_each_graph_own_cluster():
    rng = np.random.default_rng(9)
    data = [random_graph(rng, 4, uniform=True) for _ in range(4)]
    assign, centroids, trace = kmeans_cluster(data, 4, 4, FAST_PARAMS, KMeansConfig(bary_iters=50))
    assert sorted(assign) == [0, 1, 2, 3]
    assert trace[-1] <= 1e-6


def test_kmeans_errors():
    g = random_graph(np.random.default_rng(10), 3)
    with pytest.raises(ValidationError):
        kmeans_cluster([g], 2, 3)


@pytest.mark.slow
def test_kmeans_sbm_groups():
    graphs, labels = clustering_dataset(seed=0)
    assign, _, trace = kmeans_cluster(graphs, 3, 20, FAST_PARAMS, KMeansConfig(seed=0))
    assert adjusted_rand_score(labels, assign) == 1.0
    assert np.all(np.diff(trace) <= 1e-6)
