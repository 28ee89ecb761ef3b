import numpy as np
import pytest

from fngw.distance import FngwParams, fngw_distance
from fngw.graph import Graph, SolverError, ValidationError, validate_graph
from fngw.prediction import (PredictionModel, decode_candidates, discretize, gaussian_kernel, predict_relaxed,
                             ridge_weights, top_k_accuracy)
from oracles import random_graph

PARAMS = FngwParams(alpha=0.3, beta=0.3, rel_tol=1e-7)


def model_with(K, lam, outputs=None, m_out=3, **kw):
    outputs = outputs or [Graph.from_arrays(np.eye(1), features=[[float(i)]], edges=np.zeros((1, 1, 1)))
                          for i in range(len(K))]
    return PredictionModel(np.asarray(K, float), lam, outputs, m_out, decode_params=PARAMS, **kw)


class TestRidge:
    def test_diagonal(self):
        gamma = ridge_weights(model_with(np.eye(4), 0.25), np.eye(4)[1])
        np.testing.assert_allclose(gamma, [0, 0.5, 0, 0], atol=1e-15)

    def test_large_lambda(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(6, 2))
        K = gaussian_kernel(X, X, 1.0)
        k = gaussian_kernel(rng.normal(size=(1, 2)), X, 1.0)[0]
        gamma = ridge_weights(model_with(K, 1e6), k)
        limit = k / (6 * 1e6)
        assert np.linalg.norm(gamma - limit) <= 1e-6 * np.linalg.norm(limit)

    def test_residual(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 51))
            B = rng.normal(size=(n, n))
            K = B @ B.T / n
            lam = 10 ** rng.uniform(-4, 0)
            k = rng.normal(size=n)
            gamma = ridge_weights(model_with(K, lam), k)
            assert np.linalg.norm((K + n * lam * np.eye(n)) @ gamma - k) <= 1e-9

    def test_factorization_failure(self):
        K = -10 * np.eye(3)
        with pytest.raises(SolverError, match="smallest eigenvalue"):
            ridge_weights(model_with(K, 0.1), np.ones(3))

    def test_model_validation(self):
        with pytest.raises(ValidationError):
            model_with(np.array([[1, 0.5], [0, 1]]), 0.1)
        with pytest.raises(ValidationError):
            model_with(np.eye(2), 0.0)


class TestPredict:
    def test_self_prediction(self):
        rng = np.random.default_rng(2)
        outputs = [random_graph(rng, 4, uniform=True) for _ in range(5)]
        X = rng.normal(size=(5, 3)) * 3
        K = gaussian_kernel(X, X, 1.0)
        model = model_with(K, 1e-9, outputs, m_out=4, bary_iters=100)
        bary = predict_relaxed(model, K[:, 2])
        assert fngw_distance(bary, outputs[2], PARAMS)[0] <= 1e-4

    def test_single_support(self):
        rng = np.random.default_rng(3)
        outputs = [random_graph(rng, 3, uniform=True) for _ in range(3)]
        model = model_with(np.eye(3), 0.1, outputs, m_out=3, top_weights=1, bary_iters=100)
        bary = predict_relaxed(model, np.array([0.1, 0.9, 0.3]))
        validate_graph(bary)
        np.testing.assert_allclose(bary.weights, np.full(3, 1 / 3))
        assert fngw_distance(bary, outputs[1], PARAMS)[0] <= 1e-6

    def test_identical_pair(self):
        rng = np.random.default_rng(4)
        g = random_graph(rng, 4, uniform=True)
        model = model_with(np.eye(2), 0.1, [g, g], m_out=4, bary_iters=100)
        bary = predict_relaxed(model, np.ones(2))
        assert fngw_distance(bary, g, PARAMS)[0] <= 1e-6

    def test_all_nonpositive(self):
        with pytest.raises(ValidationError, match="nonpositive"):
            predict_relaxed(model_with(np.eye(3), 0.1), -np.ones(3))


class TestDecode:
    def test_self_ranks_first(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 4, uniform=True)
        cands = [random_graph(rng, 4), g, random_graph(rng, 5)]
        ranking = decode_candidates(g, cands, PARAMS)
        assert ranking[0][0] == 1 and ranking[0][1] <= 1e-9
        values = [v for _, v in ranking]
        assert values == sorted(values)

    def test_single_candidate(self):
        g = random_graph(np.random.default_rng(6), 3)
        assert decode_candidates(g, [g], PARAMS)[0][0] == 0

    def test_duplicate_loser_keeps_order(self):
        rng = np.random.default_rng(7)
        g = random_graph(rng, 4)
        cands = [random_graph(rng, 4) for _ in range(4)]
        base = decode_candidates(g, cands, PARAMS)
        loser = base[-1][0]
        extended = decode_candidates(g, cands + [cands[loser]], PARAMS)
        assert [i for i, _ in extended if i != len(cands)] == [i for i, _ in base]

    def test_failed_candidate_last(self):
        rng = np.random.default_rng(8)
        g = random_graph(rng, 3, S=2)
        ranking = decode_candidates(g, [random_graph(rng, 3, S=1), random_graph(rng, 3, S=2)], PARAMS)
        assert ranking[-1] == (0, np.inf)

    def test_empty(self):
        with pytest.raises(ValidationError):
            decode_candidates(random_graph(np.random.default_rng(9), 2), [], PARAMS)


class TestTopK:
    def test_truth_first(self):
        rankings = [[2, 0, 1], [1, 2, 0]]
        for k in (1, 2, 3):
            assert top_k_accuracy(rankings, [2, 1], k) == 1.0

    def test_k_beyond_size(self):
        assert top_k_accuracy([[0, 1], [1, 0]], [1, 1], 5) == 1.0

    def test_reversed(self):
        rankings = [[3, 2, 1, 0]] * 4
        assert top_k_accuracy(rankings, [0] * 4, 1) == 0.0

    def test_monotone(self):
        rng = np.random.default_rng(10)
        rankings = [list(rng.permutation(8)) for _ in range(20)]
        truths = list(rng.integers(0, 8, 20))
        acc = [top_k_accuracy(rankings, truths, k) for k in range(1, 9)]
        assert all(a <= b for a, b in zip(acc, acc[1:])) and acc[-1] == 1.0

    def test_errors(self):
        with pytest.raises(ValidationError):
            top_k_accuracy([[0]], [0], 0)
        with pytest.raises(ValidationError):
            top_k_accuracy([[0]], [0, 1], 1)


def test_discretize():
    g = Graph([[0.2], [0.9]], [[0.1, 0.7], [0.5, 0.49]], np.array([[[0.8, 0.2], [0.4, 0.6]]] * 2), [0.5, 0.5])
    d = discretize(g, feature_values=[[0.0], [1.0]], edge_values=np.eye(2))
    np.testing.assert_array_equal(d.structure, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(d.features, [[0.0], [1.0]])
    np.testing.assert_array_equal(d.edges[0, 0], [1, 0])
    np.testing.assert_array_equal(d.edges[0, 1], [0, 1])
