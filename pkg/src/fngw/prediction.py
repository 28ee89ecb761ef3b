"""Kernel ridge surrogate for graph-valued outputs.

Training outputs are weighted by ridge coefficients computed from an input
kernel; the prediction is the FNGW barycenter of the most heavily weighted
outputs, ranked against a candidate set at decode time.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .barycenter import BarycenterConfig, fngw_barycenter
from .distance import FngwParams, fngw_distance
from .graph import Graph, SolverError, ValidationError, validate_graph


@dataclass(frozen=True)
class PredictionModel:
    gram_train: np.ndarray
    ridge_lambda: float
    train_outputs: tuple
    m_out: int
    top_weights: int = 5
    decode_params: FngwParams = FngwParams()
    bary_iters: int = 20
    seed: int = 0

    def __post_init__(self):
        K = np.asarray(self.gram_train, dtype=np.float64)
        object.__setattr__(self, "gram_train", K)
        object.__setattr__(self, "train_outputs", tuple(self.train_outputs))
        n = len(self.train_outputs)
        if K.shape != (n, n):
            raise ValidationError(f"gram matrix shape {K.shape} does not match {n} training outputs")
        if not np.all(np.isfinite(K)):
            raise ValidationError("gram matrix has non-finite entries")
        if n and np.abs(K - K.T).max() > 1e-9:
            raise ValidationError("gram matrix is not symmetric")
        if not self.ridge_lambda > 0:
            raise ValidationError("ridge_lambda must be positive")
        if self.m_out < 1 or self.top_weights < 1:
            raise ValidationError("m_out and top_weights must be positive")


def gaussian_kernel(X, Y, bandwidth):
    """``exp(-||x - y||^2 / (2 bandwidth^2))`` between rows of ``X`` and ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    d2 = np.sum(X ** 2, 1)[:, None] + np.sum(Y ** 2, 1)[None] - 2 * X @ Y.T
    return np.exp(-np.maximum(d2, 0.0) / (2 * bandwidth ** 2))


def ridge_weights(model, k_x):
    """Solve ``(K + n lambda I) gamma = k_x`` by Cholesky."""
    K = model.gram_train
    n = K.shape[0]
    k_x = np.asarray(k_x, dtype=np.float64)
    if k_x.shape != (n,):
        raise ValidationError(f"kernel column must have length {n}")
    system = K + n * model.ridge_lambda * np.eye(n)
    try:
        factor = cho_factor(system, lower=True)
    except LinAlgError:
        smallest = np.linalg.eigvalsh(system)[0]
        raise SolverError(f"Cholesky factorization failed (smallest eigenvalue {smallest:.3g})") from None
    return cho_solve(factor, k_x)


def _support_weights(gamma, top):
    order = np.argsort(-gamma, kind="stable")[:top]
    lam = np.maximum(gamma[order], 0.0)
    if lam.sum() <= 0:
        raise ValidationError("all surrogate weights are nonpositive")
    return order, lam / lam.sum()


def predict_relaxed(model, k_x):
    """Barycenter over the ``top_weights`` best-weighted training outputs, uniform on ``m_out`` nodes."""
    gamma = ridge_weights(model, k_x)
    idx, lam = _support_weights(gamma, model.top_weights)
    keep = lam > 0
    graphs = [model.train_outputs[i] for i in idx[keep]]
    cfg = BarycenterConfig(n=model.m_out, lambdas=lam[keep], outer_iters=model.bary_iters, seed=model.seed)
    bary, _ = fngw_barycenter(graphs, model.decode_params, cfg)
    return bary


def decode_candidates(relaxed, candidates, params=None):
    """Rank candidates by FNGW to ``relaxed``; failed candidates rank last with value inf.

    Returns a list of ``(index, value)`` sorted by value, then index.
    """
    params = params or FngwParams()
    if not candidates:
        raise ValidationError("empty candidate set")
    validate_graph(relaxed)
    scored = []
    for i, c in enumerate(candidates):
        try:
            value = fngw_distance(c, relaxed, params)[0]
        except (SolverError, ValidationError):
            value = np.inf
        scored.append((i, float(value)))
    scored.sort(key=lambda t: (t[1], t[0]))
    return scored


def top_k_accuracy(rankings, truths, k):
    if k < 1:
        raise ValidationError("k must be at least 1")
    if len(rankings) != len(truths):
        raise ValidationError("one truth index is needed per ranking")
    if not rankings:
        raise ValidationError("no rankings given")
    hits = 0
    for ranking, truth in zip(rankings, truths):
        top = [r[0] if isinstance(r, tuple) else r for r in ranking[:k]]
        hits += truth in top
    return hits / len(rankings)


def discretize(g, feature_values=None, edge_values=None, threshold=0.5):
    """Round a relaxed graph: threshold the structure, snap feature rows to the nearest allowed rows.

    ``feature_values`` (k, S) and ``edge_values`` (k, T) list allowed rows;
    ``None`` leaves that block unchanged.
    """
    A = (g.structure >= threshold).astype(np.float64)
    F = g.features
    if feature_values is not None:
        V = np.asarray(feature_values, dtype=np.float64)
        d = ((F[:, None, :] - V[None]) ** 2).sum(-1)
        F = V[np.argmin(d, axis=1)]
    E = g.edges
    if edge_values is not None:
        V = np.asarray(edge_values, dtype=np.float64)
        d = ((E[:, :, None, :] - V[None, None]) ** 2).sum(-1)
        E = V[np.argmin(d, axis=2)]
    return Graph(F, A, E, g.weights)
