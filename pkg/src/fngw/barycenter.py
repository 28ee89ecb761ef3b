"""FNGW barycenters by block coordinate descent.

Each round updates the couplings to every input graph, then the edge
tensor and node features in closed form, then the structure matrix with
a few proximal gradient steps on the l1-penalised objective.
"""

from dataclasses import dataclass

import numpy as np

from .distance import FngwParams, fngw_distance, fngw_energy
from .graph import Graph, ValidationError, check_histogram, validate_graph
from .lp import TransportPlan


@dataclass(frozen=True)
class BarycenterConfig:
    """Settings of :func:`fngw_barycenter`.

    ``prox_step`` defaults to ``0.9 / (2 beta max(p)^2)``, inside the
    Lipschitz bound of the structure gradient.
    """

    n: int
    weights: np.ndarray | None = None
    lambdas: np.ndarray | None = None
    gamma_sparsity: float = 0.0
    prox_step: float | None = None
    prox_iters: int = 10
    outer_iters: int = 50
    rel_tol: float = 1e-7
    seed: int = 0
    init: Graph | None = None

    def histogram(self):
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        p = check_histogram(self.weights)
        if p.shape != (self.n,):
            raise ValidationError(f"barycenter weights must have length {self.n}")
        return p


def _plan_matrix(pi):
    return pi.matrix if isinstance(pi, TransportPlan) else np.asarray(pi, dtype=np.float64)


def _check_positive(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise ValidationError("barycenter weights must be strictly positive")
    return p


def _simplex_weights(lambdas, k):
    lam = np.full(k, 1.0 / k) if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    if lam.shape != (k,):
        raise ValidationError(f"expected {k} barycentric weights, got {lam.shape}")
    check_histogram(lam, "barycentric weights", tol=1e-9)
    return lam


def update_edge_tensor(graphs, plans, lambdas, p):
    """Closed-form minimiser of the edge term: ``E[t] = sum_k lam_k pi_k E_k[t] pi_k^T / (p p^T)``."""
    p = _check_positive(p)
    T = graphs[0].n_edge_features
    out = np.zeros((T, len(p), len(p)))
    for g, pi, lam in zip(graphs, plans, lambdas):
        pi = _plan_matrix(pi)
        out += lam * np.matmul(np.matmul(pi, g.channels), pi.T)
    out /= np.outer(p, p)[None]
    return np.moveaxis(out, 0, -1)


def update_node_features(graphs, plans, lambdas, p):
    """Weighted barycentric projection ``diag(1/p) sum_k lam_k pi_k F_k``."""
    p = _check_positive(p)
    out = np.zeros((len(p), graphs[0].n_features))
    for g, pi, lam in zip(graphs, plans, lambdas):
        out += lam * (_plan_matrix(pi) @ g.features)
    return out / p[:, None]


def soft_threshold(A, threshold):
    """Proximity operator of ``threshold * ||.||_1``."""
    if threshold < 0:
        raise ValidationError("threshold must be nonnegative")
    A = np.asarray(A, dtype=np.float64)
    return np.sign(A) * np.maximum(0.0, np.abs(A) - threshold)


def structure_target(graphs, plans, lambdas):
    """``sum_k lam_k pi_k A_k pi_k^T``."""
    out = 0.0
    for g, pi, lam in zip(graphs, plans, lambdas):
        pi = _plan_matrix(pi)
        out = out + lam * (pi @ g.structure @ pi.T)
    return out


def default_prox_step(beta, p):
    if beta <= 0:
        return 1.0
    return 0.9 / (2.0 * beta * np.max(p) ** 2)


def update_structure_prox(A_init, graphs, plans, lambdas, p, beta, gamma_sparsity, step=None, iters=10):
    """Proximal gradient steps on ``beta * structure term + gamma ||A||_1``.

    The smooth gradient is ``2 beta sum_k lam_k (A * p p^T - pi_k A_k pi_k^T)``.
    """
    p = np.asarray(p, dtype=np.float64)
    if step is None:
        step = default_prox_step(beta, p)
    if step <= 0:
        raise ValidationError("proximal step must be positive")
    if gamma_sparsity < 0:
        raise ValidationError("gamma_sparsity must be nonnegative")
    pp = np.outer(p, p)
    B = structure_target(graphs, plans, lambdas)
    total = float(np.sum(lambdas))
    A = np.array(A_init, dtype=np.float64)
    for _ in range(iters):
        grad = 2.0 * beta * (total * A * pp - B)
        A = soft_threshold(A - step * grad, step * gamma_sparsity)
    return A


def barycenter_loss(bary, graphs, plans, lambdas, params, gamma_sparsity=0.0):
    """``sum_k lam_k energy(bary, g_k, pi_k) + gamma ||A||_1``."""
    loss = 0.0
    for g, pi, lam in zip(graphs, plans, lambdas):
        loss += lam * fngw_energy(bary, g, params).cost(_plan_matrix(pi))
    return loss + gamma_sparsity * np.abs(bary.structure).sum()


def initial_barycenter(graphs, n, p, seed):
    """Seeded start: node features drawn from the inputs, constant structure and edge tensor."""
    rng = np.random.default_rng(seed)
    pool = np.vstack([g.features for g in graphs])
    rows = rng.choice(len(pool), size=n, replace=len(pool) < n)
    structure_mean = np.mean(np.concatenate([g.structure.ravel() for g in graphs]))
    edge_mean = np.mean(np.concatenate([g.edges.reshape(-1, g.n_edge_features) for g in graphs]), axis=0) \
        if graphs[0].n_edge_features else np.zeros(0)
    A = np.full((n, n), structure_mean)
    E = np.broadcast_to(edge_mean, (n, n, len(edge_mean))).copy()
    return Graph(pool[rows], A, E, p)


def fngw_barycenter(graphs, params=None, config=None, init_plans=None, log=False):
    """FNGW barycenter of ``graphs`` for a fixed node histogram.

    Parameters
    ----------
    graphs : list of Graph
    params : FngwParams
    config : BarycenterConfig
    init_plans : list of TransportPlan or array, optional
        Couplings (barycenter x input) used to warm-start the first round.
    log : bool
        Also return a dict with the final couplings.

    Returns
    -------
    bary : Graph
    loss_trace : list of float
        Objective after every round; non-increasing.
    log : dict, optional
    """
    params = params or FngwParams()
    if config is None:
        raise ValidationError("a BarycenterConfig is required")
    if not graphs:
        raise ValidationError("at least one input graph is required")
    for g in graphs:
        validate_graph(g)
    S, T = graphs[0].n_features, graphs[0].n_edge_features
    if any(g.n_features != S or g.n_edge_features != T for g in graphs):
        raise ValidationError("input graphs disagree on feature dimensions")
    lambdas = _simplex_weights(config.lambdas, len(graphs))
    p = _check_positive(config.histogram())
    step = config.prox_step if config.prox_step is not None else default_prox_step(params.beta, p)
    if config.init is not None:
        bary = config.init.with_weights(p)
        if bary.n != config.n:
            raise ValidationError(f"initial barycenter has {bary.n} nodes, expected {config.n}")
    else:
        bary = initial_barycenter(graphs, config.n, p, config.seed)
    plans = list(init_plans) if init_plans is not None else [None] * len(graphs)

    trace = []
    for _ in range(config.outer_iters):
        plans = [fngw_distance(bary, g, params, init_plan=pi)[1] for g, pi in zip(graphs, plans)]
        E = update_edge_tensor(graphs, plans, lambdas, p)
        if params.node_metric == "sqeuclidean":
            F = update_node_features(graphs, plans, lambdas, p)
        else:
            F = bary.features
        A = update_structure_prox(bary.structure, graphs, plans, lambdas, p, params.beta,
                                  config.gamma_sparsity, step, config.prox_iters)
        bary = Graph(F, A, E, p)
        loss = barycenter_loss(bary, graphs, plans, lambdas, params, config.gamma_sparsity)
        converged = bool(trace) and abs(trace[-1] - loss) <= config.rel_tol * max(abs(trace[-1]), 1e-300)
        trace.append(loss)
        if converged or loss == 0.0:
            break
    if log:
        return bary, trace, {"plans": plans, "lambdas": lambdas}
    return bary, trace
