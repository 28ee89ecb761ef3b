"""Pairwise distance and Gram matrices, and k-means with barycenter centroids."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .barycenter import BarycenterConfig, fngw_barycenter
from .distance import FngwParams, fngw_distance
from .graph import SolverError, ValidationError, validate_graph


def _content_key(g):
    return (g.n, g.features.tobytes(), g.structure.tobytes(), g.edges.tobytes(), g.weights.tobytes())


def _pair_distance(a, b, params):
    # solve in an orientation fixed by content, so dataset order cannot change the value
    if _content_key(b) < _content_key(a):
        a, b = b, a
    value, _, trace = fngw_distance(a, b, params)
    return value, len(trace) - 1


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def pairwise_distance_matrix(dataset, params=None, threads=1):
    """Symmetric FNGW distance matrix with a zero diagonal.

    Each unordered pair is solved once. Returns the matrix and a dict
    mapping ``(i, j)`` (``i < j``) to ``{"value", "iterations"}``.
    """
    params = params or FngwParams()
    if not dataset:
        raise ValidationError("empty dataset")
    for g in dataset:
        validate_graph(g)
    n = len(dataset)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def solve(pair):
        i, j = pair
        try:
            return _pair_distance(dataset[i], dataset[j], params)
        except SolverError as exc:
            raise SolverError(f"pair ({i}, {j}): {exc}") from exc

    results = _map(solve, pairs, threads)
    D = np.zeros((n, n))
    meta = {}
    for (i, j), (value, iters) in zip(pairs, results):
        D[i, j] = D[j, i] = value
        meta[(i, j)] = {"value": value, "iterations": iters}
    return D, meta


def gram_matrix(dataset, params=None, gamma_kernel=1.0, threads=1):
    """``K_ij = exp(-gamma_kernel * FNGW(g_i, g_j))`` with unit diagonal."""
    if not gamma_kernel > 0:
        raise ValidationError("gamma_kernel must be positive")
    D, _ = pairwise_distance_matrix(dataset, params, threads)
    return np.exp(-gamma_kernel * D)


@dataclass(frozen=True)
class KMeansConfig:
    max_iters: int = 10
    bary_iters: int = 10
    seed: int = 0
    threads: int = 1


def _proxy(g):
    # cheap summary: mean node feature, mean structure entry, mean edge feature
    return np.concatenate([g.features.mean(0), [g.structure.mean()], g.edges.reshape(-1, g.n_edge_features).mean(0)])


def farthest_point_seeds(dataset, k, seed):
    """Seeded farthest-point choice of ``k`` distinct members over the summary proxy."""
    X = np.stack([_proxy(g) for g in dataset])
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(dataset)))]
    dist = np.sum((X - X[chosen[0]]) ** 2, 1)
    for _ in range(k - 1):
        dist[chosen] = -1.0
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, 1))
    return chosen


def kmeans_cluster(dataset, k, centroid_size, params=None, config=None):
    """Lloyd iterations with FNGW assignments and barycenter centroids.

    Centroid updates and assignment distances are warm-started from the
    couplings of the previous step, so the inertia never increases beyond
    solver round-off.

    Returns
    -------
    assignments : ndarray of int
    centroids : list of Graph
    inertia_trace : list of float
        Sum of assignment distances after every assignment step.
    """
    params = params or FngwParams()
    config = config or KMeansConfig()
    N = len(dataset)
    if k < 1 or N < k:
        raise ValidationError(f"need 1 <= k <= dataset size, got k={k} for {N} graphs")
    for g in dataset:
        validate_graph(g)

    def self_barycenter(g):
        cfg = BarycenterConfig(n=centroid_size, outer_iters=config.bary_iters, seed=config.seed)
        return fngw_barycenter([g], params, cfg)[0]

    centroids = [self_barycenter(dataset[i]) for i in farthest_point_seeds(dataset, k, config.seed)]
    assign = np.full(N, -1)
    plans = [None] * N
    trace = []
    for it in range(config.max_iters):
        def distances(i):
            row = []
            for c, C in enumerate(centroids):
                value, plan, _ = fngw_distance(C, dataset[i], params)
                if c == assign[i] and plans[i] is not None:
                    warm, warm_plan, _ = fngw_distance(C, dataset[i], params, init_plan=plans[i])
                    if warm < value:
                        value, plan = warm, warm_plan
                row.append((value, plan))
            return row

        rows = _map(distances, range(N), config.threads)
        values = np.array([[v for v, _ in row] for row in rows])
        new = np.argmin(values, axis=1)
        changed = not np.array_equal(new, assign)
        assign = new
        plans = [rows[i][assign[i]][1] for i in range(N)]
        best = values[np.arange(N), assign]
        trace.append(float(best.sum()))
        if not changed or it == config.max_iters - 1:
            break
        for c in range(k):
            if not np.any(assign == c):
                # reseed from the worst-assigned sample among clusters that can spare one
                sizes = np.bincount(assign, minlength=k)
                donors = np.flatnonzero(sizes[assign] > 1)
                worst = int(donors[np.argmax(best[donors])])
                assign[worst] = c
                best[worst] = 0.0
                centroids[c] = self_barycenter(dataset[worst])
                plans[worst] = None
        for c in range(k):
            members = np.flatnonzero(assign == c)
            init_plans = [plans[i] for i in members]
            if any(pl is None for pl in init_plans):
                init_plans = None
            cfg = BarycenterConfig(n=centroid_size, outer_iters=config.bary_iters, seed=config.seed,
                                   init=centroids[c])
            bary, _, log = fngw_barycenter([dataset[i] for i in members], params, cfg,
                                           init_plans=init_plans, log=True)
            centroids[c] = bary
            for i, pl in zip(members, log["plans"]):
                plans[i] = pl
    return assign, centroids, trace
