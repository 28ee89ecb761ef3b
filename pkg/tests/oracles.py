"""Slow, independent reference implementations used only by the tests."""

import itertools

import numpy as np

from fngw.graph import Graph


def random_graph(rng, n, S=2, T=3, symmetric=False, uniform=False):
    F = rng.normal(size=(n, S))
    A = rng.random((n, n))
    E = rng.normal(size=(n, n, T))
    if symmetric:
        A = (A + A.T) / 2
        E = (E + E.transpose(1, 0, 2)) / 2
    p = np.full(n, 1.0 / n) if uniform else rng.dirichlet(np.full(n, 2.0))
    return Graph(F, A, E, p)


def random_plan(rng, n, m):
    """A random matrix, not necessarily feasible."""
    return rng.random((n, m)) / (n * m)


def feasible_plan(rng, p, q, mix=None):
    """Convex mix of the product coupling and a north-west corner vertex."""
    nw = north_west_corner(p, q)
    t = rng.random() if mix is None else mix
    return t * np.outer(p, q) + (1 - t) * nw


def north_west_corner(p, q):
    p, q = np.array(p, dtype=float), np.array(q, dtype=float)
    pi = np.zeros((len(p), len(q)))
    i = j = 0
    while i < len(p) and j < len(q):
        x = min(p[i], q[j])
        pi[i, j] = x
        p[i] -= x
        q[j] -= x
        if p[i] <= 1e-15 and i < len(p) - 1:
            i += 1
        elif j < len(q) - 1:
            j += 1
        else:
            i += 1
    return pi


def contraction_loops(X1, X2, pi):
    """sum_{k,l} ||X1[i,k] - X2[j,l]||^2 pi[k,l] by four nested loops."""
    if X1.ndim == 2:
        X1, X2 = X1[..., None], X2[..., None]
    n, m = X1.shape[0], X2.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(n):
                for l in range(m):
                    d = X1[i, k] - X2[j, l]
                    s += float(d @ d) * pi[k, l]
            out[i, j] = s
    return out


def energy_loops(g1, g2, pi, alpha, beta):
    """Direct quadruple-sum energy."""
    n, m = g1.n, g2.n
    total = 0.0
    for i in range(n):
        for j in range(m):
            d = g1.features[i] - g2.features[j]
            total += (1 - alpha - beta) * float(d @ d) * pi[i, j]
            for k in range(n):
                for l in range(m):
                    e = g1.edges[i, k] - g2.edges[j, l]
                    total += (beta * (g1.structure[i, k] - g2.structure[j, l]) ** 2
                              + alpha * float(e @ e)) * pi[i, j] * pi[k, l]
    return total


def permutation_minimum(g1, g2, alpha, beta):
    """Global minimum of the energy over permutation plans (equal sizes, uniform weights)."""
    n = g1.n
    best = np.inf
    for perm in itertools.permutations(range(n)):
        pi = np.zeros((n, n))
        pi[np.arange(n), perm] = 1.0 / n
        best = min(best, energy_loops(g1, g2, pi, alpha, beta))
    return best


def floyd_warshall(W):
    n = len(W)
    D = np.where(W > 0, W, np.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if D[i, k] + D[k, j] < D[i, j]:
                    D[i, j] = D[i, k] + D[k, j]
    return D


def expm_taylor(M, terms=30):
    out = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out
