"""Turning raw labelled graphs into feature matrices and tensors."""

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import ValidationError


def shortest_path_matrix(adjacency, directed=False, strict=False):
    """All-pairs shortest path lengths.

    Zero entries of ``adjacency`` mean "no edge". Unreachable pairs are
    filled with the largest finite distance of the graph, or raise when
    ``strict`` is set.
    """
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ValidationError(f"adjacency must be square, got {adjacency.shape}")
    if not np.all(np.isfinite(adjacency)) or np.any(adjacency < 0):
        raise ValidationError("adjacency entries must be finite and nonnegative")
    D = shortest_path(adjacency, method="D" if adjacency.size else "auto", directed=directed)
    unreachable = ~np.isfinite(D)
    if unreachable.any():
        if strict:
            i, j = np.argwhere(unreachable)[0]
            raise ValidationError(f"node {j} is unreachable from node {i}")
        finite = D[~unreachable]
        D[unreachable] = finite.max() if finite.size else 0.0
    np.fill_diagonal(D, 0.0)
    return D


def wl_relabel(node_labels, adjacencies, iterations):
    """Weisfeiler-Lehman refinement with a dictionary shared by the whole dataset.

    Parameters
    ----------
    node_labels : sequence of sequences of int
        One integer label per node, per graph.
    adjacencies : sequence of array-like
        Graph adjacency matrices; node ``j`` is a neighbour of ``i`` when
        ``adjacency[i, j] != 0``.
    iterations : int
        Number of refinement rounds ``K``.

    Returns
    -------
    list of ndarray, shape (n_i, K + 1)
        Column 0 holds the input labels, column ``k`` the labels after ``k``
        rounds. Compare rows with the Hamming metric.
    """
    if len(node_labels) == 0:
        raise ValidationError("empty dataset")
    if len(node_labels) != len(adjacencies):
        raise ValidationError("one adjacency matrix is needed per label list")
    if iterations < 0:
        raise ValidationError("iterations must be nonnegative")
    current = []
    neighbours = []
    for labels, adj in zip(node_labels, adjacencies):
        labels = np.asarray(labels, dtype=np.int64)
        adj = np.asarray(adj)
        if adj.shape != (len(labels), len(labels)):
            raise ValidationError(f"adjacency shape {adj.shape} does not match {len(labels)} labels")
        if np.any(labels < 0):
            raise ValidationError("labels must be nonnegative integers")
        current.append(labels)
        neighbours.append([np.flatnonzero(row) for row in adj])
    columns = [[c] for c in current]
    for _ in range(iterations):
        table = {}
        refined = []
        for labels, nbrs in zip(current, neighbours):
            new = np.empty_like(labels)
            for i, nb in enumerate(nbrs):
                signature = (int(labels[i]), tuple(sorted(int(x) for x in labels[nb])))
                new[i] = table.setdefault(signature, len(table))
            refined.append(new)
        current = refined
        for cols, labels in zip(columns, current):
            cols.append(labels)
    return [np.stack(cols, axis=1) for cols in columns]


def normalized_laplacian(A):
    """``I - D^-1/2 A D^-1/2``; isolated nodes get an all-zero row."""
    A = np.asarray(A, dtype=np.float64)
    deg = A.sum(1)
    nz = deg > 0
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = -inv_sqrt[:, None] * A * inv_sqrt[None, :]
    L[np.diag_indices_from(L)] += nz
    return L


def laplacian_diffuse(F, A, tau):
    """Heat diffusion ``expm(-tau Lap(A)) @ F`` via a symmetric eigendecomposition."""
    F = np.asarray(F, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if tau < 0:
        raise ValidationError("tau must be nonnegative")
    asym = np.abs(A - A.T).max(initial=0.0)
    if asym > 1e-10:
        raise ValidationError(f"structure must be symmetric (max asymmetry {asym:.3g})")
    if np.any(A < 0):
        raise ValidationError("structure entries must be nonnegative")
    L = normalized_laplacian((A + A.T) / 2)
    evals, evecs = np.linalg.eigh(L)
    return evecs @ (np.exp(-tau * evals)[:, None] * (evecs.T @ F))


def one_hot_edge_tensor(edge_labels, n, vocab_size, empty_edge_vector=None):
    """Edge tensor with one-hot vectors on labelled pairs.

    Parameters
    ----------
    edge_labels : iterable of (i, j, label)
    n : int
    vocab_size : int
    empty_edge_vector : array-like, shape (vocab_size,), optional
        Feature of unlabelled pairs, zeros when omitted. See
        :func:`random_empty_edge_vector` for a seeded random choice.
    """
    if empty_edge_vector is None:
        empty_edge_vector = np.zeros(vocab_size)
    empty_edge_vector = np.asarray(empty_edge_vector, dtype=np.float64)
    if empty_edge_vector.shape != (vocab_size,):
        raise ValidationError(f"empty edge vector must have length {vocab_size}")
    E = np.broadcast_to(empty_edge_vector, (n, n, vocab_size)).copy()
    seen = set()
    for i, j, label in edge_labels:
        if not 0 <= label < vocab_size:
            raise ValidationError(f"edge label {label} out of range [0, {vocab_size})")
        if (i, j) in seen:
            raise ValidationError(f"duplicate label for edge ({i}, {j})")
        seen.add((i, j))
        E[i, j] = 0.0
        E[i, j, label] = 1.0
    return E


def random_empty_edge_vector(vocab_size, seed):
    """Dataset-wide standard normal feature for absent edges."""
    return np.random.default_rng(seed).standard_normal(vocab_size)
