"""Synthetic directed graphs with coloured edges.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64);
no global state is touched.
"""

import numpy as np

from .graph import Graph, ValidationError
from .preprocess import one_hot_edge_tensor

# edge colour channels
CIRCLE_CHANNELS = ("none", "blue", "green")
SBM_CHANNELS = ("none", "black", "blue", "green")


def _colour_tensor(n, edges, channels):
    # pairs without an edge carry the one-hot "none" channel
    empty = np.zeros(len(channels))
    empty[0] = 1.0
    return one_hot_edge_tensor(edges, n, len(channels), empty)


def circle_graph(n, noise_sigma=0.3, skip_edge_prob=0.5, rng=None):
    """One circle graph: sine node signal, blue ascending / green descending edges."""
    if n < 3:
        raise ValidationError("circle graphs need at least 3 nodes")
    if not 0 <= skip_edge_prob <= 1:
        raise ValidationError("skip_edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    features = np.sin(2 * np.pi * np.arange(n) / n)
    if noise_sigma > 0:
        features = features + rng.normal(0.0, noise_sigma, n)
    A = np.zeros((n, n))
    edges = []
    for i in range(n):
        j = (i + 1) % n
        edges += [(i, j, 1), (j, i, 2)]
    for i in range(n):
        j = (i + 2) % n
        if rng.random() < skip_edge_prob:
            edges += [(i, j, 1), (j, i, 2)]
    for i, j, _ in edges:
        A[i, j] = 1.0
    E = _colour_tensor(n, edges, CIRCLE_CHANNELS)
    return Graph.from_arrays(A, features=features[:, None], edges=E)


def generate_circle_graphs(count=8, node_range=(10, 20), noise_sigma=0.3, skip_edge_prob=0.5, seed=0):
    """Circle graphs with node counts drawn uniformly in ``node_range`` (inclusive)."""
    lo, hi = node_range
    if lo < 3 or hi < lo:
        raise ValidationError(f"invalid node range {node_range}")
    rng = np.random.default_rng(seed)
    return [circle_graph(int(rng.integers(lo, hi + 1)), noise_sigma, skip_edge_prob, rng)
            for _ in range(count)]


def _block_sizes(block_spec, node_count):
    if np.isscalar(block_spec):
        k = int(block_spec)
        if k < 1 or node_count is None or node_count < k:
            raise ValidationError(f"cannot split {node_count} nodes into {k} blocks")
        base, extra = divmod(node_count, k)
        return [base + (b < extra) for b in range(k)]
    sizes = [int(s) for s in block_spec]
    if not sizes or min(sizes) < 1:
        raise ValidationError("block sizes must be positive")
    if node_count is not None and sum(sizes) != node_count:
        raise ValidationError(f"block sizes sum to {sum(sizes)}, expected {node_count}")
    return sizes


def generate_sbm_graph(block_spec, node_count=None, inter_block_prob=0.3, seed=0,
                       features="block", feature_sigma=1.0):
    """Stochastic block model graph with black intra-block edges.

    Blocks are complete (black edges). Each pair of nodes in consecutive
    blocks ``b, b + 1`` is linked with probability ``inter_block_prob`` by
    a blue edge towards the higher block and a green edge back.

    Parameters
    ----------
    block_spec : int or sequence of int
        Number of equal blocks, or explicit block sizes.
    node_count : int, optional
        Total nodes; required when ``block_spec`` is an int.
    features : {"block", "gaussian"}
        Node feature is the block index, or a ``N(block index, feature_sigma^2)`` draw.
    """
    if not 0 <= inter_block_prob <= 1:
        raise ValidationError("inter_block_prob must lie in [0, 1]")
    sizes = _block_sizes(block_spec, node_count)
    rng = np.random.default_rng(seed)
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = len(block)
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and block[i] == block[j]:
                edges.append((i, j, 1))
    for b in range(len(sizes) - 1):
        lower = np.flatnonzero(block == b)
        upper = np.flatnonzero(block == b + 1)
        for i in lower:
            for j in upper:
                if rng.random() < inter_block_prob:
                    edges += [(int(i), int(j), 2), (int(j), int(i), 3)]
    A = np.zeros((n, n))
    for i, j, _ in edges:
        A[i, j] = 1.0
    E = _colour_tensor(n, edges, SBM_CHANNELS)
    if features == "block":
        F = block.astype(float)
    elif features == "gaussian":
        F = rng.normal(block.astype(float), feature_sigma)
    else:
        raise ValidationError(f"unknown feature mode {features!r}")
    return Graph.from_arrays(A, features=F[:, None], edges=E)
