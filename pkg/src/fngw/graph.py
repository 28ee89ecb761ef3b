"""Graph container and validation.

A graph is the quadruple (node features, structure matrix, edge-feature
tensor, node weights). Structure and edge features may be asymmetric.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

NODE_METRICS = ("sqeuclidean", "hamming")

HISTOGRAM_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract."""


class SolverError(RuntimeError):
    """Raised when a numerical solver fails to produce a certified result."""


def _readonly(x, ndim):
    x = np.array(x, dtype=np.float64)
    if x.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array, got shape {x.shape}")
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class Graph:
    """Attributed directed graph.

    Parameters
    ----------
    features : array-like, shape (n, S)
        Node features. ``S`` may be 0.
    structure : array-like, shape (n, n)
        Pairwise structure matrix (adjacency, shortest paths, ...).
    edges : array-like, shape (n, n, T)
        Edge-feature tensor. ``T`` may be 0.
    weights : array-like, shape (n,)
        Node histogram.

    Arrays are copied and made read-only on construction; nothing is
    validated here, see :func:`validate_graph`.
    """

    features: np.ndarray
    structure: np.ndarray
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _readonly(self.features, 2))
        object.__setattr__(self, "structure", _readonly(self.structure, 2))
        object.__setattr__(self, "edges", _readonly(self.edges, 3))
        object.__setattr__(self, "weights", _readonly(self.weights, 1))

    @classmethod
    def from_arrays(cls, structure, features=None, edges=None, weights=None):
        """Build a graph filling absent parts with empty features / uniform weights."""
        structure = np.asarray(structure, dtype=np.float64)
        n = structure.shape[0]
        if features is None:
            features = np.zeros((n, 0))
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        if edges is None:
            edges = np.zeros((n, n, 0))
        if weights is None:
            weights = np.full(n, 1.0 / n)
        return cls(features, structure, edges, weights)

    @property
    def n(self):
        return self.structure.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_edge_features(self):
        return self.edges.shape[2]

    @cached_property
    def channels(self):
        """Edge tensor laid out channel-first, shape (T, n, n)."""
        c = np.ascontiguousarray(np.moveaxis(self.edges, -1, 0))
        c.setflags(write=False)
        return c

    def with_weights(self, weights):
        return Graph(self.features, self.structure, self.edges, weights)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in (
                (self.features, other.features),
                (self.structure, other.structure),
                (self.edges, other.edges),
                (self.weights, other.weights),
            )
        )

    __hash__ = None


def check_histogram(p, name="weights", tol=HISTOGRAM_TOL):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{name} contain non-finite entries")
    if np.any(p < 0):
        raise ValidationError(f"{name} have negative entries (min {p.min():.6g})")
    s = p.sum()
    if abs(s - 1.0) > tol:
        raise ValidationError(f"{name} sum {s:.12g}, expected 1")
    return p


def validate_graph(g):
    """Check every invariant of ``g`` and raise :class:`ValidationError` on the first failure."""
    n = g.structure.shape[0]
    if g.structure.shape != (n, n):
        raise ValidationError(f"dimension mismatch: structure has shape {g.structure.shape}")
    if g.features.shape[0] != n:
        raise ValidationError(
            f"dimension mismatch: features have {g.features.shape[0]} rows for {n} nodes")
    if g.edges.shape[:2] != (n, n):
        raise ValidationError(
            f"dimension mismatch: edge tensor has shape {g.edges.shape} for {n} nodes")
    if g.weights.shape != (n,):
        raise ValidationError(
            f"dimension mismatch: weights have shape {g.weights.shape} for {n} nodes")
    if n == 0:
        raise ValidationError("graph has no nodes")
    for name, arr in (("features", g.features), ("structure", g.structure),
                      ("edges", g.edges), ("weights", g.weights)):
        bad = np.argwhere(~np.isfinite(arr))
        if len(bad):
            raise ValidationError(
                f"non-finite entry in {name} at indices {[tuple(int(i) for i in b) for b in bad[:5]]}")
    check_histogram(g.weights)


def check_metric(metric):
    if metric not in NODE_METRICS:
        raise ValidationError(f"unknown node metric {metric!r}, expected one of {NODE_METRICS}")
    return metric
