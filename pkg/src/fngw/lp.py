"""Exact solver for the linear optimal transport problem.

Transportation simplex on the bipartite network: the basis is a spanning
tree of n + m - 1 cells, potentials are recovered on the tree and the
entering cell is the most negative reduced cost (lowest flat index on
ties). Supplies are perturbed by a tiny epsilon to avoid degenerate
pivots; the perturbation is removed on output by re-solving the flows of
the optimal tree against the exact marginals.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .graph import SolverError, ValidationError

MARGINAL_TOL = 1e-9
CERTIFY_TOL = 1e-8


@dataclass(frozen=True)
class TransportPlan:
    """Coupling matrix together with the marginals it was solved for."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def T(self):
        return TransportPlan(self.matrix.T, self.col_marginal, self.row_marginal)

    def check(self, tol=MARGINAL_TOL):
        check_plan(self.matrix, self.row_marginal, self.col_marginal, tol)


def check_plan(pi, p, q, tol=MARGINAL_TOL):
    """Raise unless ``pi`` is a nonnegative coupling of ``p`` and ``q``."""
    pi = np.asarray(pi)
    if pi.shape != (len(p), len(q)):
        raise ValidationError(f"plan shape {pi.shape} does not match marginals ({len(p)}, {len(q)})")
    if pi.size and pi.min() < -1e-12:
        raise ValidationError(f"plan has negative entry {pi.min():.3g}")
    err_r = np.abs(pi.sum(1) - p).max()
    err_c = np.abs(pi.sum(0) - q).max()
    if max(err_r, err_c) > tol:
        raise ValidationError(f"plan marginals off by {max(err_r, err_c):.3g}")


@numba.njit(cache=True)
def _initial_basis(cost, a, b):
    # matrix-minimum rule; removes exactly one line per allocation so the
    # n + m - 1 allocated cells form a spanning tree
    n, m = cost.shape
    basis = np.zeros((n, m), dtype=np.bool_)
    flow = np.zeros((n, m))
    ra = a.copy()
    rb = b.copy()
    row_done = np.zeros(n, dtype=np.bool_)
    col_done = np.zeros(m, dtype=np.bool_)
    rows_left = n
    cols_left = m
    count = 0
    order = np.argsort(cost.ravel(), kind="mergesort")
    for idx in order:
        i = idx // m
        j = idx % m
        if row_done[i] or col_done[j]:
            continue
        x = min(ra[i], rb[j])
        if x < 0.0:
            x = 0.0
        flow[i, j] = x
        basis[i, j] = True
        count += 1
        ra[i] -= x
        rb[j] -= x
        if (ra[i] <= rb[j] and rows_left > 1) or cols_left == 1:
            row_done[i] = True
            rows_left -= 1
        else:
            col_done[j] = True
            cols_left -= 1
        if count == n + m - 1:
            break
    return basis, flow


@numba.njit(cache=True)
def _potentials(cost, basis, u, v):
    # tree nodes: rows 0..n-1, cols n..n+m-1; root row 0 with u = 0
    n, m = cost.shape
    seen = np.zeros(n + m, dtype=np.bool_)
    queue = np.empty(n + m, dtype=np.int64)
    queue[0] = 0
    seen[0] = True
    u[0] = 0.0
    head = 0
    tail = 1
    while head < tail:
        node = queue[head]
        head += 1
        if node < n:
            for j in range(m):
                if basis[node, j] and not seen[n + j]:
                    v[j] = cost[node, j] - u[node]
                    seen[n + j] = True
                    queue[tail] = n + j
                    tail += 1
        else:
            j = node - n
            for i in range(n):
                if basis[i, j] and not seen[i]:
                    u[i] = cost[i, j] - v[j]
                    seen[i] = True
                    queue[tail] = i
                    tail += 1
    return tail == n + m


@numba.njit(cache=True)
def _cycle(basis, i0, j0, path_rows, path_cols):
    # path in the tree from row i0 to column j0; returns number of cells
    n, m = basis.shape
    parent = np.full(n + m, -1, dtype=np.int64)
    seen = np.zeros(n + m, dtype=np.bool_)
    queue = np.empty(n + m, dtype=np.int64)
    queue[0] = i0
    seen[i0] = True
    head = 0
    tail = 1
    target = n + j0
    while head < tail and not seen[target]:
        node = queue[head]
        head += 1
        if node < n:
            for j in range(m):
                if basis[node, j] and not seen[n + j]:
                    seen[n + j] = True
                    parent[n + j] = node
                    queue[tail] = n + j
                    tail += 1
        else:
            j = node - n
            for i in range(n):
                if basis[i, j] and not seen[i]:
                    seen[i] = True
                    parent[i] = node
                    queue[tail] = i
                    tail += 1
    # walk back from the column: cells alternate -, +, -, ...
    k = 0
    node = target
    while node != i0:
        par = parent[node]
        if node >= n:
            path_rows[k] = par
            path_cols[k] = node - n
        else:
            path_rows[k] = node
            path_cols[k] = par - n
        k += 1
        node = par
    return k


@numba.njit(cache=True)
def _simplex(cost, a, b, basis, flow, max_pivots, tol):
    n, m = cost.shape
    u = np.zeros(n)
    v = np.zeros(m)
    path_rows = np.empty(n + m, dtype=np.int64)
    path_cols = np.empty(n + m, dtype=np.int64)
    for it in range(max_pivots + 1):
        if not _potentials(cost, basis, u, v):
            return u, v, it, 2
        best = -tol
        bi = -1
        bj = -1
        for i in range(n):
            for j in range(m):
                if not basis[i, j]:
                    r = cost[i, j] - u[i] - v[j]
                    if r < best:
                        best = r
                        bi = i
                        bj = j
        if bi < 0:
            return u, v, it, 0
        if it == max_pivots:
            break
        k = _cycle(basis, bi, bj, path_rows, path_cols)
        theta = np.inf
        leave = -1
        for c in range(0, k, 2):
            i = path_rows[c]
            j = path_cols[c]
            x = flow[i, j]
            if x < theta or (x == theta and i * m + j < leave):
                theta = x
                leave = i * m + j
        for c in range(k):
            i = path_rows[c]
            j = path_cols[c]
            if c % 2 == 0:
                flow[i, j] -= theta
            else:
                flow[i, j] += theta
        flow[bi, bj] = theta
        basis[bi, bj] = True
        li = leave // m
        lj = leave % m
        basis[li, lj] = False
        flow[li, lj] = 0.0
    return u, v, max_pivots, 1


@numba.njit(cache=True)
def _tree_flows(basis, a, b):
    # flows of a spanning-tree basis for given marginals, by leaf peeling
    n, m = basis.shape
    flow = np.zeros((n, m))
    ra = a.copy()
    rb = b.copy()
    deg = np.zeros(n + m, dtype=np.int64)
    active = basis.copy()
    for i in range(n):
        for j in range(m):
            if active[i, j]:
                deg[i] += 1
                deg[n + j] += 1
    stack = np.empty(n + m, dtype=np.int64)
    top = 0
    for node in range(n + m):
        if deg[node] == 1:
            stack[top] = node
            top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if deg[node] != 1:
            continue
        if node < n:
            i = node
            for j in range(m):
                if active[i, j]:
                    break
            x = ra[i]
        else:
            j = node - n
            for i in range(n):
                if active[i, j]:
                    break
            x = rb[j]
        flow[i, j] = x
        ra[i] -= x
        rb[j] -= x
        active[i, j] = False
        deg[i] -= 1
        deg[n + j] -= 1
        other = n + j if node < n else i
        if deg[other] == 1:
            stack[top] = other
            top += 1
    return flow


def _round_to_marginals(pi, p, q):
    # one rounding pass onto the exact coupling polytope
    r = pi.sum(1)
    x = np.where(r > p, p / np.where(r > 0, r, 1.0), 1.0)
    pi = pi * x[:, None]
    c = pi.sum(0)
    y = np.where(c > q, q / np.where(c > 0, c, 1.0), 1.0)
    pi = pi * y[None, :]
    er = p - pi.sum(1)
    ec = q - pi.sum(0)
    mass = er.sum()
    if mass > 0:
        pi = pi + np.outer(er, ec) / mass
    return pi


@numba.njit(cache=True)
def _solve(cost, p, q, max_pivots):
    # returns (plan, u, v, status): 0 ok, 1 pivot cap, 2 broken tree,
    # 3 infeasible basis, 4 certificate failure
    n, m = cost.shape
    scale = 1.0 + np.abs(cost).max()
    mass = p.sum()
    status = 3
    pi = np.zeros((n, m))
    u = np.zeros(n)
    v = np.zeros(m)
    basis = np.zeros((n, m), dtype=np.bool_)
    for eps in (1e-13 * mass, 1e-16 * mass, 0.0):
        a = p + eps
        b = q.copy()
        b[m - 1] += n * eps
        basis, flow = _initial_basis(cost, a, b)
        u, v, pivots, status = _simplex(cost, a, b, basis, flow, max_pivots, 1e-13 * scale)
        if status != 0:
            return pi, u, v, status
        pi = _tree_flows(basis, p, q)
        if pi.min() >= -1e-12 * mass:
            break
        status = 3
    if status != 0:
        return pi, u, v, status
    for i in range(n):
        for j in range(m):
            r = cost[i, j] - u[i] - v[j]
            if r < -CERTIFY_TOL * scale or (basis[i, j] and abs(r) > CERTIFY_TOL * scale):
                return pi, u, v, 4
    return pi, u, v, 0


_STATUS = {
    1: "linear OT did not converge within the pivot cap",
    2: "linear OT basis is not a spanning tree",
    3: "linear OT could not recover a feasible optimal basis",
    4: "linear OT optimality certificate (complementary slackness) failed",
}


def solve_linear_ot(cost, p, q, max_pivots=None, return_duals=False, check=True):
    """Exact minimiser of ``<cost, pi>`` over couplings of ``p`` and ``q``.

    Parameters
    ----------
    cost : array-like, shape (n, m)
    p : array-like, shape (n,)
    q : array-like, shape (m,)
    max_pivots : int, optional
        Pivot cap, default ``50 (n + m) max(n, m)``. Exceeding it raises.
    return_duals : bool
        Also return the dual potentials ``(u, v)``.
    check : bool
        Validate inputs; internal callers with trusted inputs skip it.

    Returns
    -------
    plan : TransportPlan
        A vertex of the transport polytope, certified optimal by its duals.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    n, m = cost.shape
    if check:
        if p.shape != (n,) or q.shape != (m,):
            raise ValidationError(
                f"cost shape {cost.shape} incompatible with marginals {p.shape}, {q.shape}")
        if not np.all(np.isfinite(cost)):
            raise ValidationError("cost matrix has non-finite entries")
        for name, h in (("p", p), ("q", q)):
            if np.any(h < 0) or not np.all(np.isfinite(h)):
                raise ValidationError(f"marginal {name} must be finite and nonnegative")
        if abs(p.sum() - q.sum()) > MARGINAL_TOL:
            raise ValidationError(f"infeasible marginals: sums {p.sum():.12g} and {q.sum():.12g}")
    if max_pivots is None:
        max_pivots = 50 * (n + m) * max(n, m)
    pi, u, v, status = _solve(cost, p, q, max_pivots)
    if status:
        raise SolverError(f"{_STATUS[status]} ({n}x{m} problem, cap {max_pivots} pivots)")
    if pi.min() < 0:
        pi = _round_to_marginals(np.maximum(pi, 0.0), p, q)
    plan = TransportPlan(pi, p, q)
    if return_duals:
        return plan, u, v
    return plan
