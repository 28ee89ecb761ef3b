"""Graph dictionary learning with FNGW barycenters as the reconstruction model.

A graph is embedded by simplex weights ``w`` over the atoms; its
reconstruction is the barycenter of the atoms with weights ``w``. With the
couplings fixed, the reconstruction is linear in ``w`` and in every atom,
which gives both the weight update (a quadratic over the simplex) and
closed-form atom gradients.
"""

from dataclasses import dataclass, field

import numpy as np

from .barycenter import BarycenterConfig, fngw_barycenter
from .distance import FngwParams, fngw_distance, fngw_energy, line_search_step
from .graph import Graph, ValidationError, validate_graph
from .lp import TransportPlan


@dataclass(frozen=True)
class Dictionary:
    atoms: tuple

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise ValidationError("a dictionary needs at least one atom")
        for a in self.atoms:
            validate_graph(a)
        S, T = self.atoms[0].n_features, self.atoms[0].n_edge_features
        if any(a.n_features != S or a.n_edge_features != T for a in self.atoms):
            raise ValidationError("atoms disagree on feature dimensions")

    @property
    def atom_sizes(self):
        return [a.n for a in self.atoms]

    def __len__(self):
        return len(self.atoms)


@dataclass
class Unmixing:
    w: np.ndarray
    plan_to_bary: TransportPlan
    atom_plans: list
    loss: float
    loss_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class UnmixConfig:
    """``outer_iters`` alternations of (barycenter, coupling, weights)."""

    outer_iters: int = 5
    rel_tol: float = 1e-6
    bary_iters: int = 10
    w_iters: int = 200
    seed: int = 0


@dataclass(frozen=True)
class LearnConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.01
    lambda_reg: float = 0.0
    seed: int = 0
    unmix: UnmixConfig = UnmixConfig()


def _plan(pi):
    return pi.matrix if isinstance(pi, TransportPlan) else np.asarray(pi, dtype=np.float64)


def _atom_pieces(atoms, atom_plans, p):
    # per-atom transported blocks; the reconstruction is sum_s w_s * piece_s
    pp = np.outer(p, p)
    pieces = []
    for atom, pi in zip(atoms, atom_plans):
        pi = _plan(pi)
        if pi.shape != (len(p), atom.n):
            raise ValidationError(f"atom plan shape {pi.shape}, expected ({len(p)}, {atom.n})")
        F = (pi @ atom.features) / p[:, None]
        A = (pi @ atom.structure @ pi.T) / pp
        E = np.matmul(np.matmul(pi, atom.channels), pi.T) / pp[None]
        pieces.append((F, A, E))
    return pieces


def reconstruct_from_atoms(w, dictionary, atom_plans, p):
    """Relaxed graph ``(F, A, E, p)`` obtained by transporting the atoms onto ``p``."""
    atoms = dictionary.atoms if isinstance(dictionary, Dictionary) else tuple(dictionary)
    w = np.asarray(w, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if w.shape != (len(atoms),) or len(atom_plans) != len(atoms):
        raise ValidationError("need one weight and one plan per atom")
    if np.any(p <= 0):
        raise ValidationError("reconstruction weights must be strictly positive")
    pieces = _atom_pieces(atoms, atom_plans, p)
    F = sum(ws * F for ws, (F, _, _) in zip(w, pieces))
    A = sum(ws * A for ws, (_, A, _) in zip(w, pieces))
    E = sum(ws * E for ws, (_, _, E) in zip(w, pieces))
    return Graph(F, A, np.moveaxis(E, 0, -1), p)


def mixing_quadratic(g, pi, pieces, params):
    """``(H, l, c)`` with ``energy(g, reconstruction(w), pi) = w^T H w + l^T w + c``."""
    pi = _plan(pi)
    p, q = pi.sum(1), pi.sum(0)
    qq = np.outer(q, q)
    Fh = np.stack([F for F, _, _ in pieces])
    Ah = np.stack([A for _, A, _ in pieces])
    Eh = np.stack([E for _, _, E in pieces])
    wn, beta, alpha = params.node_weight, params.beta, params.alpha

    H = wn * np.einsum("sjd,rjd,j->sr", Fh, Fh, q)
    l = -2 * wn * np.einsum("jd,sjd->s", pi.T @ g.features, Fh)
    c = wn * np.sum(p * np.einsum("id,id->i", g.features, g.features))

    H += beta * np.einsum("sjl,rjl,jl->sr", Ah, Ah, qq)
    l += -2 * beta * np.einsum("jl,sjl->s", pi.T @ g.structure @ pi, Ah)
    c += beta * p @ (g.structure ** 2) @ p

    X = np.matmul(np.matmul(pi.T, g.channels), pi)
    H += alpha * np.einsum("stjl,rtjl,jl->sr", Eh, Eh, qq)
    l += -2 * alpha * np.einsum("tjl,stjl->s", X, Eh)
    c += alpha * sum(p @ (C ** 2) @ p for C in g.channels)
    return (H + H.T) / 2, l, float(c)


def simplex_quadratic_min(H, l, w0, lambda_reg=0.0, max_iters=200, tol=1e-12):
    """Away-step conditional gradient for ``w^T (H - lambda I) w + l^T w`` over the simplex.

    Away steps move mass off the worst active vertex, which keeps
    convergence fast when the minimiser lies on a face.
    """
    Q = H - lambda_reg * np.eye(len(l))
    w = np.array(w0, dtype=np.float64)
    for _ in range(max_iters):
        grad = 2 * Q @ w + l
        s = int(np.argmin(grad))
        active = np.flatnonzero(w > 0)
        a = int(active[np.argmax(grad[active])])
        fw_gap = grad @ w - grad[s]
        away_gap = grad[a] - grad @ w
        if max(fw_gap, away_gap) <= tol * max(1.0, abs(w @ Q @ w + l @ w)):
            break
        if fw_gap >= away_gap:
            d = -w
            d[s] += 1.0
            reach = 1.0
        else:
            d = w.copy()
            d[a] -= 1.0
            reach = w[a] / (1.0 - w[a]) if w[a] < 1.0 else 0.0
            if reach <= 0.0:
                break
        d = reach * d
        step = line_search_step(float(d @ Q @ d), float(grad @ d))
        if step == 0.0:
            break
        w = w + step * d
        if step == 1.0 and fw_gap < away_gap:
            w[a] = 0.0
    w = np.maximum(w, 0.0)
    return w / w.sum()


def unmix(g, dictionary, lambda_reg=0.0, params=None, config=None):
    """Embed ``g`` in the simplex spanned by the dictionary atoms.

    Returns the best iterate by regularised objective; its ``loss`` is the
    plain reconstruction error and ``loss_trace`` lists the error of every
    iterate, starting with uniform weights.
    """
    params = params or FngwParams()
    config = config or UnmixConfig()
    if params.node_metric != "sqeuclidean":
        raise ValidationError("unmixing requires the squared euclidean node metric")
    atoms = dictionary.atoms if isinstance(dictionary, Dictionary) else tuple(dictionary)
    validate_graph(g)
    k = len(atoms)
    w = np.full(k, 1.0 / k)
    p = g.weights
    best = None
    trace = []
    bary = None
    pi = None
    for _ in range(config.outer_iters):
        bary_cfg = BarycenterConfig(n=g.n, weights=p, lambdas=w, outer_iters=config.bary_iters,
                                    seed=config.seed, init=bary)
        bary, _, log = fngw_barycenter(list(atoms), params, bary_cfg, log=True)
        atom_plans = log["plans"]
        pieces = _atom_pieces(atoms, atom_plans, p)
        recon = reconstruct_from_atoms(w, atoms, atom_plans, p)
        _, plan, _ = fngw_distance(g, recon, params)
        if pi is not None and pi.shape == plan.shape:
            warm = fngw_distance(g, recon, params, init_plan=pi)
            if warm[0] < fngw_energy(g, recon, params).cost(plan.matrix):
                plan = warm[1]
        pi = plan.matrix
        H, l, c = mixing_quadratic(g, pi, pieces, params)

        def record(weights):
            loss = max(float(weights @ H @ weights + l @ weights + c), 0.0)
            obj = loss - lambda_reg * float(weights @ weights)
            trace.append(loss)
            return loss, obj

        loss, obj = record(w)
        if best is None or obj < best[0]:
            best = (obj, Unmixing(w.copy(), plan, atom_plans, loss))
        w = simplex_quadratic_min(H, l, w, lambda_reg, config.w_iters)
        new_loss, new_obj = record(w)
        if new_obj < best[0]:
            best = (new_obj, Unmixing(w.copy(), plan, atom_plans, new_loss))
        if abs(loss - new_loss) <= config.rel_tol * max(loss, 1e-300):
            break
    result = best[1]
    result.loss_trace = trace
    return result


def atom_gradients(samples, unmixings, dictionary, params):
    """Gradients of the plan-fixed batch loss with respect to every atom block.

    Returns a list of ``(dF, dA, dE)`` per atom, ``dE`` shaped like the
    atom edge tensor.
    """
    atoms = dictionary.atoms if isinstance(dictionary, Dictionary) else tuple(dictionary)
    if len(samples) != len(unmixings) or not samples:
        raise ValidationError("need one unmixing per sample")
    wn, beta, alpha = params.node_weight, params.beta, params.alpha
    grads = [[np.zeros_like(a.features), np.zeros_like(a.structure),
              np.zeros_like(a.channels)] for a in atoms]
    B = len(samples)
    for g, u in zip(samples, unmixings):
        pi = _plan(u.plan_to_bary)
        if pi.shape[0] != g.n:
            raise ValidationError(f"plan shape {pi.shape} does not match sample with {g.n} nodes")
        p = pi.sum(0)
        recon = reconstruct_from_atoms(u.w, atoms, u.atom_plans, u.plan_to_bary.col_marginal)
        pp = np.outer(p, p)
        RF = recon.features - (pi.T @ g.features) / p[:, None]
        RA = recon.structure - (pi.T @ g.structure @ pi) / pp
        RE = recon.channels - np.matmul(np.matmul(pi.T, g.channels), pi) / pp[None]
        for s, (ws, pb) in enumerate(zip(u.w, u.atom_plans)):
            if ws == 0:
                continue
            pb = _plan(pb)
            grads[s][0] += 2 * wn * ws * (pb.T @ RF) / B
            grads[s][1] += 2 * beta * ws * (pb.T @ RA @ pb) / B
            grads[s][2] += 2 * alpha * ws * np.matmul(np.matmul(pb.T, RE), pb) / B
    return [(dF, dA, np.moveaxis(dE, 0, -1)) for dF, dA, dE in grads]


def batch_loss(samples, unmixings, dictionary, params):
    """Plan-fixed mean reconstruction energy over a batch."""
    atoms = dictionary.atoms if isinstance(dictionary, Dictionary) else tuple(dictionary)
    total = 0.0
    for g, u in zip(samples, unmixings):
        recon = reconstruct_from_atoms(u.w, atoms, u.atom_plans, u.plan_to_bary.col_marginal)
        total += fngw_energy(g, recon, params).cost(_plan(u.plan_to_bary))
    return total / len(samples)


def initial_dictionary(dataset, atom_sizes, seed=0, edge_noise=0.1):
    """Seeded atoms: features drawn from the data, uniform [0, 1] structure, noisy mean edges."""
    rng = np.random.default_rng(seed)
    pool = np.vstack([g.features for g in dataset])
    T = dataset[0].n_edge_features
    edge_mean = (np.mean(np.concatenate([g.edges.reshape(-1, T) for g in dataset]), axis=0)
                 if T else np.zeros(0))
    atoms = []
    for n in atom_sizes:
        F = pool[rng.choice(len(pool), size=n, replace=len(pool) < n)]
        A = rng.uniform(0.0, 1.0, (n, n))
        E = edge_mean + edge_noise * rng.standard_normal((n, n, T))
        atoms.append(Graph(F, A, E, np.full(n, 1.0 / n)))
    return Dictionary(atoms)


def dictionary_learn(dataset, atom_sizes, params=None, config=None, init=None):
    """Stochastic dictionary learning.

    Each mini-batch is unmixed against the current atoms, then every atom
    takes one plain gradient step with the couplings and weights frozen.
    Atom structure entries are clamped at zero after each step.

    Returns
    -------
    dictionary : Dictionary
    epoch_losses : list of float
        Mean reconstruction loss of the unmixed samples in every epoch.
    """
    params = params or FngwParams()
    config = config or LearnConfig()
    if not dataset:
        raise ValidationError("empty dataset")
    dictionary = init if init is not None else initial_dictionary(dataset, atom_sizes, config.seed)
    if dictionary.atom_sizes != list(atom_sizes):
        raise ValidationError("initial dictionary does not match atom_sizes")
    rng = np.random.default_rng(config.seed)
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [dataset[i] for i in order[start:start + config.batch_size]]
            unmixings = [unmix(g, dictionary, config.lambda_reg, params, config.unmix) for g in batch]
            losses += [u.loss for u in unmixings]
            if config.lr == 0:
                continue
            grads = atom_gradients(batch, unmixings, dictionary, params)
            atoms = []
            for atom, (dF, dA, dE) in zip(dictionary.atoms, grads):
                atoms.append(Graph(atom.features - config.lr * dF,
                                   np.maximum(atom.structure - config.lr * dA, 0.0),
                                   atom.edges - config.lr * dE, atom.weights))
            dictionary = Dictionary(atoms)
        epoch_losses.append(float(np.mean(losses)))
    return dictionary, epoch_losses
