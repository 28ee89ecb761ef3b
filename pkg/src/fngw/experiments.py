"""Synthetic experiment drivers: circle barycenters, SBM dictionary learning,
SBM clustering, and a small graph-prediction task.

Every driver is a pure function of its seed and returns plain data, so the
CLI and the acceptance tests share one code path.
"""

from dataclasses import dataclass

import numpy as np

from .apps import KMeansConfig, kmeans_cluster
from .barycenter import BarycenterConfig, fngw_barycenter
from .dictionary import LearnConfig, UnmixConfig, dictionary_learn, initial_dictionary, unmix
from .distance import FngwParams
from .generators import generate_circle_graphs, generate_sbm_graph
from .prediction import PredictionModel, decode_candidates, gaussian_kernel, predict_relaxed, top_k_accuracy

# inner CGD settings for the iterative drivers; direct distance calls keep the library defaults
FAST_PARAMS = FngwParams(rel_tol=1e-6, max_iters=200)


def circle_experiment(gammas=(1e-6, 5e-5), n=15, seed=0, params=None, outer_iters=50):
    """Barycenters of 8 circle graphs for each sparsity level; returns (graphs, {gamma: (bary, trace)})."""
    params = params or FngwParams(alpha=0.3, beta=0.3)
    graphs = generate_circle_graphs(seed=seed)
    out = {}
    for gamma in gammas:
        cfg = BarycenterConfig(n=n, gamma_sparsity=gamma, outer_iters=outer_iters, seed=seed)
        out[gamma] = fngw_barycenter(graphs, params, cfg)
    return graphs, out


def sbm_templates(n=20, inter_block_prob=0.3, seed=0):
    """SBM templates with 1, 2 and 3 blocks and block-index node features."""
    return [generate_sbm_graph(k, n, inter_block_prob, seed=seed + k) for k in (1, 2, 3)]


def sbm_mixtures(count=30, n=20, max_loss=0.3, seed=0, params=None, max_tries=1000):
    """Barycenters of the templates with softmax-normal weights, resampled until the loss passes ``max_loss``.

    Returns (graphs, mixing weights, barycenter losses).
    """
    params = params or FAST_PARAMS
    templates = sbm_templates(n, seed=seed)
    rng = np.random.default_rng(seed)
    graphs, weights, losses = [], [], []
    for attempt in range(max_tries):
        if len(graphs) == count:
            break
        v = rng.normal(size=len(templates))
        lam = np.exp(v - v.max())
        lam /= lam.sum()
        cfg = BarycenterConfig(n=n, lambdas=lam, outer_iters=20, seed=seed + attempt)
        bary, trace = fngw_barycenter(templates, params, cfg)
        if trace[-1] <= max_loss:
            graphs.append(bary)
            weights.append(lam)
            losses.append(trace[-1])
    if len(graphs) < count:
        raise RuntimeError(f"only {len(graphs)} of {count} mixtures passed the loss gate")
    return graphs, np.array(weights), np.array(losses)


@dataclass(frozen=True)
class DictionaryExperiment:
    atom_sizes: tuple = (5, 10, 15)
    epochs: int = 15
    lr: float = 10.0
    batch_size: int = 16
    baseline_seeds: int = 10
    unmix: UnmixConfig = UnmixConfig(outer_iters=3, bary_iters=5)


def mean_unmixing_loss(dataset, dictionary, params, config):
    return float(np.mean([unmix(g, dictionary, 0.0, params, config).loss for g in dataset]))


def dictionary_experiment(seed=0, setup=None, params=None):
    """Learn atoms on gated SBM mixtures and compare with freshly seeded dictionaries.

    Returns a dict with the learned dictionary, the epoch trace, the final
    mean reconstruction loss and the per-seed baseline losses.
    """
    setup = setup or DictionaryExperiment()
    params = params or FAST_PARAMS
    data, _, _ = sbm_mixtures(seed=seed, params=params)
    cfg = LearnConfig(epochs=setup.epochs, batch_size=setup.batch_size, lr=setup.lr, seed=seed,
                      unmix=setup.unmix)
    learned, trace = dictionary_learn(data, setup.atom_sizes, params, cfg)
    final = mean_unmixing_loss(data, learned, params, setup.unmix)
    baseline = [mean_unmixing_loss(data, initial_dictionary(data, setup.atom_sizes, seed=1000 + s), params,
                                   setup.unmix) for s in range(setup.baseline_seeds)]
    return {"dictionary": learned, "epoch_losses": trace, "final_loss": final, "baseline_losses": baseline,
            "dataset": data}


def clustering_dataset(seed=0, per_group=15, blocks=(1, 2, 4), sizes=(20, 30, 40), inter_block_prob=0.3):
    """Groups of SBM graphs by block count, random sizes, node features ``N(block index, 1)``."""
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for label, b in enumerate(blocks):
        for _ in range(per_group):
            n = int(rng.choice(sizes))
            graphs.append(generate_sbm_graph(b, n, inter_block_prob, seed=int(rng.integers(2 ** 63)),
                                             features="gaussian"))
            labels.append(label)
    return graphs, np.array(labels)


def clustering_experiment(seed=0, params=None, centroid_size=20):
    graphs, labels = clustering_dataset(seed)
    assign, centroids, trace = kmeans_cluster(graphs, 3, centroid_size, params or FAST_PARAMS,
                                              KMeansConfig(seed=seed))
    return {"labels": labels, "assignments": assign, "centroids": centroids, "inertia_trace": trace}


def _latent_graph(rng):
    blocks = int(rng.integers(1, 4))
    n = int(rng.integers(6, 11))
    prob = float(rng.uniform(0.1, 0.9))
    g = generate_sbm_graph(blocks, n, prob, seed=int(rng.integers(2 ** 63)), features="gaussian",
                           feature_sigma=0.3)
    return g, np.array([blocks, n / 4, 2 * prob])


def prediction_task(seed=0, n_train=30, n_test=20, n_candidates=10, input_noise=0.1):
    """Outputs are random SBM graphs; inputs are their generating parameters plus Gaussian noise.

    Each test point gets ``n_candidates`` graphs: its true output and fresh
    draws from the same generator, shuffled. Returns a dict of arrays/lists.
    """
    rng = np.random.default_rng(seed)

    def draw(count):
        pairs = [_latent_graph(rng) for _ in range(count)]
        X = np.stack([z for _, z in pairs]) + input_noise * rng.standard_normal((count, 3))
        return [g for g, _ in pairs], X

    train_out, X_train = draw(n_train)
    test_out, X_test = draw(n_test)
    candidates, truths = [], []
    for g in test_out:
        others, _ = draw(n_candidates - 1)
        pos = int(rng.integers(n_candidates))
        candidates.append(others[:pos] + [g] + others[pos:])
        truths.append(pos)
    return {"train_outputs": train_out, "X_train": X_train, "X_test": X_test,
            "candidates": candidates, "truths": truths}


def prediction_experiment(seed=0, bandwidth=0.5, ridge_lambda=1e-3, m_out=8, params=None, ks=(1, 3, 5)):
    task = prediction_task(seed)
    params = params or FAST_PARAMS
    K = gaussian_kernel(task["X_train"], task["X_train"], bandwidth)
    model = PredictionModel(K, ridge_lambda, task["train_outputs"], m_out, decode_params=params, seed=seed)
    K_test = gaussian_kernel(task["X_test"], task["X_train"], bandwidth)
    rankings = [decode_candidates(predict_relaxed(model, k_x), cands, params)
                for k_x, cands in zip(K_test, task["candidates"])]
    acc = {k: top_k_accuracy(rankings, task["truths"], k) for k in ks}
    return {"rankings": rankings, "truths": task["truths"], "top_k": acc, "model": model}
