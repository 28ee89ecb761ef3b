"""``fngw`` command line.

Exit codes: 0 success, 1 invalid input or usage, 2 solver failure.
Option values resolve as: command-line flag, then ``--config`` JSON, then
built-in default.
"""

import argparse
import os
import sys

import numpy as np

from . import io
from .apps import KMeansConfig, kmeans_cluster, pairwise_distance_matrix
from .barycenter import BarycenterConfig, fngw_barycenter
from .dictionary import LearnConfig, UnmixConfig, dictionary_learn, unmix
from .distance import FngwParams, fngw_distance
from .generators import generate_circle_graphs, generate_sbm_graph
from .graph import SolverError, ValidationError
from .prediction import PredictionModel, decode_candidates, predict_relaxed, top_k_accuracy

COMMON_DEFAULTS = {"alpha": 1 / 3, "beta": 1 / 3, "seed": 0, "max_iters": 1000, "tol": 1e-9, "threads": 1,
                   "node_metric": "sqeuclidean"}

COMMAND_DEFAULTS = {
    "distance": {"plan_out": "plan.csv", "out": None},
    "gram": {"gamma_kernel": 1.0, "out": "gram.csv", "distances_out": None},
    "barycenter": {"n": None, "gamma": 0.0, "lambdas": None, "prox_step": None, "prox_iters": 10,
                   "outer_iters": 50, "bary_tol": 1e-7, "out": "barycenter.json", "trace_out": None},
    "dictlearn": {"atom_sizes": "5,10,15", "epochs": 30, "batch_size": 16, "lr": 0.01, "lambda_reg": 0.0,
                  "unmix_iters": 5, "bary_iters": 10, "out": "dictionary.json",
                  "embeddings_out": "embeddings.csv"},
    "cluster": {"k": None, "centroid_size": None, "lloyd_iters": 10, "bary_iters": 10, "out_dir": "clusters"},
    "predict": {"gram_train": None, "test_kernel": None, "outputs": None, "candidates": None,
                "ridge_lambda": 1e-3, "m_out": None, "top_weights": 5, "ks": "1,3,5", "bary_iters": 20,
                "out": "prediction.json"},
    "circle": {"count": 8, "min_nodes": 10, "max_nodes": 20, "noise": 0.3, "skip_prob": 0.5,
               "out": "circles.json"},
    "sbm": {"blocks": "1,2,3", "per_group": 1, "nodes": "20", "prob": 0.3, "features": "block",
            "feature_sigma": 1.0, "out": "sbm.json"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def _common(p):
    g = p.add_argument_group("solver")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--node-metric", choices=("sqeuclidean", "hamming"))
    g.add_argument("--seed", type=int)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float, help="relative decrease stopping threshold")
    g.add_argument("--threads", type=int)
    g.add_argument("--config", help="JSON file of option values")


def build_parser():
    parser = _Parser(prog="fngw", description="FNGW distances, barycenters, dictionaries and clustering.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("distance", help="distance between two graph files")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--plan-out")
    p.add_argument("--out", help="JSON with value, plan and trace")
    _common(p)

    p = sub.add_parser("gram", help="Gaussian FNGW Gram matrix of a dataset")
    p.add_argument("dataset")
    p.add_argument("--gamma-kernel", type=float)
    p.add_argument("--out")
    p.add_argument("--distances-out")
    _common(p)

    p = sub.add_parser("barycenter", help="barycenter of a dataset")
    p.add_argument("dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float, help="l1 sparsity weight on the structure")
    p.add_argument("--lambdas", help="comma-separated barycentric weights")
    p.add_argument("--prox-step", type=float)
    p.add_argument("--prox-iters", type=int)
    p.add_argument("--outer-iters", type=int)
    p.add_argument("--bary-tol", type=float)
    p.add_argument("--out")
    p.add_argument("--trace-out")
    _common(p)

    p = sub.add_parser("dictlearn", help="learn a graph dictionary")
    p.add_argument("dataset")
    p.add_argument("--atom-sizes")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda-reg", type=float)
    p.add_argument("--unmix-iters", type=int)
    p.add_argument("--bary-iters", type=int)
    p.add_argument("--out")
    p.add_argument("--embeddings-out")
    _common(p)

    p = sub.add_parser("cluster", help="k-means with barycenter centroids")
    p.add_argument("dataset")
    p.add_argument("--k", type=int)
    p.add_argument("--centroid-size", type=int)
    p.add_argument("--lloyd-iters", type=int)
    p.add_argument("--bary-iters", type=int)
    p.add_argument("--out-dir")
    _common(p)

    p = sub.add_parser("predict", help="surrogate graph prediction with candidate ranking")
    p.add_argument("--gram-train")
    p.add_argument("--test-kernel")
    p.add_argument("--outputs")
    p.add_argument("--candidates")
    p.add_argument("--ridge-lambda", type=float)
    p.add_argument("--m-out", type=int)
    p.add_argument("--top-weights", type=int)
    p.add_argument("--ks")
    p.add_argument("--bary-iters", type=int)
    p.add_argument("--out")
    _common(p)

    p = sub.add_parser("generate", help="synthetic datasets")
    gen = p.add_subparsers(dest="kind", parser_class=_Parser)
    gen.required = True
    c = gen.add_parser("circle")
    c.add_argument("--count", type=int)
    c.add_argument("--min-nodes", type=int)
    c.add_argument("--max-nodes", type=int)
    c.add_argument("--noise", type=float)
    c.add_argument("--skip-prob", type=float)
    c.add_argument("--out")
    _common(c)
    s = gen.add_parser("sbm")
    s.add_argument("--blocks", help="comma-separated block counts, one group each")
    s.add_argument("--per-group", type=int)
    s.add_argument("--nodes", help="comma-separated node counts, drawn per graph")
    s.add_argument("--prob", type=float)
    s.add_argument("--features", choices=("block", "gaussian"))
    s.add_argument("--feature-sigma", type=float)
    s.add_argument("--out")
    _common(s)
    return parser


def _resolve(args):
    key = args.kind if args.command == "generate" else args.command
    defaults = dict(COMMON_DEFAULTS)
    defaults.update(COMMAND_DEFAULTS[key])
    config = {}
    if args.config:
        config = io.load_json(args.config)
        if not isinstance(config, dict):
            raise io.InputError(args.config, "", "expected an object of option values")
        for name in config:
            if name not in defaults:
                raise io.InputError(args.config, f"/{name}", "unknown option")
    opts = {}
    for name, default in defaults.items():
        value = getattr(args, name, None)
        opts[name] = value if value is not None else config.get(name, default)
    return argparse.Namespace(**opts)


def _required(o, *names):
    for name in names:
        if getattr(o, name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def _int_list(text, name):
    try:
        values = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"--{name} expects comma-separated integers") from None
    if not values:
        raise ValidationError(f"--{name} is empty")
    return values


def _params(o):
    return FngwParams(alpha=o.alpha, beta=o.beta, node_metric=o.node_metric, max_iters=o.max_iters,
                      rel_tol=o.tol, seed=o.seed)


def _ensure_dir(path):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)


def _write(path, text):
    _ensure_dir(path)
    io.write_text(path, text)


def cmd_distance(o, args):
    g1, g2 = io.read_graph(args.graph_a), io.read_graph(args.graph_b)
    value, plan, trace = fngw_distance(g1, g2, _params(o))
    print(repr(float(value)))
    if o.plan_out:
        _write(o.plan_out, io.matrix_to_csv(plan.matrix))
    if o.out:
        _write(o.out, io.dumps({"schema_version": io.SCHEMA_VERSION, "value": value,
                                "plan": plan.matrix.tolist(), "trace": trace}))


def cmd_gram(o, args):
    graphs, _ = io.read_dataset(args.dataset)
    params = _params(o)
    D, _ = pairwise_distance_matrix(graphs, params, o.threads)
    if not o.gamma_kernel > 0:
        raise ValidationError("--gamma-kernel must be positive")
    K = np.exp(-o.gamma_kernel * D)
    _write(o.out, io.matrix_to_csv(K))
    if o.distances_out:
        _write(o.distances_out, io.matrix_to_csv(D))
    print(o.out)


def cmd_barycenter(o, args):
    graphs, _ = io.read_dataset(args.dataset)
    _required(o, "n")
    lambdas = None
    if o.lambdas is not None:
        try:
            lambdas = np.array([float(x) for x in str(o.lambdas).split(",")])
        except ValueError:
            raise ValidationError("--lambdas expects comma-separated numbers") from None
    cfg = BarycenterConfig(n=o.n, lambdas=lambdas, gamma_sparsity=o.gamma, prox_step=o.prox_step,
                           prox_iters=o.prox_iters, outer_iters=o.outer_iters, rel_tol=o.bary_tol, seed=o.seed)
    bary, trace = fngw_barycenter(graphs, _params(o), cfg)
    _ensure_dir(o.out)
    io.write_graph(o.out, bary)
    trace_out = o.trace_out or os.path.splitext(o.out)[0] + ".trace.json"
    _write(trace_out, io.dumps({"schema_version": io.SCHEMA_VERSION, "loss_trace": trace}))
    print(repr(float(trace[-1])))


def cmd_dictlearn(o, args):
    graphs, _ = io.read_dataset(args.dataset)
    sizes = _int_list(o.atom_sizes, "atom-sizes")
    params = _params(o)
    ucfg = UnmixConfig(outer_iters=o.unmix_iters, bary_iters=o.bary_iters, seed=o.seed)
    lcfg = LearnConfig(epochs=o.epochs, batch_size=o.batch_size, lr=o.lr, lambda_reg=o.lambda_reg,
                       seed=o.seed, unmix=ucfg)
    dictionary, trace = dictionary_learn(graphs, sizes, params, lcfg)
    meta = {"atom_sizes": sizes, "seed": o.seed, "epoch_losses": trace,
            "config": {"epochs": o.epochs, "batch_size": o.batch_size, "lr": o.lr, "lambda_reg": o.lambda_reg,
                       "alpha": o.alpha, "beta": o.beta}}
    obj = {"schema_version": io.SCHEMA_VERSION, "atoms": [io.graph_to_json(a) for a in dictionary.atoms]}
    obj.update(meta)
    _write(o.out, io.dumps(obj))
    rows = [unmix(g, dictionary, o.lambda_reg, params, ucfg) for g in graphs]
    W = np.array([np.append(u.w, u.loss) for u in rows])
    cols = [f"w{s}" for s in range(len(sizes))] + ["loss"]
    _write(o.embeddings_out, io.matrix_to_csv(W, col_ids=cols))
    print(repr(float(trace[-1])) if trace else "nan")


def cmd_cluster(o, args):
    graphs, _ = io.read_dataset(args.dataset)
    _required(o, "k", "centroid_size")
    cfg = KMeansConfig(max_iters=o.lloyd_iters, bary_iters=o.bary_iters, seed=o.seed, threads=o.threads)
    assign, centroids, trace = kmeans_cluster(graphs, o.k, o.centroid_size, _params(o), cfg)
    os.makedirs(o.out_dir, exist_ok=True)
    files = []
    for c, g in enumerate(centroids):
        name = f"centroid_{c}.json"
        io.write_graph(os.path.join(o.out_dir, name), g)
        files.append(name)
    _write(os.path.join(o.out_dir, "clustering.json"),
           io.dumps({"schema_version": io.SCHEMA_VERSION, "assignments": assign.tolist(),
                     "inertia_trace": trace, "centroid_files": files}))
    print(os.path.join(o.out_dir, "clustering.json"))


def _candidate_sets(path):
    obj = io.load_json(path)
    if not isinstance(obj, dict) or "candidates" not in obj or "truths" not in obj:
        raise io.InputError(path, "", "expected {\"candidates\": [...], \"truths\": [...]}")
    if not isinstance(obj["candidates"], list) or not isinstance(obj["truths"], list) \
            or len(obj["candidates"]) != len(obj["truths"]):
        raise io.InputError(path, "/truths", "need one truth index per candidate list")
    sets = []
    for k, cands in enumerate(obj["candidates"]):
        if not isinstance(cands, list) or not cands:
            raise io.InputError(path, f"/candidates/{k}", "expected a nonempty array of graphs")
        sets.append([io.graph_from_json(g, path, f"/candidates/{k}/{j}") for j, g in enumerate(cands)])
    truths = []
    for k, t in enumerate(obj["truths"]):
        if not isinstance(t, int) or isinstance(t, bool) or not 0 <= t < len(sets[k]):
            raise io.InputError(path, f"/truths/{k}", "truth index out of range")
        truths.append(t)
    return sets, truths


def cmd_predict(o, args):
    _required(o, "gram_train", "test_kernel", "outputs", "candidates", "m_out")
    K, _, _ = io.read_matrix_csv(o.gram_train)
    K_test, _, _ = io.read_matrix_csv(o.test_kernel)
    outputs, _ = io.read_dataset(o.outputs)
    sets, truths = _candidate_sets(o.candidates)
    if K_test.shape[0] != len(sets):
        raise ValidationError(f"{o.test_kernel}: {K_test.shape[0]} test rows but {len(sets)} candidate sets")
    params = _params(o)
    model = PredictionModel(K, o.ridge_lambda, outputs, o.m_out, o.top_weights, params, o.bary_iters, o.seed)
    rankings = [decode_candidates(predict_relaxed(model, k_x), cands, params)
                for k_x, cands in zip(K_test, sets)]
    ks = _int_list(o.ks, "ks")
    table = {str(k): top_k_accuracy(rankings, truths, k) for k in ks}
    _write(o.out, io.dumps({"schema_version": io.SCHEMA_VERSION,
                            "rankings": [[[i, v if np.isfinite(v) else None] for i, v in r] for r in rankings],
                            "truths": truths, "top_k": table}))
    print(" ".join(f"top{k}={float(v)!r}" for k, v in table.items()))


def cmd_circle(o, args):
    graphs = generate_circle_graphs(o.count, (o.min_nodes, o.max_nodes), o.noise, o.skip_prob, o.seed)
    _ensure_dir(o.out)
    io.write_dataset(o.out, graphs, generator="circle", seed=o.seed)
    print(o.out)


def cmd_sbm(o, args):
    blocks = _int_list(o.blocks, "blocks")
    sizes = _int_list(o.nodes, "nodes")
    rng = np.random.default_rng(o.seed)
    graphs, labels = [], []
    for label, b in enumerate(blocks):
        for _ in range(o.per_group):
            n = int(rng.choice(sizes))
            graphs.append(generate_sbm_graph(b, n, o.prob, seed=int(rng.integers(2 ** 63)),
                                             features=o.features, feature_sigma=o.feature_sigma))
            labels.append(label)
    _ensure_dir(o.out)
    io.write_dataset(o.out, graphs, labels, generator="sbm", seed=o.seed)
    print(o.out)


COMMANDS = {"distance": cmd_distance, "gram": cmd_gram, "barycenter": cmd_barycenter,
            "dictlearn": cmd_dictlearn, "cluster": cmd_cluster, "predict": cmd_predict,
            "circle": cmd_circle, "sbm": cmd_sbm}


def run_cli(argv=None):
    try:
        args = build_parser().parse_args(argv)
        o = _resolve(args)
        COMMANDS[args.kind if args.command == "generate" else args.command](o, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
