import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fngw import io
from fngw.cli import run_cli
from fngw.experiments import prediction_task
from fngw.generators import generate_circle_graphs
from fngw.graph import Graph
from fngw.prediction import gaussian_kernel
from oracles import random_graph


def graph_obj(**over):
    obj = {"n": 2, "node_features": [[0.0], [1.0]], "structure": [[0, 1], [1, 0]],
           "edge_features": {"dense": [[[0.0], [1.0]], [[1.0], [0.0]]]}}
    obj.update(over)
    return obj


class TestGraphJson:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        for k in range(5):
            g = random_graph(rng, int(rng.integers(1, 6)), S=int(rng.integers(0, 3)), T=int(rng.integers(0, 3)))
            path = tmp_path / f"g{k}.json"
            io.write_graph(path, g)
            assert io.read_graph(path) == g

    def test_uniform_default_weights(self):
        g = io.graph_from_json(graph_obj())
        np.testing.assert_array_equal(g.weights, [0.5, 0.5])

    def test_sparse_edges(self):
        g = io.graph_from_json(graph_obj(edge_features={"sparse": {"shape_t": 2, "triplets": [[0, 1, 1, 3.5]],
                                                                    "default": [1.0, 0.0]}}))
        assert g.edges[0, 1].tolist() == [1.0, 3.5]
        assert g.edges[1, 0].tolist() == [1.0, 0.0]

    @pytest.mark.parametrize("obj,pointer", [
        (graph_obj(structure=[[0, 1], [1, "x"]]), "/structure/1/1"),
        (graph_obj(structure=[[0, 1]]), "/structure"),
        (graph_obj(n=True), "/n"),
        (graph_obj(weights=[0.5, 0.6]), "/"),
        (graph_obj(edge_features={"sparse": {"shape_t": 1, "triplets": [[0, 5, 0, 1.0]], "default": [0.0]}}),
         "/edge_features/sparse/triplets/0"),
        (graph_obj(edge_features={"other": 1}), "/edge_features"),
    ])
    def test_error_pointer(self, obj, pointer):
        with pytest.raises(io.InputError) as info:
            io.graph_from_json(obj, "f.json")
        assert info.value.pointer == pointer
        assert str(info.value).startswith("f.json: ")

    def test_dataset_forms(self, tmp_path):
        graphs = generate_circle_graphs(count=2)
        io.write_dataset(tmp_path / "d.json", graphs, labels=[0, 1])
        back, labels = io.read_dataset(tmp_path / "d.json")
        assert labels == [0, 1] and all(a == b for a, b in zip(graphs, back))
        (tmp_path / "bare.json").write_text(json.dumps([graph_obj()]))
        back, labels = io.read_dataset(tmp_path / "bare.json")
        assert labels is None and len(back) == 1

    def test_dataset_nested_pointer(self):
        with pytest.raises(io.InputError, match="/graphs/1/structure"):
            io.dataset_from_json({"graphs": [graph_obj(), graph_obj(structure=[[0]])]}, "d.json")

    def test_matrix_csv_roundtrip(self, tmp_path):
        M = np.random.default_rng(1).normal(size=(3, 4)) / 7
        io.write_text(tmp_path / "m.csv", io.matrix_to_csv(M))
        back, rows, cols = io.read_matrix_csv(tmp_path / "m.csv")
        assert back.tobytes() == M.tobytes() and cols == ["0", "1", "2", "3"]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=6))
def test_float_serialization_lossless(values):
    n = len(values)
    g = Graph(np.array(values)[:, None], np.diag(values), np.zeros((n, n, 1)), np.full(n, 1.0 / n))
    assert io.graph_from_json(json.loads(io.dumps(io.graph_to_json(g)))) == g


def run(args, cwd):
    old = os.getcwd()
    os.chdir(cwd)
    try:
        return run_cli(args)
    finally:
        os.chdir(old)


class TestCli:
    def test_generate_deterministic(self, tmp_path):
        assert run(["generate", "circle", "--count", "8", "--seed", "7", "--out", "a.json"], tmp_path) == 0
        assert run(["generate", "circle", "--count", "8", "--seed", "7", "--out", "b.json"], tmp_path) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert json.loads((tmp_path / "a.json").read_text())["schema_version"] == 1

    def test_distance_self(self, tmp_path, capsys):
        g = generate_circle_graphs(count=1)[0]
        io.write_graph(tmp_path / "a.json", g)
        assert run(["distance", "a.json", "a.json", "--alpha", "0.3", "--beta", "0.3"], tmp_path) == 0
        value = float(capsys.readouterr().out.strip())
        assert value >= 0
        plan, _, _ = io.read_matrix_csv(tmp_path / "plan.csv")
        np.testing.assert_allclose(plan.sum(1), g.weights, atol=1e-9)

    def test_barycenter_circle(self, tmp_path):
        run(["generate", "circle", "--out", "c.json"], tmp_path)
        code = run(["barycenter", "c.json", "--n", "15", "--gamma", "5e-5", "--alpha", "0.3", "--beta", "0.3"],
                   tmp_path)
        assert code == 0
        bary = io.read_graph(tmp_path / "barycenter.json")
        np.testing.assert_allclose(bary.edges.sum(-1), 1.0, atol=1e-10)
        trace = json.loads((tmp_path / "barycenter.trace.json").read_text())["loss_trace"]
        assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))

    def test_config_precedence(self, tmp_path, capsys):
        g = generate_circle_graphs(count=2, seed=3)
        io.write_graph(tmp_path / "a.json", g[0])
        io.write_graph(tmp_path / "b.json", g[1])
        (tmp_path / "cfg.json").write_text(json.dumps({"alpha": 0.0, "beta": 0.0}))
        run(["distance", "a.json", "b.json", "--config", "cfg.json"], tmp_path)
        from_config = capsys.readouterr().out
        run(["distance", "a.json", "b.json", "--config", "cfg.json", "--alpha", "0.5"], tmp_path)
        from_flag = capsys.readouterr().out
        run(["distance", "a.json", "b.json", "--alpha", "0.0", "--beta", "0.0"], tmp_path)
        assert from_config == capsys.readouterr().out
        assert from_flag != from_config

    def test_exit_codes(self, tmp_path, capsys):
        assert run(["nonsense"], tmp_path) == 1
        assert run(["distance", "missing.json", "missing.json"], tmp_path) == 1
        assert run(["distance", "--bogus-flag"], tmp_path) == 1
        (tmp_path / "bad.json").write_text(json.dumps(graph_obj(structure=[[0, 1], [1, None]])))
        assert run(["distance", "bad.json", "bad.json"], tmp_path) == 1
        assert "bad.json: /structure/1/1" in capsys.readouterr().err
        (tmp_path / "cfg.json").write_text(json.dumps({"not_an_option": 1}))
        assert run(["generate", "circle", "--config", "cfg.json"], tmp_path) == 1

    def test_solver_failure_exit_code(self, tmp_path):
        io.write_graph(tmp_path / "a.json", random_graph(np.random.default_rng(0), 3))
        io.write_graph(tmp_path / "b.json", random_graph(np.random.default_rng(1), 3))
        # a gram matrix that cannot be factorised
        io.write_text(tmp_path / "K.csv", io.matrix_to_csv(-10 * np.eye(2)))
        io.write_text(tmp_path / "Kt.csv", io.matrix_to_csv(np.ones((1, 2))))
        io.write_dataset(tmp_path / "out.json", [random_graph(np.random.default_rng(2), 3)] * 2)
        (tmp_path / "cands.json").write_text(json.dumps(
            {"candidates": [[io.graph_to_json(random_graph(np.random.default_rng(3), 3))]], "truths": [0]}))
        code = run(["predict", "--gram-train", "K.csv", "--test-kernel", "Kt.csv", "--outputs", "out.json",
                    "--candidates", "cands.json", "--m-out", "3"], tmp_path)
        assert code == 2

    def test_predict_pipeline(self, tmp_path):
        task = prediction_task(seed=0, n_train=8, n_test=3, n_candidates=4)
        K = gaussian_kernel(task["X_train"], task["X_train"], 0.5)
        Kt = gaussian_kernel(task["X_test"], task["X_train"], 0.5)
        io.write_text(tmp_path / "K.csv", io.matrix_to_csv(K))
        io.write_text(tmp_path / "Kt.csv", io.matrix_to_csv(Kt))
        io.write_dataset(tmp_path / "out.json", task["train_outputs"])
        (tmp_path / "c.json").write_text(io.dumps({"candidates": [[io.graph_to_json(g) for g in c]
                                                                  for c in task["candidates"]],
                                                   "truths": task["truths"]}))
        args = ["predict", "--gram-train", "K.csv", "--test-kernel", "Kt.csv", "--outputs", "out.json",
                "--candidates", "c.json", "--m-out", "6", "--max-iters", "100", "--tol", "1e-6"]
        assert run(args, tmp_path) == 0
        result = json.loads((tmp_path / "prediction.json").read_text())
        acc = [result["top_k"][k] for k in ("1", "3", "5")]
        assert acc == sorted(acc)
