"""JSON and CSV readers/writers.

Floats are written with ``repr``, the shortest string that parses back to
the same double, so every written array round-trips exactly. Parse errors
name the file and a JSON pointer to the offending value.
"""

import csv
import io
import json
import math
from numbers import Real

import numpy as np

from .graph import Graph, ValidationError, validate_graph

SCHEMA_VERSION = 1


class InputError(ValidationError):
    def __init__(self, path, pointer, message):
        self.path, self.pointer = path, pointer or "/"
        super().__init__(f"{path}: {self.pointer}: {message}")


def _is_number(x):
    return isinstance(x, Real) and not isinstance(x, bool)


def _array(value, path, ptr, shape):
    """Parse a nested list into a float array whose dims match ``shape`` (None = free)."""

    def walk(v, p, depth):
        if depth == len(shape):
            if not _is_number(v):
                raise InputError(path, p, f"expected a number, got {type(v).__name__}")
            if not math.isfinite(v):
                raise InputError(path, p, "non-finite number")
            return float(v)
        if not isinstance(v, list):
            raise InputError(path, p, f"expected an array, got {type(v).__name__}")
        if shape[depth] is not None and len(v) != shape[depth]:
            raise InputError(path, p, f"expected length {shape[depth]}, got {len(v)}")
        return [walk(x, f"{p}/{k}", depth + 1) for k, x in enumerate(v)]

    data = walk(value, ptr, 0)
    # free inner dimensions must still be rectangular
    flat_shape = []
    level = data
    for d in range(len(shape)):
        flat_shape.append(len(level))
        if d + 1 < len(shape):
            if not level:
                flat_shape += [0] * (len(shape) - d - 1)
                break
            level = level[0]
    try:
        arr = np.array(data, dtype=np.float64)
    except ValueError:
        arr = None
    if arr is None or arr.shape != tuple(flat_shape):
        raise InputError(path, ptr, "ragged nested array")
    return arr


def _int(value, path, ptr, minimum=0):
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise InputError(path, ptr, f"expected an integer >= {minimum}")
    return value


def graph_from_json(obj, path="<memory>", ptr=""):
    if not isinstance(obj, dict):
        raise InputError(path, ptr, "expected a graph object")
    for key in ("n", "node_features", "structure", "edge_features"):
        if key not in obj:
            raise InputError(path, ptr, f"missing field {key!r}")
    n = _int(obj["n"], path, f"{ptr}/n", minimum=1)
    F = _array(obj["node_features"], path, f"{ptr}/node_features", (n, None))
    A = _array(obj["structure"], path, f"{ptr}/structure", (n, n))
    ef = obj["edge_features"]
    eptr = f"{ptr}/edge_features"
    if not isinstance(ef, dict) or len(ef) != 1 or next(iter(ef)) not in ("dense", "sparse"):
        raise InputError(path, eptr, "expected {\"dense\": ...} or {\"sparse\": ...}")
    if "dense" in ef:
        E = _array(ef["dense"], path, f"{eptr}/dense", (n, n, None))
    else:
        sp = ef["sparse"]
        sptr = f"{eptr}/sparse"
        if not isinstance(sp, dict):
            raise InputError(path, sptr, "expected an object")
        for key in ("shape_t", "triplets", "default"):
            if key not in sp:
                raise InputError(path, sptr, f"missing field {key!r}")
        T = _int(sp["shape_t"], path, f"{sptr}/shape_t")
        default = _array(sp["default"], path, f"{sptr}/default", (T,))
        E = np.broadcast_to(default, (n, n, T)).copy()
        if not isinstance(sp["triplets"], list):
            raise InputError(path, f"{sptr}/triplets", "expected an array")
        seen = set()
        for k, trip in enumerate(sp["triplets"]):
            tptr = f"{sptr}/triplets/{k}"
            if not isinstance(trip, list) or len(trip) != 4:
                raise InputError(path, tptr, "expected [i, j, t, value]")
            i, j, t = (_int(trip[x], path, f"{tptr}/{x}") for x in range(3))
            if i >= n or j >= n or t >= T:
                raise InputError(path, tptr, f"index ({i}, {j}, {t}) out of range for n={n}, T={T}")
            if (i, j, t) in seen:
                raise InputError(path, tptr, f"duplicate entry ({i}, {j}, {t})")
            seen.add((i, j, t))
            if not _is_number(trip[3]) or not math.isfinite(trip[3]):
                raise InputError(path, f"{tptr}/3", "expected a finite number")
            E[i, j, t] = float(trip[3])
    if obj.get("weights") is None:
        p = np.full(n, 1.0 / n)
    else:
        p = _array(obj["weights"], path, f"{ptr}/weights", (n,))
    g = Graph(F, A, E, p)
    try:
        validate_graph(g)
    except ValidationError as exc:
        raise InputError(path, ptr, str(exc)) from None
    return g


def graph_to_json(g):
    return {
        "schema_version": SCHEMA_VERSION,
        "n": g.n,
        "node_features": g.features.tolist(),
        "structure": g.structure.tolist(),
        "edge_features": {"dense": g.edges.tolist()},
        "weights": g.weights.tolist(),
    }


def dumps(obj):
    # json emits floats with repr, which is exact
    return json.dumps(obj, indent=None, separators=(",", ":"), sort_keys=False, allow_nan=False) + "\n"


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(path, "", f"cannot read file ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(path, "", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_graph(path):
    return graph_from_json(load_json(path), str(path))


def write_graph(path, g, **extra):
    obj = graph_to_json(g)
    obj.update(extra)
    write_text(path, dumps(obj))


def dataset_from_json(obj, path="<memory>"):
    """Bare array of graphs, or ``{"graphs": [...], "labels": [...]}``; returns (graphs, labels)."""
    labels = None
    ptr = ""
    if isinstance(obj, dict):
        if "graphs" not in obj:
            raise InputError(path, "", "missing field 'graphs'")
        labels = obj.get("labels")
        obj = obj["graphs"]
        ptr = "/graphs"
    if not isinstance(obj, list) or not obj:
        raise InputError(path, ptr, "expected a nonempty array of graphs")
    graphs = [graph_from_json(g, path, f"{ptr}/{k}") for k, g in enumerate(obj)]
    if labels is not None and (not isinstance(labels, list) or len(labels) != len(graphs)):
        raise InputError(path, "/labels", f"expected an array of {len(graphs)} labels")
    return graphs, labels


def read_dataset(path):
    return dataset_from_json(load_json(path), str(path))


def dataset_to_json(graphs, labels=None, **extra):
    obj = {"schema_version": SCHEMA_VERSION, "graphs": [graph_to_json(g) for g in graphs]}
    if labels is not None:
        obj["labels"] = list(labels)
    obj.update(extra)
    return obj


def write_dataset(path, graphs, labels=None, **extra):
    write_text(path, dumps(dataset_to_json(graphs, labels, **extra)))


def _fmt(x):
    return repr(float(x))


def matrix_to_csv(M, row_ids=None, col_ids=None):
    """CSV with a header of column ids and a leading id column."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    row_ids = list(range(M.shape[0])) if row_ids is None else list(row_ids)
    col_ids = list(range(M.shape[1])) if col_ids is None else list(col_ids)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [str(c) for c in col_ids])
    for rid, row in zip(row_ids, M):
        w.writerow([str(rid)] + [_fmt(x) for x in row])
    return buf.getvalue()


def read_matrix_csv(path):
    """Inverse of :func:`matrix_to_csv`; returns (matrix, row_ids, col_ids)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(path, "", f"cannot read file ({exc.strerror})") from None
    if not rows or rows[0][:1] != ["id"]:
        raise InputError(path, "", "expected a header row starting with 'id'")
    col_ids = rows[0][1:]
    data, row_ids = [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(col_ids) + 1:
            raise InputError(path, f"line {k}", f"expected {len(col_ids) + 1} fields, got {len(row)}")
        row_ids.append(row[0])
        try:
            vals = [float(x) for x in row[1:]]
        except ValueError:
            raise InputError(path, f"line {k}", "non-numeric entry") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(path, f"line {k}", "non-finite entry")
        data.append(vals)
    return np.array(data, dtype=np.float64).reshape(len(row_ids), len(col_ids)), row_ids, col_ids
