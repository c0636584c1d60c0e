"""Input parsers and versioned JSON results."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io

from .data import MODEL_KINDS, DataError, DataKind, Dataset, Partition

FORMATS = ("edges-tsv", "mm-coord", "csv-counts")
SCHEMA_VERSION = "1.0"


class InputError(ValueError):
    """Unreadable or malformed input file."""


class FormatMismatchError(ValueError):
    """The file format or content does not fit the requested model."""


class SchemaError(ValueError):
    """Result file with a missing or unsupported schema."""


@dataclass(frozen=True)
class InputSpec:
    """Where a dataset comes from and how to parse it; stored in fit results."""

    path: str
    format: str
    model: str
    nodes: Optional[int] = None
    cols: Optional[int] = None
    undirected: bool = False
    self_loops: bool = False
    sum_duplicates: bool = False

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def target_kind(model: str, undirected: bool) -> DataKind:
    kinds = MODEL_KINDS[model]
    if DataKind.DIRECTED_GRAPH in kinds:
        return DataKind.UNDIRECTED_GRAPH if undirected else DataKind.DIRECTED_GRAPH
    return kinds[0]


def _coords_to_dataset(kind, n, d, r, c, v, spec: InputSpec) -> Dataset:
    r, c, v = (np.asarray(a) for a in (r, c, v))
    if v.size and not np.all(np.mod(v, 1) == 0):
        raise InputError("entries must be integers")
    v = v.astype(np.int64)
    if np.any(v < 0):
        raise InputError("negative count")
    if kind == DataKind.UNDIRECTED_GRAPH:
        r, c = np.minimum(r, c), np.maximum(r, c)
    key = r.astype(np.int64) * max(d, 1) + c
    uniq, inv = np.unique(key, return_inverse=True)
    if uniq.size != key.size:
        if not spec.sum_duplicates:
            raise InputError("duplicate coordinate (use --sum-duplicates to add them up)")
        v = np.bincount(inv.ravel(), weights=v, minlength=uniq.size).astype(np.int64)
        r, c = uniq // max(d, 1), uniq % max(d, 1)
    self_loops = spec.self_loops or (kind in (DataKind.DIRECTED_GRAPH, DataKind.UNDIRECTED_GRAPH)
                                     and spec.model == "dcsbm")
    try:
        return Dataset(kind, n, d, r, c, v, self_loops_allowed=self_loops)
    except DataError as e:
        raise InputError(str(e)) from e


def read_edges_tsv(spec: InputSpec) -> Dataset:
    """Tab-separated ``src dst [weight]`` lines, 0-based ids, ``#`` comments.

    A comment of the form ``# nodes: N`` (or ``# dims: N D``) declares the
    dimensions when ``--nodes`` is not given.
    """
    kind = target_kind(spec.model, spec.undirected)
    rows, cols, vals = [], [], []
    declared = None
    try:
        with open(spec.path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("nodes:"):
                        declared = (int(body.split(":")[1]),) * 2
                    elif body.startswith("dims:"):
                        a, b = body.split(":")[1].split()
                        declared = (int(a), int(b))
                    continue
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise InputError(f"line {ln}: expected 2 or 3 tab-separated fields")
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                w = float(parts[2]) if len(parts) == 3 else 1.0
                vals.append(w)
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(str(e)) from e
    except ValueError as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"bad number: {e}") from e
    r, c = np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)
    if r.size and (r.min() < 0 or c.min() < 0):
        raise InputError("negative node id")
    if kind == DataKind.BIPARTITE_MATRIX:
        n = spec.nodes or (declared[0] if declared else (int(r.max()) + 1 if r.size else 0))
        d = spec.cols or (declared[1] if declared else (int(c.max()) + 1 if c.size else 0))
    else:
        n = spec.nodes or (declared[0] if declared else (int(max(r.max(), c.max())) + 1 if r.size else 0))
        d = n
    if r.size and (r.max() >= n or c.max() >= d):
        raise InputError("id out of range for the declared dimensions")
    return _coords_to_dataset(kind, n, d, r, c, np.array(vals), spec)


def read_mm_coord(spec: InputSpec) -> Dataset:
    """Matrix Market coordinate files with integer or pattern entries (1-based)."""
    kind = target_kind(spec.model, spec.undirected)
    try:
        nr, nc, _, fmt, fld, sym = scipy.io.mminfo(spec.path)
        if fmt != "coordinate":
            raise InputError("only the coordinate Matrix Market format is supported")
        if fld not in ("integer", "pattern"):
            raise InputError(f"unsupported Matrix Market field {fld!r}")
        m = scipy.io.mmread(spec.path)
    except InputError:
        raise
    except Exception as e:
        raise InputError(f"cannot read Matrix Market file: {e}") from e
    m = m.tocoo()
    r, c, v = m.row.astype(np.int64), m.col.astype(np.int64), m.data
    if sym != "general" and kind == DataKind.UNDIRECTED_GRAPH:
        keep = r <= c
        r, c, v = r[keep], c[keep], v[keep]
    if kind in (DataKind.DIRECTED_GRAPH, DataKind.UNDIRECTED_GRAPH) and nr != nc:
        raise FormatMismatchError("graph models need a square matrix")
    return _coords_to_dataset(kind, nr, nc, r, c, v, spec)


def read_csv_counts(spec: InputSpec) -> Dataset:
    """Dense comma-separated integer matrix, one row per line, ``#`` comments."""
    kind = target_kind(spec.model, spec.undirected)
    try:
        x = np.loadtxt(spec.path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as e:
        raise InputError(f"cannot read CSV counts: {e}") from e
    if kind in (DataKind.DIRECTED_GRAPH, DataKind.UNDIRECTED_GRAPH):
        if x.shape[0] != x.shape[1]:
            raise FormatMismatchError("graph models need a square matrix")
        if kind == DataKind.UNDIRECTED_GRAPH:
            if not np.array_equal(x, x.T):
                raise InputError("undirected graph needs a symmetric matrix")
            x = np.triu(x)
    r, c = np.nonzero(x)
    return _coords_to_dataset(kind, x.shape[0], x.shape[1], r, c, x[r, c], spec)


_READERS = {"edges-tsv": read_edges_tsv, "mm-coord": read_mm_coord, "csv-counts": read_csv_counts}

# which formats make sense for which model
FORMAT_MODELS = {
    "edges-tsv": ("sbm", "dcsbm", "lbm-bern", "dclbm"),
    "mm-coord": ("mom", "sbm", "dcsbm", "lbm-bern", "dclbm"),
    "csv-counts": ("mom", "sbm", "dcsbm", "lbm-bern", "dclbm"),
}


def load_dataset(spec: InputSpec) -> Dataset:
    """Parse and check a dataset for ``spec.model``.

    Raises :class:`InputError` for malformed files and
    :class:`FormatMismatchError` when format or content cannot feed the model.
    """
    if spec.format not in _READERS:
        raise FormatMismatchError(f"unknown format {spec.format!r}")
    if spec.model not in FORMAT_MODELS[spec.format]:
        raise FormatMismatchError(f"format {spec.format} cannot describe data for model {spec.model}")
    ds = _READERS[spec.format](spec)
    if spec.model in ("sbm", "lbm-bern") and np.any(ds.vals > 1):
        raise FormatMismatchError(f"model {spec.model} needs binary entries")
    return ds


# ---------------------------------------------------------------- labels


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in np.asarray(labels)), encoding="utf-8")


def read_labels(path) -> np.ndarray:
    """Integer labels, whitespace separated, or the partition of a fit result JSON."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return np.asarray(json.loads(text)["partition"]["labels"], dtype=np.int64)
    vals = [tok for line in text.splitlines() if not line.lstrip().startswith("#") for tok in line.split()]
    return np.asarray([int(t) for t in vals], dtype=np.int64)


# ---------------------------------------------------------------- results


def check_schema(obj: dict, kind: str) -> None:
    if not isinstance(obj, dict) or obj.get("schema") != kind:
        raise SchemaError(f"not a {kind} document")
    ver = str(obj.get("schema_version", ""))
    if ver.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported schema version {ver!r}")


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class FitResult:
    model: str
    hyper: dict
    config: dict
    input: dict
    dims: dict
    labels: list
    n_rows: Optional[int]
    icl: dict
    history: list
    seed: int
    tool_version: str
    timing: dict = field(default_factory=dict)

    SCHEMA = "iclhier.fit"

    def partition(self) -> Partition:
        return Partition(np.asarray(self.labels, dtype=np.int64), n_rows=self.n_rows)

    def to_dict(self) -> dict:
        p = self.partition()
        return {
            "schema": self.SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "model": self.model,
            "hyper": self.hyper,
            "config": self.config,
            "seed": self.seed,
            "input": self.input,
            "dims": self.dims,
            "partition": {
                "labels": [int(v) for v in self.labels],
                "K": int(p.K),
                "n_rows": self.n_rows,
                "K_rows": p.K_rows if p.is_bipartition else int(p.K),
                "K_cols": p.K_cols if p.is_bipartition else 0,
            },
            "icl": self.icl,
            "history": [float(v) for v in self.history],
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        check_schema(d, cls.SCHEMA)
        try:
            return cls(d["model"], d["hyper"], d["config"], d["input"], d["dims"],
                       d["partition"]["labels"], d["partition"]["n_rows"], d["icl"], d["history"],
                       d["seed"], d["tool_version"], d.get("timing", {}))
        except (KeyError, TypeError) as e:
            raise SchemaError(f"incomplete fit document: {e}") from e


def dump_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from e


def hierarchy_to_dict(path, fit: FitResult, cut, tool_version: str) -> dict:
    """Serialise a pruned and ordered :class:`~iclhier.hierarchy.HierarchyPath`."""
    K = path.K
    heights = path.heights() if path.n_steps else np.zeros(0)
    steps = [{
        "merge": [int(g), int(h)],
        "log_alpha": float(a),
        "intercept": float(path.intercepts[t + 1]),
        "n_clusters": int(K - t - 1),
        "height": float(heights[t]),
    } for t, ((g, h), a) in enumerate(zip(path.merges, path.log_alpha))]
    front = [{
        "step": int(j),
        "n_clusters": int(K - j),
        "log_alpha": float(x),
        "intercept": float(path.intercepts[j]),
    } for j, x in zip(path.front, path.front_log_alpha)]
    return {
        "schema": "iclhier.hierarchy",
        "schema_version": SCHEMA_VERSION,
        "tool_version": tool_version,
        "model": fit.model,
        "K": K,
        "n_rows": fit.n_rows,
        "initial_labels": [int(v) for v in path.initial.labels],
        "leaf_side": [int(v) for v in path.leaf_side],
        "initial_intercept": float(path.intercepts[0]),
        "steps": steps,
        "front": front,
        "tree": {
            "children": [[int(a), int(b)] for a, b in path.children],
            "roots": path.roots(),
            "heights": [float(h) for h in heights],
        },
        "leaf_order": [int(v) for v in path.leaf_order],
        "leaf_order_cost": _finite(path.leaf_order_cost),
        "cut": {
            "n_clusters": cut.n_clusters,
            "front_index": cut.front_index,
            "low_confidence": cut.low_confidence,
            "rule": cut.rule,
            "heuristic": True,
        },
    }
