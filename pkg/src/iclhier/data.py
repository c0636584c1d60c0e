"""Datasets, partitions and run configuration shared by every module."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp


class DataKind(str, enum.Enum):
    COUNT_MATRIX = "count-matrix"
    DIRECTED_GRAPH = "directed-graph"
    UNDIRECTED_GRAPH = "undirected-graph"
    BIPARTITE_MATRIX = "bipartite-matrix"


GRAPH_KINDS = (DataKind.DIRECTED_GRAPH, DataKind.UNDIRECTED_GRAPH)


class DataError(ValueError):
    """Malformed dataset content (negative counts, bad coordinates, ...)."""


@dataclass(frozen=True)
class Dataset:
    """Sparse nonnegative integer data in coordinate form.

    For graphs ``d == n``.  An undirected graph stores every unordered pair
    once, normalised so that ``row <= col``.
    """

    kind: DataKind
    n: int
    d: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    self_loops_allowed: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals)
        if vals.size and not np.all(np.equal(np.mod(vals, 1), 0)):
            raise DataError("entries must be integers")
        vals = vals.astype(np.int64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DataError("coordinate arrays differ in length")
        if self.kind in GRAPH_KINDS and self.d != self.n:
            raise DataError("graph datasets must be square")
        if np.any(vals < 0):
            raise DataError("negative entry")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n
                          or cols.min() < 0 or cols.max() >= self.d):
            raise DataError("coordinate out of range")
        if self.kind == DataKind.UNDIRECTED_GRAPH:
            rows, cols = np.minimum(rows, cols), np.maximum(rows, cols)
        keep = vals != 0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        if self.kind in GRAPH_KINDS and not self.self_loops_allowed and np.any(rows == cols):
            raise DataError("self-loop in a dataset declared without self-loops")
        key = rows * self.d + cols
        if np.unique(key).size != key.size:
            raise DataError("duplicate coordinate")
        order = np.argsort(key, kind="stable")
        object.__setattr__(self, "rows", rows[order])
        object.__setattr__(self, "cols", cols[order])
        object.__setattr__(self, "vals", vals[order])

    @classmethod
    def from_dense(cls, x, kind: DataKind, self_loops_allowed: bool = False) -> "Dataset":
        x = np.asarray(x)
        if x.ndim != 2:
            raise DataError("expected a 2-d array")
        if kind == DataKind.UNDIRECTED_GRAPH:
            if not np.array_equal(x, x.T):
                raise DataError("undirected graph needs a symmetric matrix")
            x = np.triu(x)
        r, c = np.nonzero(x)
        return cls(kind, x.shape[0], x.shape[1], r, c, x[r, c], self_loops_allowed)

    @property
    def is_graph(self) -> bool:
        return self.kind in GRAPH_KINDS

    @property
    def is_bipartite(self) -> bool:
        return self.kind == DataKind.BIPARTITE_MATRIX

    @property
    def n_elements(self) -> int:
        """Number of clustered elements (rows + columns for bipartite data)."""
        return self.n + self.d if self.is_bipartite else self.n

    @cached_property
    def ordered(self) -> sp.csr_matrix:
        """Matrix over ordered pairs; undirected graphs are symmetrised."""
        r, c, v = self.rows, self.cols, self.vals
        if self.kind == DataKind.UNDIRECTED_GRAPH:
            off = r != c
            r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, v[off]])
        m = sp.csr_matrix((v, (r, c)), shape=(self.n, self.d), dtype=np.int64)
        m.sort_indices()
        return m

    @cached_property
    def row_totals(self) -> np.ndarray:
        return np.asarray(self.ordered.sum(axis=1)).ravel().astype(np.int64)

    @cached_property
    def col_totals(self) -> np.ndarray:
        return np.asarray(self.ordered.sum(axis=0)).ravel().astype(np.int64)

    def dense(self) -> np.ndarray:
        return self.ordered.toarray()

    @property
    def total(self) -> int:
        return int(self.ordered.sum())


@dataclass(frozen=True)
class Partition:
    """Assignment of elements to ``K`` non-empty clusters.

    Bipartitions carry ``n_rows``: elements ``[0, n_rows)`` are rows and the
    remaining ones are columns; row and column clusters are disjoint.
    """

    labels: np.ndarray
    K: Optional[int] = None
    n_rows: Optional[int] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if self.K is None:
            object.__setattr__(self, "K", int(labels.max()) + 1 if labels.size else 0)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def is_bipartition(self) -> bool:
        return self.n_rows is not None

    @cached_property
    def sizes(self) -> np.ndarray:
        lab = self.labels[(self.labels >= 0) & (self.labels < self.K)]
        return np.bincount(lab, minlength=self.K)

    @property
    def row_labels(self) -> np.ndarray:
        return self.labels[: self.n_rows] if self.is_bipartition else self.labels

    @property
    def col_labels(self) -> np.ndarray:
        return self.labels[self.n_rows:] if self.is_bipartition else self.labels[:0]

    @property
    def K_rows(self) -> int:
        return int(np.unique(self.row_labels).size)

    @property
    def K_cols(self) -> int:
        return int(np.unique(self.col_labels).size)

    def cluster_side(self) -> np.ndarray:
        """0 for row (or plain) clusters, 1 for column clusters."""
        side = np.zeros(self.K, dtype=np.int8)
        if self.is_bipartition:
            side[np.unique(self.col_labels)] = 1
        return side

    def clusters(self) -> list:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(self.sizes)[:-1]
        return np.split(order, bounds)

    def as_sets(self) -> frozenset:
        return frozenset(frozenset(c.tolist()) for c in self.clusters() if c.size)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (self.n_rows == other.n_rows and self.K == other.K
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.K, self.n_rows, self.labels.tobytes()))


def canonical_labels(labels) -> np.ndarray:
    """Renumber clusters by order of first occurrence."""
    labels = np.asarray(labels, dtype=np.int64)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.ravel()]


def relabel_canonical(p: Partition) -> Partition:
    return Partition(canonical_labels(p.labels), n_rows=p.n_rows)


def validate_partition(p: Partition, ds: Dataset) -> bool:
    if p.n != ds.n_elements:
        return False
    lab = p.labels
    if lab.size == 0 or p.K < 1:
        return False
    if lab.min() < 0 or lab.max() >= p.K:
        return False
    if np.any(np.bincount(lab, minlength=p.K) == 0):
        return False
    if ds.is_bipartite:
        if p.n_rows != ds.n:
            return False
        if np.intersect1d(p.row_labels, p.col_labels).size:
            return False
    elif p.is_bipartition:
        return False
    return True


MODELS = ("mom", "sbm", "dcsbm", "lbm-bern", "dclbm")

MODEL_KINDS = {
    "mom": (DataKind.COUNT_MATRIX,),
    "sbm": GRAPH_KINDS,
    "dcsbm": GRAPH_KINDS,
    "lbm-bern": (DataKind.BIPARTITE_MATRIX,),
    "dclbm": (DataKind.BIPARTITE_MATRIX,),
}


@dataclass
class RunConfig:
    """Hyper-parameters of a fit.

    ``beta`` is the Dirichlet parameter of the mixture of multinomials and the
    exponential scale of the degree-corrected models (``None`` picks the mean
    count per ordered pair).  ``eta0``/``zeta0`` parametrise the Beta prior of
    the Bernoulli block models.
    """

    model: str = "sbm"
    alpha: float = 1.0
    beta: Optional[float] = None
    eta0: float = 1.0
    zeta0: float = 1.0
    pop_size: int = 50
    mutation_prob: float = 0.25
    max_generations: int = 10
    initial_K: int = 20
    seed: int = 1234
    threads: int = 1
    early_stop: bool = False
    restrict_moves: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        if self.initial_K < 1:
            raise ValueError("initial_K must be at least 1")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if not (self.eta0 > 0 and self.zeta0 > 0):
            raise ValueError("eta0 and zeta0 must be positive")

    def resolved_beta(self, ds: Dataset) -> float:
        if self.beta is not None:
            return float(self.beta)
        if self.model == "mom":
            return 1.0
        npairs = ds.n * ds.d
        mean = ds.total / npairs if npairs else 0.0
        return mean if mean > 0 else 1.0

    def hyper(self, ds: Dataset) -> dict:
        if self.model in ("sbm", "lbm-bern"):
            return {"eta0": float(self.eta0), "zeta0": float(self.zeta0)}
        return {"beta": self.resolved_beta(ds)}
