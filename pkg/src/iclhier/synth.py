"""Synthetic benchmark generators and partition agreement scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import DataKind, Dataset, Partition

NMI_VARIANT = "sqrt"


@dataclass(frozen=True)
class HierSbmSpec:
    """Two-level planted block structure: ``super_K`` groups of ``sub_per_super`` blocks."""

    n: int = 1500
    super_K: int = 3
    sub_per_super: int = 5
    p_sub: float = 0.1
    p_super: float = 0.025
    p_out: float = 0.001
    directed: bool = True

    def __post_init__(self):
        for p in (self.p_sub, self.p_super, self.p_out):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.n < 1 or self.super_K < 1 or self.sub_per_super < 1:
            raise ValueError("sizes must be positive")
        if self.n < self.super_K * self.sub_per_super:
            raise ValueError("fewer nodes than planted blocks")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MomSpec:
    n: int = 500
    K: int = 15
    d: int = 100
    boosted: int = 10
    boost_factor: float = 4.0
    draws: int = 50

    def __post_init__(self):
        if min(self.n, self.K, self.d, self.draws) < 1 or self.boosted < 0:
            raise ValueError("counts must be positive")
        if self.boosted > self.d:
            raise ValueError("boosted exceeds the number of outcomes")
        if not self.boost_factor > 0:
            raise ValueError("boost_factor must be positive")

    def to_dict(self):
        return asdict(self)


def near_equal_labels(n: int, K: int) -> np.ndarray:
    """Contiguous blocks whose sizes differ by at most one."""
    return (np.arange(n) * K) // n


def gen_hier_sbm(spec: HierSbmSpec, rng: np.random.Generator):
    """Bernoulli graph with three connection tiers; returns (dataset, sub, super)."""
    n_sub = spec.super_K * spec.sub_per_super
    sub = near_equal_labels(spec.n, n_sub)
    sup = sub // spec.sub_per_super
    same_sub = sub[:, None] == sub[None, :]
    same_sup = sup[:, None] == sup[None, :]
    prob = np.where(same_sub, spec.p_sub, np.where(same_sup, spec.p_super, spec.p_out))
    adj = rng.random((spec.n, spec.n)) < prob
    np.fill_diagonal(adj, False)
    if spec.directed:
        kind = DataKind.DIRECTED_GRAPH
    else:
        adj = np.triu(adj, 1)
        kind = DataKind.UNDIRECTED_GRAPH
    r, c = np.nonzero(adj)
    ds = Dataset(kind, spec.n, spec.n, r, c, np.ones(r.size, dtype=np.int64))
    return ds, Partition(sub), Partition(sup)


def mom_profiles(spec: MomSpec, rng: np.random.Generator) -> np.ndarray:
    """Per-cluster outcome probabilities: uniform with boosted outcomes, renormalised."""
    prof = np.ones((spec.K, spec.d))
    for k in range(spec.K):
        prof[k, rng.choice(spec.d, spec.boosted, replace=False)] *= spec.boost_factor
    return prof / prof.sum(axis=1, keepdims=True)


def gen_mom(spec: MomSpec, rng: np.random.Generator):
    """Multinomial count vectors from equal-proportion clusters; returns (dataset, labels, profiles)."""
    prof = mom_profiles(spec, rng)
    sizes = rng.multinomial(spec.n, np.full(spec.K, 1.0 / spec.K))
    labels = rng.permutation(np.repeat(np.arange(spec.K), sizes))
    x = np.vstack([rng.multinomial(spec.draws, prof[k]) for k in labels])
    ds = Dataset.from_dense(x, DataKind.COUNT_MATRIX)
    return ds, Partition(labels), prof


def _labels(p):
    return p.labels if isinstance(p, Partition) else np.asarray(p)


def nmi(p1, p2) -> float:
    """Mutual information normalised by the geometric mean of the two entropies.

    Returns 0 when either partition has a single cluster.
    """
    a, b = _labels(p1), _labels(p2)
    if a.size != b.size:
        raise ValueError("partitions have different lengths")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = -np.sum(pa * np.log(pa))
    hb = -np.sum(pb * np.log(pb))
    if ha <= 0 or hb <= 0:
        return 0.0
    pij = table / n
    nz = pij > 0
    mi = np.sum(pij[nz] * np.log(pij[nz] / np.outer(pa, pb)[nz]))
    return float(min(max(mi / np.sqrt(ha * hb), 0.0), 1.0))
