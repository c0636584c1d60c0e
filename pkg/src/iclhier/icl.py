"""Exact integrated classification likelihood for the five supported models.

``ICL(Z) = log p(X | Z, beta) + log p(Z | alpha)`` with a symmetric Dirichlet
prior on cluster proportions.  Closed-form terms are computed here from the
sufficient statistics held by :class:`ModelState`; incremental swap and merge
deltas come from the numba kernels in :mod:`iclhier._kernels`.

Data constants that do not depend on the partition are left out unless
``include_constant=True``; values with and without the constant are not
comparable across models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import _kernels as kn
from .data import MODEL_KINDS, Dataset, Partition, RunConfig, canonical_labels

TABLE_CAP = 1 << 22


class ModelMismatchError(ValueError):
    """The dataset kind cannot be used with the requested model."""


class DomainError(ValueError):
    """Invalid numerical input (non-positive alpha, non-binary data, ...)."""


@dataclass(frozen=True)
class IclValue:
    log_p_x_given_z: float
    log_p_z_given_alpha: float
    includes_data_constant: bool = False

    @property
    def total(self) -> float:
        return self.log_p_x_given_z + self.log_p_z_given_alpha


# ---------------------------------------------------------------- log p(Z)


def log_p_z_sizes(sizes, alpha: float) -> float:
    """Dirichlet-multinomial marginal of one partition given its cluster sizes."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    sizes = np.asarray(sizes, dtype=np.float64)
    sizes = sizes[sizes > 0]
    K = sizes.size
    if K <= 1:
        return 0.0
    n = sizes.sum()
    return float(gammaln(K * alpha) + np.sum(gammaln(alpha + sizes))
                 - K * gammaln(alpha) - gammaln(n + K * alpha))


def log_p_z(partition: Partition, alpha: float) -> float:
    """log p(Z | alpha); bipartitions get the product of the row and column factors."""
    if partition.is_bipartition:
        r = np.bincount(partition.row_labels)
        c = np.bincount(partition.col_labels)
        return log_p_z_sizes(r, alpha) + log_p_z_sizes(c, alpha)
    return log_p_z_sizes(partition.sizes, alpha)


# ---------------------------------------------------------------- log p(X | Z)


def _phi_term(n, deg):
    n = np.asarray(n, dtype=np.float64)
    deg = np.asarray(deg, dtype=np.float64)
    ok = n > 0
    n, deg = n[ok], deg[ok]
    return float(np.sum(gammaln(n) + deg * np.log(n) - gammaln(n + deg)))


def _beta_bernoulli_blocks(nu, pairs, eta0, zeta0):
    eta = eta0 + nu
    zeta = zeta0 + pairs - nu
    const = gammaln(eta0 + zeta0) - gammaln(eta0) - gammaln(zeta0)
    return float(np.sum(const + gammaln(eta) + gammaln(zeta) - gammaln(eta + zeta)))


def _gamma_poisson_blocks(nu, pairs, beta):
    return float(np.sum(gammaln(nu + 1.0) + nu * math.log(beta) - (nu + 1.0) * np.log(beta * pairs + 1.0)))


def log_p_x_mom(state: "ModelState", include_constant: bool = False) -> float:
    m = state.model
    live = state.size > 0
    o = state.o[live].astype(np.float64)
    c = state.c[live].astype(np.float64)
    beta, d = m.hyper["beta"], m.dataset.d
    val = float(np.sum(gammaln(beta * d) - gammaln(c + beta * d))
                + np.sum(gammaln(o + beta) - gammaln(beta)))
    if include_constant:
        val += m.data_constant()
    return val


def _live_blocks(state):
    live = np.flatnonzero(state.size > 0)
    nu = state.nu[np.ix_(live, live)].astype(np.float64)
    n = state.size[live].astype(np.float64)
    return live, nu, n


def log_p_x_sbm(state: "ModelState") -> float:
    m = state.model
    _, nu, n = _live_blocks(state)
    pairs = np.outer(n, n) - np.diag(n)
    return _beta_bernoulli_blocks(nu, pairs, m.hyper["eta0"], m.hyper["zeta0"])


def log_p_x_dcsbm(state: "ModelState", include_constant: bool = False) -> float:
    m = state.model
    live, nu, n = _live_blocks(state)
    val = _gamma_poisson_blocks(nu, np.outer(n, n), m.hyper["beta"])
    val += _phi_term(n, state.dout[live]) + _phi_term(n, state.din[live])
    if include_constant:
        val += m.data_constant()
    return val


def _bip_blocks(state):
    live = state.size > 0
    rows = np.flatnonzero(live & (state.side == 0))
    cols = np.flatnonzero(live & (state.side == 1))
    nu = state.nu[np.ix_(rows, cols)].astype(np.float64)
    nr = state.size[rows].astype(np.float64)
    nc = state.size[cols].astype(np.float64)
    return rows, cols, nu, nr, nc


def log_p_x_lbm_bernoulli(state: "ModelState") -> float:
    m = state.model
    _, _, nu, nr, nc = _bip_blocks(state)
    return _beta_bernoulli_blocks(nu, np.outer(nr, nc), m.hyper["eta0"], m.hyper["zeta0"])


def log_p_x_dclbm(state: "ModelState", include_constant: bool = False) -> float:
    m = state.model
    rows, cols, nu, nr, nc = _bip_blocks(state)
    val = _gamma_poisson_blocks(nu, np.outer(nr, nc), m.hyper["beta"])
    val += _phi_term(nr, state.dout[rows]) + _phi_term(nc, state.din[cols])
    if include_constant:
        val += m.data_constant()
    return val


_LOG_P_X = {
    "mom": log_p_x_mom,
    "sbm": lambda s, include_constant=False: log_p_x_sbm(s),
    "dcsbm": log_p_x_dcsbm,
    "lbm-bern": lambda s, include_constant=False: log_p_x_lbm_bernoulli(s),
    "dclbm": log_p_x_dclbm,
}


# ---------------------------------------------------------------- model binding


def _table(f, size):
    return np.ascontiguousarray(f(np.arange(min(int(size), TABLE_CAP), dtype=np.float64)))


class Model:
    """A dataset bound to one observation model and its hyper-parameters.

    Holds the read-only arrays (adjacency lists, lookup tables) shared by all
    :class:`ModelState` objects built on it; safe to share across threads.
    """

    def __init__(self, dataset: Dataset, config: RunConfig):
        if dataset.kind not in MODEL_KINDS[config.model]:
            raise ModelMismatchError(f"model {config.model!r} cannot fit a {dataset.kind.value} dataset")
        self.dataset = dataset
        self.name = config.model
        self.alpha = float(config.alpha)
        self.hyper = config.hyper(dataset)
        self.engine = "mom" if self.name == "mom" else "block"
        self.bipartite = dataset.is_bipartite
        self.n_elements = dataset.n_elements
        if self.name in ("sbm", "lbm-bern") and np.any(dataset.vals > 1):
            raise DomainError(f"{self.name} needs binary entries")
        if self.engine == "mom":
            self._prepare_mom()
        else:
            self._prepare_block()
        self.la = _table(lambda k: gammaln(self.alpha + k) - gammaln(self.alpha), self.n_elements + 2)

    def _prepare_mom(self):
        ds = self.dataset
        x = ds.ordered
        self.ptr, self.idx, self.w = x.indptr.astype(np.int64), x.indices.astype(np.int64), x.data.astype(np.int64)
        self.crow = ds.row_totals
        beta, d = self.hyper["beta"], ds.d
        self.par = np.zeros(8)
        self.par[1:5] = beta, beta * d, gammaln(beta), gammaln(beta * d)
        self.par[7] = self.alpha
        top = int(ds.col_totals.max()) + 2 if ds.d else 2
        self.tb = _table(lambda k: gammaln(beta + k) - gammaln(beta), top)
        self.td = _table(lambda k: gammaln(beta * d + k) - gammaln(beta * d), ds.total + 2)
        self.side_n = np.array([ds.n, 0], dtype=np.int64)

    def _prepare_block(self):
        ds = self.dataset
        if self.bipartite:
            n, d = ds.n, ds.d
            x = ds.ordered.tocoo()
            g = sp.csr_matrix((x.data, (x.row, x.col + n)), shape=(n + d, n + d), dtype=np.int64)
            self.side_n = np.array([n, d], dtype=np.int64)
        else:
            g = ds.ordered.copy()
            self.side_n = np.array([ds.n, 0], dtype=np.int64)
        g.sort_indices()
        diag = g.diagonal().astype(np.int64)
        self.edeg_out = np.asarray(g.sum(axis=1)).ravel().astype(np.int64)
        self.edeg_in = np.asarray(g.sum(axis=0)).ravel().astype(np.int64)
        if self.name == "sbm":
            diag = np.zeros_like(diag)
        self.selfw = diag
        off = g.tocoo()
        keep = off.row != off.col
        off = sp.csr_matrix((off.data[keep], (off.row[keep], off.col[keep])), shape=g.shape, dtype=np.int64)
        off.sort_indices()
        t = off.T.tocsr()
        t.sort_indices()
        self.optr, self.oidx, self.ow = off.indptr.astype(np.int64), off.indices.astype(np.int64), off.data.astype(np.int64)
        self.iptr, self.iidx, self.iw = t.indptr.astype(np.int64), t.indices.astype(np.int64), t.data.astype(np.int64)
        if self.name == "sbm":
            self.edeg_out = np.diff(self.optr)
            self.edeg_in = np.diff(self.iptr)
        maxn = int(self.side_n.max())
        maxp = maxn * maxn + 2
        par = np.zeros(8)
        par[4] = 1.0 if self.name == "dcsbm" else 0.0
        par[5] = 1.0 if self.bipartite else 0.0
        par[6] = 1.0 if self.name in ("dcsbm", "dclbm") else 0.0
        par[7] = self.alpha
        if self.name in ("sbm", "lbm-bern"):
            e0, z0 = self.hyper["eta0"], self.hyper["zeta0"]
            par[0:4] = 0.0, e0, z0, gammaln(e0 + z0) - gammaln(e0) - gammaln(z0)
            self.t0 = _table(lambda k: gammaln(e0 + k), min(ds.total + 2, maxp))
            self.t1 = _table(lambda k: gammaln(z0 + k), maxp)
            self.t2 = _table(lambda k: gammaln(e0 + z0 + k), maxp)
        else:
            beta = self.hyper["beta"]
            par[0:3] = 1.0, beta, math.log(beta)
            self.t0 = _table(lambda k: gammaln(k + 1.0), ds.total + 2)
            self.t1 = _table(lambda k: np.log(beta * k + 1.0), maxp)
            self.t2 = np.zeros(1)
        self.par = par
        top = self.n_elements + int(max(self.edeg_out.sum(), self.edeg_in.sum())) + 2
        with np.errstate(divide="ignore"):
            self.lg = _table(lambda k: np.where(k > 0, gammaln(np.maximum(k, 1.0)), 0.0), top)
            self.lk = _table(lambda k: np.where(k > 0, np.log(np.maximum(k, 1.0)), 0.0), top)

    # tables for the intercept/agglomeration path of the mom engine
    @property
    def lg_lk(self):
        if not hasattr(self, "_lglk"):
            top = self.n_elements + 2
            lg = _table(lambda k: np.where(k > 0, gammaln(np.maximum(k, 1.0)), 0.0), top)
            lk = _table(lambda k: np.where(k > 0, np.log(np.maximum(k, 1.0)), 0.0), top)
            self._lglk = (lg, lk)
        return self._lglk

    def data_constant(self) -> float:
        """log B(X): the partition-free factor of the marginal likelihood."""
        ds = self.dataset
        x = ds.ordered
        lfx = float(np.sum(gammaln(x.data + 1.0)))
        if self.name == "mom":
            return float(np.sum(gammaln(ds.row_totals + 1.0))) - lfx
        if self.name in ("dcsbm", "dclbm"):
            return float(np.sum(gammaln(ds.row_totals + 1.0)) + np.sum(gammaln(ds.col_totals + 1.0))) - lfx
        return 0.0

    def state(self, partition: Partition) -> "ModelState":
        return ModelState(self, partition)

    def check_partition(self, p: Partition) -> None:
        if p.n != self.n_elements:
            raise ValueError("partition size does not match the dataset")
        if self.bipartite and p.n_rows != self.dataset.n:
            raise ValueError("co-clustering models need a bipartition")


class ModelState:
    """Sufficient statistics of a partition under a bound :class:`Model`.

    Cluster slots may become empty after swaps or merges; empty slots are
    ignored by every computation and dropped by :meth:`partition`.
    """

    def __init__(self, model: Model, partition: Optional[Partition] = None, *, _copy=None):
        self.model = model
        if _copy is not None:
            for k, v in _copy.__dict__.items():
                if k != "model":
                    setattr(self, k, v.copy() if isinstance(v, np.ndarray) else v)
            return
        model.check_partition(partition)
        z = np.array(partition.labels, dtype=np.int64)
        K = int(partition.K)
        self.z = z
        self.size = np.bincount(z, minlength=K).astype(np.int64)
        self.side = partition.cluster_side() if model.bipartite else np.zeros(K, dtype=np.int8)
        self.ksz = np.array([np.sum((self.size > 0) & (self.side == s)) for s in (0, 1)], dtype=np.int64)
        if model.engine == "mom":
            self._build_mom(K)
        else:
            self._build_block(K)

    def _build_mom(self, K):
        m = self.model
        x = m.dataset.ordered
        d = m.dataset.d
        rows = np.repeat(np.arange(x.shape[0]), np.diff(x.indptr))
        key = self.z[rows] * d + x.indices
        self.o = np.bincount(key, weights=x.data, minlength=K * d).reshape(K, d).astype(np.int64)
        self.c = self.o.sum(axis=1)

    def _build_block(self, K):
        m = self.model
        z = self.z
        rows = np.repeat(np.arange(m.optr.size - 1), np.diff(m.optr))
        key = np.concatenate([z[rows] * K + z[m.oidx], z * K + z])
        w = np.concatenate([m.ow, m.selfw])
        self.nu = np.bincount(key, weights=w, minlength=K * K).reshape(K, K).astype(np.int64)
        self.dout = np.bincount(z, weights=m.edeg_out, minlength=K).astype(np.int64)
        self.din = np.bincount(z, weights=m.edeg_in, minlength=K).astype(np.int64)
        self.Fold = np.zeros((K, K))
        kn.fill_fold(self.nu, self.size, self.side, m.par, m.t0, m.t1, m.t2, self.Fold)

    # ------------------------------------------------------------ queries

    @property
    def capacity(self) -> int:
        return self.size.size

    @property
    def K(self) -> int:
        return int(np.count_nonzero(self.size))

    def copy(self) -> "ModelState":
        return ModelState(self.model, _copy=self)

    def partition(self) -> Partition:
        n_rows = self.model.dataset.n if self.model.bipartite else None
        return Partition(canonical_labels(self.z), n_rows=n_rows)

    def log_p_x(self, include_constant: bool = False) -> float:
        return _LOG_P_X[self.model.name](self, include_constant=include_constant)

    def log_p_z(self) -> float:
        a = self.model.alpha
        if self.model.bipartite:
            return (log_p_z_sizes(self.size[self.side == 0], a)
                    + log_p_z_sizes(self.size[self.side == 1], a))
        return log_p_z_sizes(self.size, a)

    def icl(self, include_constant: bool = False) -> IclValue:
        return IclValue(self.log_p_x(include_constant), self.log_p_z(), include_constant)

    # ------------------------------------------------------------ moves

    def _side_of_slot(self, k):
        return int(self.side[k])

    def delta_swap(self, i: int, h: int, allow_empty: bool = False) -> float:
        """ICL change of moving element ``i`` into cluster ``h``.

        Returns ``-inf`` for infeasible moves: a move that would empty the
        source cluster (unless ``allow_empty``), a move to an empty slot, or
        a move across the row/column divide of a bipartition.
        """
        g = int(self.z[i])
        if h == g:
            raise ValueError("source and target cluster coincide")
        if self.size[h] == 0 or self.side[h] != self.side[g]:
            return -math.inf
        if self.size[g] == 1 and not allow_empty:
            return -math.inf
        m = self.model
        if m.engine == "mom":
            return float(kn.mom_swap_delta(i, h, self.z, m.ptr, m.idx, m.w, m.crow, self.size, self.o,
                                           self.c, self.ksz, m.side_n[0], m.par, m.tb, m.td, m.la))
        return float(kn.block_swap_delta(i, h, self.z, m.optr, m.oidx, m.ow, m.iptr, m.iidx, m.iw,
                                         m.selfw, m.edeg_out, m.edeg_in, self.size, self.dout, self.din,
                                         self.side, self.ksz, m.side_n, self.nu, self.Fold, m.par,
                                         m.t0, m.t1, m.t2, m.lg, m.lk, m.la))

    def apply_swap(self, i: int, h: int) -> None:
        g = int(self.z[i])
        if h == g or self.size[h] == 0 or self.side[h] != self.side[g]:
            raise ValueError("invalid swap target")
        m = self.model
        if m.engine == "mom":
            kn.mom_apply_swap(i, h, self.z, m.ptr, m.idx, m.w, m.crow, self.size, self.o, self.c, self.ksz)
        else:
            kn.block_apply_swap(i, h, self.z, m.optr, m.oidx, m.ow, m.iptr, m.iidx, m.iw, m.selfw,
                                m.edeg_out, m.edeg_in, self.size, self.dout, self.din, self.side,
                                self.ksz, self.nu, self.Fold, m.par, m.t0, m.t1, m.t2)

    def merge_data_delta(self, g: int, h: int) -> float:
        """Change of log p(X | Z) alone when merging ``g`` and ``h``."""
        m = self.model
        if m.engine == "mom":
            return float(kn._mom_merge_model(g, h, self.o, self.c, m.par, m.tb, m.td))
        return float(kn._merge_model_delta(g, h, self.size, self.dout, self.din, self.side, self.nu,
                                           self.Fold, m.par, m.t0, m.t1, m.t2, m.lg, m.lk))

    def delta_merge(self, g: int, h: int) -> float:
        if g == h:
            raise ValueError("cannot merge a cluster with itself")
        if self.size[g] == 0 or self.size[h] == 0:
            raise ValueError("empty cluster slot")
        if self.side[g] != self.side[h]:
            return -math.inf
        m = self.model
        if m.engine == "mom":
            return float(kn.mom_merge_delta(g, h, self.size, self.o, self.c, self.ksz, m.side_n[0],
                                            m.par, m.tb, m.td, m.la))
        return float(kn.block_merge_delta(g, h, self.size, self.dout, self.din, self.side, self.ksz,
                                          m.side_n, self.nu, self.Fold, m.par, m.t0, m.t1, m.t2,
                                          m.lg, m.lk, m.la))

    def apply_merge(self, g: int, h: int) -> None:
        """Merge cluster ``h`` into ``g``; slot ``h`` becomes empty."""
        if g == h or self.size[g] == 0 or self.size[h] == 0 or self.side[g] != self.side[h]:
            raise ValueError("invalid merge")
        self.z[self.z == h] = g
        m = self.model
        if m.engine == "mom":
            kn.mom_apply_merge(g, h, self.size, self.o, self.c, self.ksz)
        else:
            kn.block_apply_merge(g, h, self.size, self.dout, self.din, self.side, self.ksz, self.nu,
                                 self.Fold, m.par, m.t0, m.t1, m.t2)

    def stats(self) -> dict:
        """Integer statistics restricted to non-empty slots, for comparisons."""
        live = np.flatnonzero(self.size > 0)
        out = {"size": self.size[live]}
        if self.model.engine == "mom":
            out.update(o=self.o[live], c=self.c[live])
        else:
            out.update(nu=self.nu[np.ix_(live, live)], dout=self.dout[live], din=self.din[live])
        return out


def icl(partition: Partition, dataset: Dataset, config: RunConfig,
        include_constant: bool = False) -> IclValue:
    return Model(dataset, config).state(partition).icl(include_constant)
