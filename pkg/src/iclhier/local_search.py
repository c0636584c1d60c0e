"""Greedy hill climbing on the exact ICL: element swaps and cluster merges."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as kn
from .data import Partition
from .icl import ModelState

ACCEPT_EPS = 1e-10


@dataclass(frozen=True)
class MovePolicy:
    """How swap sweeps visit elements and when they stop.

    ``order`` is ``"random"`` (a fresh permutation per sweep) or ``"index"``.
    A move or merge is accepted only when it raises the ICL by more than
    ``eps``, so ties never cause cycling.  ``restrict_to_common_parent``
    tells the genetic search to confine moves to clusters sharing a parent.
    """

    restrict_to_common_parent: bool = True
    order: str = "random"
    max_sweeps: int = 1000
    eps: float = ACCEPT_EPS

    def __post_init__(self):
        if self.order not in ("random", "index"):
            raise ValueError("order must be 'random' or 'index'")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")


def _mask(state: ModelState, allowed):
    if allowed is None:
        return np.zeros((1, 1), dtype=np.bool_), False
    allowed = np.ascontiguousarray(allowed, dtype=np.bool_)
    if allowed.shape != (state.capacity, state.capacity):
        raise ValueError("allowed mask must be capacity x capacity")
    return allowed, True


def swap_sweep(state: ModelState, order: np.ndarray, allowed=None, eps: float = ACCEPT_EPS) -> int:
    """Visit elements in ``order``, moving each to its best cluster; returns #moves."""
    m = state.model
    mask, use = _mask(state, allowed)
    order = np.ascontiguousarray(order, dtype=np.int64)
    if m.engine == "mom":
        return int(kn.mom_sweep(order, state.z, m.ptr, m.idx, m.w, m.crow, state.size, state.o, state.c,
                                state.ksz, m.side_n[0], mask, use, eps, m.par, m.tb, m.td, m.la))
    return int(kn.block_sweep(order, state.z, m.optr, m.oidx, m.ow, m.iptr, m.iidx, m.iw, m.selfw,
                              m.edeg_out, m.edeg_in, state.size, state.dout, state.din, state.side,
                              state.ksz, m.side_n, state.nu, state.Fold, mask, use, eps, m.par,
                              m.t0, m.t1, m.t2, m.lg, m.lk, m.la))


def greedy_swap(state: ModelState, policy: MovePolicy = MovePolicy(),
                rng: Optional[np.random.Generator] = None, allowed=None) -> Partition:
    """Sweep single-element moves until a full sweep makes no move.

    The state is updated in place.  Moves may empty a cluster, which then
    disappears from the partition.  ``allowed[g, h]`` restricts moves from
    cluster slot ``g`` to slot ``h``.
    """
    n = state.model.n_elements
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(policy.max_sweeps):
        order = rng.permutation(n) if policy.order == "random" else np.arange(n)
        if swap_sweep(state, order, allowed, policy.eps) == 0:
            break
    return state.partition()


def greedy_merge(state: ModelState, allowed=None, eps: float = ACCEPT_EPS) -> list:
    """Repeatedly apply the best ICL-improving merge until none remains.

    Returns the list of ``(kept, absorbed, delta)`` merges in order.  The
    state (and ``allowed``, whose rows are OR-ed on merge) is updated in place.
    """
    pairs, vals = run_merge_loop(state, 0, allowed, eps)
    return [(int(g), int(h), float(v)) for (g, h), v in zip(pairs, vals[:, 0])]


def run_merge_loop(state: ModelState, mode: int, allowed=None, eps: float = ACCEPT_EPS):
    """Drive the compiled merge loop; mode 0 maximises ICL, mode 1 the intercept."""
    m = state.model
    mask, use = _mask(state, allowed)
    cap = state.capacity
    out_pairs = np.zeros((max(cap, 1), 2), dtype=np.int64)
    out_vals = np.zeros((max(cap, 1), 2))
    if m.engine == "mom":
        lg, lk = m.lg_lk
        nm = kn.mom_merge_loop(mode, state.size, state.o, state.c, state.ksz, m.side_n[0], mask, use, eps,
                               m.par, m.tb, m.td, lg, lk, m.la, out_pairs, out_vals)
    else:
        nm = kn.block_merge_loop(mode, state.size, state.dout, state.din, state.side, state.ksz, m.side_n,
                                 state.nu, state.Fold, mask, use, eps, m.par, m.t0, m.t1, m.t2,
                                 m.lg, m.lk, m.la, out_pairs, out_vals)
    pairs = out_pairs[:nm]
    # relabel elements to follow the merges
    remap = np.arange(cap)
    for g, h in pairs:
        remap[remap == h] = g
    state.z[:] = remap[state.z]
    return pairs, out_vals[:nm]


def common_parent_mask(p1_of_child, p2_of_child) -> np.ndarray:
    """Boolean mask of child-cluster pairs that share a parent cluster.

    ``p1_of_child[k]`` and ``p2_of_child[k]`` are the clusters of the two
    parents that contain child cluster ``k``.
    """
    a = np.asarray(p1_of_child)
    b = np.asarray(p2_of_child)
    mask = (a[:, None] == a[None, :]) | (b[:, None] == b[None, :])
    np.fill_diagonal(mask, False)
    return mask


def parents_of_clusters(child: Partition, parent: Partition) -> np.ndarray:
    """Cluster of ``parent`` containing each cluster of ``child``.

    Raises ``ValueError`` when ``child`` does not refine ``parent``.
    """
    if child.n != parent.n:
        raise ValueError("partitions cover different element sets")
    out = np.full(child.K, -1, dtype=np.int64)
    out[child.labels] = parent.labels
    if np.any(out[child.labels] != parent.labels):
        raise ValueError("child partition does not refine the parent")
    return out


def common_parent_pairs(child: Partition, p1: Partition, p2: Partition) -> set:
    """Pairs ``(k, l)``, ``k < l``, of child clusters lying in a common cluster of p1 or p2."""
    mask = common_parent_mask(parents_of_clusters(child, p1), parents_of_clusters(child, p2))
    k, l = np.nonzero(np.triu(mask))
    return {(int(a), int(b)) for a, b in zip(k, l)}
