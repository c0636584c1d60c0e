"""Regularisation path over alpha: log-linear ICL approximation, greedy
agglomeration by tipping point, Pareto pruning, dendrogram and leaf order.

Viewed as a function of ``x = log(alpha)``, the approximate criterion of a
partition is the line ``(K - 1) * x + I(Z)``, where the intercept ``I(Z)``
gathers every alpha-free term.  Merging clusters ``g`` and ``h`` lowers the
slope by one; the merged line overtakes the original one below
``x = I(Z_{g+h}) - I(Z)``, the tipping point of the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .data import Partition, canonical_labels
from .icl import DomainError, ModelState, log_p_z_sizes
from .local_search import run_merge_loop

GAP_TIE_RTOL = 1e-9


def _side_sizes(state: ModelState):
    live = state.size > 0
    if state.model.bipartite:
        return [state.size[live & (state.side == s)] for s in (0, 1)]
    return [state.size[live]]


def _prior_intercept(sides) -> float:
    tot = 0.0
    for sizes in sides:
        sizes = np.asarray(sizes, dtype=np.float64)
        sizes = sizes[sizes > 0]
        if sizes.size:
            tot += -math.log(sizes.size) + float(np.sum(gammaln(sizes))) - float(gammaln(sizes.sum()))
    return tot


def _slope(sides) -> int:
    return int(sum(max(np.count_nonzero(np.asarray(s)) - 1, 0) for s in sides))


def intercept(state: ModelState) -> float:
    """Alpha-free part ``I(Z)`` of the log-linear criterion (summed over sides for bipartitions)."""
    return state.log_p_x() + _prior_intercept(_side_sizes(state))


def icl_lin(state: ModelState, alpha: float) -> float:
    """``(K - 1) log(alpha) + I(Z)``; bipartitions use ``K_r + K_c - 2`` as slope."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    return _slope(_side_sizes(state)) * math.log(alpha) + intercept(state)


def tipping_alpha(state: ModelState, g: int, h: int) -> float:
    """``log(alpha_{g,h}) = I(Z_{g+h}) - I(Z)``; ``-inf`` for cross-side pairs."""
    if g == h:
        raise ValueError("cannot merge a cluster with itself")
    if state.size[g] == 0 or state.size[h] == 0:
        raise ValueError("empty cluster slot")
    if state.side[g] != state.side[h]:
        return -math.inf
    s = state.side[g]
    K = int(np.count_nonzero((state.size > 0) & (state.side == s)))
    ng, nh = int(state.size[g]), int(state.size[h])
    prior = (float(gammaln(ng + nh) - gammaln(ng) - gammaln(nh)) + math.log(K) - math.log(K - 1))
    return state.merge_data_delta(g, h) + prior


def tipping_matrix(state: ModelState) -> np.ndarray:
    """Tipping points of all pairs; NaN where a merge is impossible."""
    cap = state.capacity
    out = np.full((cap, cap), np.nan)
    live = np.flatnonzero(state.size > 0)
    for i, g in enumerate(live):
        for h in live[i + 1:]:
            if state.side[g] == state.side[h]:
                out[g, h] = out[h, g] = tipping_alpha(state, int(g), int(h))
    return out


def best_fusion(state: ModelState):
    """Pair with the largest tipping point; ties go to the smallest ``(g, h)``."""
    t = tipping_matrix(state)
    t = np.where(np.isnan(t), -np.inf, np.triu(t, 1) + np.tril(np.full_like(t, -np.inf)))
    if not np.isfinite(t).any():
        raise ValueError("no fusion available")
    g, h = np.unravel_index(int(np.argmax(t)), t.shape)
    return int(g), int(h), float(t[g, h])


# ---------------------------------------------------------------- path


@dataclass
class HierarchyPath:
    """Greedy merge sequence from ``initial`` down to one cluster per side.

    Partition ``j`` is the initial one after the first ``j`` merges.  Leaves
    are the initial clusters ``0..K-1``; internal node ``K + t`` is created
    by merge ``t``.
    """

    initial: Partition
    leaf_side: np.ndarray
    merges: np.ndarray  # (K-1, 2) kept, absorbed cluster labels
    log_alpha: np.ndarray  # tipping point of every merge
    intercepts: np.ndarray  # I of partitions 0..K-1
    data_terms: np.ndarray  # log p(X | Z) of partitions 0..K-1
    slopes: np.ndarray
    children: np.ndarray  # (K-1, 2) node ids
    front: Optional[np.ndarray] = None  # surviving partition indices
    front_log_alpha: Optional[np.ndarray] = None  # log alpha_f where each front starts to dominate
    leaf_order: Optional[np.ndarray] = None
    leaf_order_cost: float = field(default=float("nan"))

    @property
    def K(self) -> int:
        return int(self.leaf_side.size)

    @property
    def n_steps(self) -> int:
        return int(self.merges.shape[0])

    def labels_at(self, j: int) -> np.ndarray:
        """Element labels (in initial-cluster ids) after ``j`` merges."""
        remap = np.arange(self.K)
        for g, h in self.merges[:j]:
            remap[remap == h] = g
        return remap[self.initial.labels]

    def partition_at(self, j: int) -> Partition:
        return Partition(canonical_labels(self.labels_at(j)), n_rows=self.initial.n_rows)

    def partition_with(self, k: int) -> Partition:
        """Partition of the path with ``k`` clusters in total."""
        if not 1 <= k <= self.K or k < self.K - self.n_steps:
            raise ValueError("no partition with that many clusters on the path")
        return self.partition_at(self.K - k)

    def sizes_at(self, j: int):
        lab = self.labels_at(j)
        sizes = np.bincount(lab, minlength=self.K)
        if self.initial.is_bipartition:
            return [sizes[self.leaf_side == s] for s in (0, 1)]
        return [sizes]

    def icl_lin_at(self, j: int, alpha: float) -> float:
        return self.slopes[j] * math.log(alpha) + self.intercepts[j]

    def icl_exact_at(self, j: int, alpha: float) -> float:
        return self.data_terms[j] + sum(log_p_z_sizes(s, alpha) for s in self.sizes_at(j))

    def heights(self) -> np.ndarray:
        """Dendrogram height of every merge: ``max(-log alpha_f, 0)`` of its front."""
        if self.front is None:
            raise ValueError("prune the path first")
        out = np.zeros(self.n_steps)
        pos = 0
        for t in range(self.n_steps):
            j = t + 1
            while self.front[pos] < j:
                pos += 1
            out[t] = max(-self.front_log_alpha[pos], 0.0) + 0.0
        return out

    def roots(self) -> list:
        """Root node of each tree (one per side)."""
        parent = np.full(self.K + self.n_steps, -1)
        for t, (a, b) in enumerate(self.children):
            parent[a] = parent[b] = self.K + t
        return [int(v) for v in np.flatnonzero(parent < 0)]


def agglomerate(state: ModelState) -> HierarchyPath:
    """Merge the best-tipping pair repeatedly until one cluster per side remains.

    ``state`` is left untouched; clusters of its partition become the leaves.
    """
    start = state.partition()
    st = state.model.state(start)
    K = start.K
    leaf_side = st.side.copy()
    I0 = intercept(st)
    D0 = st.log_p_x()
    sides0 = _side_sizes(st)
    pairs, vals = run_merge_loop(st, 1)
    m = pairs.shape[0]
    intercepts = np.concatenate([[I0], I0 + np.cumsum(vals[:, 0])])
    data_terms = np.concatenate([[D0], D0 + np.cumsum(vals[:, 1])])
    slope0 = _slope(sides0)
    slopes = slope0 - np.arange(m + 1)
    node = np.arange(K)
    children = np.zeros((m, 2), dtype=np.int64)
    for t, (g, h) in enumerate(pairs):
        children[t] = node[g], node[h]
        node[g] = K + t
    return HierarchyPath(start, leaf_side, pairs.astype(np.int64), vals[:, 0].copy(), intercepts,
                         data_terms, slopes, children)


def _cross(s_a, i_a, s_b, i_b) -> float:
    return (i_b - i_a) / (s_a - s_b)


def prune_lines(slopes, intercepts):
    """Upper envelope over ``log(alpha) <= 0`` of lines with decreasing slopes.

    Returns the surviving indices and the ``log(alpha)`` at which each one
    starts to dominate (``0`` for the first).  Lines whose dominance interval
    is empty are dropped until the start points strictly decrease.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    intercepts = np.asarray(intercepts, dtype=np.float64)
    stack = []
    starts = []
    for j in range(slopes.size):
        x = 0.0
        while stack:
            t = stack[-1]
            x = _cross(slopes[t], intercepts[t], slopes[j], intercepts[j])
            if x >= starts[-1]:
                stack.pop()
                starts.pop()
                x = 0.0
            else:
                break
        stack.append(j)
        starts.append(x)
    return np.array(stack, dtype=np.int64), np.array(starts)


def prune_pareto(path: HierarchyPath) -> HierarchyPath:
    path.front, path.front_log_alpha = prune_lines(path.slopes, path.intercepts)
    return path


# ---------------------------------------------------------------- leaf order


def _tree_leaves(children: np.ndarray, K: int) -> list:
    leaves = [[v] for v in range(K)]
    for a, b in children:
        leaves.append(leaves[a] + leaves[b])
    return leaves


def optimal_leaf_order(children, K: int, dist, root: Optional[int] = None):
    """Tree-consistent leaf order minimising the sum of adjacent dissimilarities.

    ``children[t]`` are the two node ids joined by internal node ``K + t``.
    Dynamic programming over (subtree, leftmost leaf, rightmost leaf) in
    O(K^3); returns ``(order, cost)``.  Ties keep the lowest-index choice.
    """
    children = np.asarray(children, dtype=np.int64).reshape(-1, 2)
    dist = np.asarray(dist, dtype=np.float64)
    leaves = _tree_leaves(children, K)
    if root is None:
        root = K + children.shape[0] - 1 if children.shape[0] else 0
    if root < K:
        return np.array([root]), 0.0
    # M[i, j]: best cost of the subtree joining leaves i and j, with i and j at its ends
    M = np.full((K, K), np.inf)
    np.fill_diagonal(M, 0.0)
    join = np.full((K, K), -1, dtype=np.int64)
    np.fill_diagonal(join, np.arange(K))
    inner_i = np.zeros((K, K), dtype=np.int64)
    inner_j = np.zeros((K, K), dtype=np.int64)

    def ends(v, L):
        # only pairs whose subtree is v itself describe an ordering of v
        return np.where(join[np.ix_(L, L)] == v, M[np.ix_(L, L)], np.inf)

    for t, (a, b) in enumerate(children):
        if K + t > root:
            break
        La, Lb = np.array(leaves[a]), np.array(leaves[b])
        A = ends(a, La)
        B = ends(b, Lb)
        Dab = dist[np.ix_(La, Lb)]
        # T[i, l] = min_k A[i, k] + D[k, l]
        T3 = A[:, :, None] + Dab[None, :, :]
        kbest = np.argmin(T3, axis=1)
        T = np.take_along_axis(T3, kbest[:, None, :], axis=1)[:, 0, :]
        # R[i, j] = min_l T[i, l] + B[l, j]
        R3 = T[:, :, None] + B[None, :, :]
        lbest = np.argmin(R3, axis=1)
        R = np.take_along_axis(R3, lbest[:, None, :], axis=1)[:, 0, :]
        kk = np.take_along_axis(kbest, lbest, axis=1)
        M[np.ix_(La, Lb)] = R
        M[np.ix_(Lb, La)] = R.T
        join[np.ix_(La, Lb)] = K + t
        join[np.ix_(Lb, La)] = K + t
        inner_i[np.ix_(La, Lb)] = La[kk]
        inner_j[np.ix_(La, Lb)] = Lb[lbest]
        inner_i[np.ix_(Lb, La)] = Lb[lbest].T
        inner_j[np.ix_(Lb, La)] = La[kk].T
    member = {v: set(ls) for v, ls in enumerate(leaves)}

    def build(v, i, j):
        if v < K:
            return [v]
        a, b = children[v - K]
        if i not in member[a]:
            a, b = b, a
        return build(a, i, inner_i[i, j]) + build(b, inner_j[i, j], j)

    L = np.array(leaves[root])
    sub = ends(root, L)
    i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)
    return np.array(build(root, int(L[i]), int(L[j]))), float(sub[i, j])


def order_cost(order, dist) -> float:
    order = np.asarray(order)
    return float(np.sum(np.asarray(dist)[order[:-1], order[1:]]))


def order_leaves(path: HierarchyPath, state: ModelState) -> np.ndarray:
    """Optimal leaf order with dissimilarity ``I(Z) - I(Z_{g+h})`` at the initial partition.

    ``state`` must hold the path's initial partition with canonical labels.
    For bipartitions the row tree is ordered first, then the column tree.
    """
    st = state.model.state(path.initial)
    dist = -tipping_matrix(st)
    dist = np.where(np.isnan(dist), 0.0, dist)
    orders, cost = [], 0.0
    for r in sorted(path.roots(), key=lambda v: path.leaf_side[_tree_leaves(path.children, path.K)[v][0]]):
        o, c = optimal_leaf_order(path.children, path.K, dist, root=r)
        orders.append(o)
        cost += c
    path.leaf_order = np.concatenate(orders) if orders else np.arange(path.K)
    path.leaf_order_cost = cost
    return path.leaf_order


# ---------------------------------------------------------------- cut


@dataclass(frozen=True)
class CutSuggestion:
    n_clusters: int
    front_index: int
    low_confidence: bool
    rule: str = "max-gap"


def cut_heuristic(path: HierarchyPath) -> CutSuggestion:
    """Suggest a level: stop before the largest jump between consecutive fusion heights.

    Heights are ``-log(alpha_f)`` of the fronts after the first one.  With
    fewer than two such heights the first front is returned.  Ties in the
    largest gap go to the earliest one and are flagged as low confidence.
    """
    if path.front is None:
        prune_pareto(path)
    front = path.front
    K_of = lambda f: int(path.K - front[f])
    h = -np.asarray(path.front_log_alpha[1:])
    if h.size < 2:
        return CutSuggestion(K_of(0), 0, True)
    gaps = np.diff(h)
    top = gaps.max()
    ties = np.flatnonzero(np.isclose(gaps, top, rtol=GAP_TIE_RTOL, atol=0.0))
    j = int(ties[0])
    return CutSuggestion(K_of(j + 1), j + 1, bool(ties.size > 1))


def build_hierarchy(state: ModelState) -> HierarchyPath:
    """agglomerate -> prune -> order leaves."""
    path = agglomerate(state)
    prune_pareto(path)
    if path.K >= 2:
        order_leaves(path, state)
    else:
        path.leaf_order = np.arange(path.K)
        path.leaf_order_cost = 0.0
    return path


# ---------------------------------------------------------------- export


def newick(path: HierarchyPath, names=None) -> list:
    """One Newick string per tree; branch lengths are height differences."""
    K = path.K
    names = names or [f"C{k}" for k in range(K)]
    hts = np.concatenate([np.zeros(K), path.heights()]) if path.n_steps else np.zeros(K)

    def rec(v, parent_h):
        bl = f":{parent_h - hts[v]:.12g}" if parent_h is not None else ""
        if v < K:
            return f"{names[v]}{bl}"
        a, b = path.children[v - K]
        return f"({rec(a, hts[v])},{rec(b, hts[v])}){bl}"

    return [rec(r, None) + ";" for r in path.roots()]


def dot(path: HierarchyPath, names=None) -> str:
    K = path.K
    names = names or [f"C{k}" for k in range(K)]
    hts = np.concatenate([np.zeros(K), path.heights()]) if path.n_steps else np.zeros(K)
    lines = ["digraph dendrogram {"]
    for v in range(K + path.n_steps):
        label = names[v] if v < K else f"m{v - K}"
        lines.append(f'  n{v} [label="{label}", height="{hts[v]:.12g}"];')
    for t, (a, b) in enumerate(path.children):
        lines.append(f"  n{K + t} -> n{a};")
        lines.append(f"  n{K + t} -> n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
