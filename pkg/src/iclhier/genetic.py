"""Hybrid genetic search: cross-partition crossover, rank selection, split
mutation and elitism, with greedy merges and swaps refining every offspring."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import Dataset, Partition, RunConfig, canonical_labels
from .icl import IclValue, Model, ModelState
from .local_search import MovePolicy, common_parent_mask, greedy_merge, greedy_swap, parents_of_clusters


@dataclass
class Population:
    members: list  # of (Partition, IclValue)
    generation: int = 0

    @property
    def scores(self) -> np.ndarray:
        return np.array([v.total for _, v in self.members])

    @property
    def best(self) -> int:
        return int(np.argmax(self.scores))

    @property
    def best_member(self):
        return self.members[self.best]


@dataclass
class FitOutcome:
    best: Partition
    icl: IclValue
    history: list
    population: Population = field(repr=False)


def _stream(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *key])


# ---------------------------------------------------------------- operators


def cross_partition(p1: Partition, p2: Partition) -> Partition:
    """All non-empty intersections of a cluster of ``p1`` with one of ``p2``."""
    if p1.n != p2.n or p1.n_rows != p2.n_rows:
        raise ValueError("partitions cover different element sets")
    key = p1.labels * (int(p2.K) + 1) + p2.labels
    return Partition(canonical_labels(key), n_rows=p1.n_rows)


def _split_slots(z: np.ndarray, size: np.ndarray, rng: np.random.Generator):
    """Split one cluster of size >= 2 by fair coins; returns (labels, source) or None."""
    cand = np.flatnonzero(size >= 2)
    if cand.size == 0:
        return None
    src = int(cand[rng.integers(cand.size)])
    members = np.flatnonzero(z == src)
    while True:
        coin = rng.integers(0, 2, members.size).astype(bool)
        if coin.any() and not coin.all():
            break
    new = z.copy()
    new[members[coin]] = size.size
    return new, src


def mutate_split(p: Partition, rng: np.random.Generator) -> Partition:
    """Split a uniformly chosen cluster of size >= 2 in two; no-op if none exists.

    The new cluster gets index ``K``; other labels are unchanged.
    """
    out = _split_slots(p.labels, p.sizes, rng)
    if out is None:
        return p
    return Partition(out[0], K=p.K + 1, n_rows=p.n_rows)


def selection_probabilities(scores) -> np.ndarray:
    """Rank-proportional probabilities; the worst member has rank 1, ties by index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    rank = np.empty(scores.size)
    rank[order] = np.arange(1, scores.size + 1)
    return rank / rank.sum()


def rank_select_pairs(pop, count: int, rng: np.random.Generator) -> list:
    """Sample ``count`` parent pairs with distinct members within each pair.

    ``pop`` is a :class:`Population` or an array of ICL scores.
    """
    scores = pop.scores if isinstance(pop, Population) else np.asarray(pop)
    if scores.size < 2:
        raise ValueError("need at least two members")
    prob = selection_probabilities(scores)
    pairs = []
    for _ in range(count):
        a = int(rng.choice(scores.size, p=prob))
        rest = prob.copy()
        rest[a] = 0.0
        b = int(rng.choice(scores.size, p=rest / rest.sum()))
        pairs.append((a, b))
    return pairs


# ---------------------------------------------------------------- search steps


def random_partition(dataset: Dataset, K: int, rng: np.random.Generator) -> Partition:
    """Uniform assignment into ``K`` clusters (per side for bipartite data)."""
    if dataset.is_bipartite:
        r = rng.integers(0, min(K, dataset.n), dataset.n)
        c = rng.integers(0, min(K, dataset.d), dataset.d) + K
        return Partition(canonical_labels(np.concatenate([r, c])), n_rows=dataset.n)
    return Partition(canonical_labels(rng.integers(0, min(K, dataset.n), dataset.n)))


def _swap_refined(model: Model, start: Partition, policy: MovePolicy, rng) -> tuple:
    st = model.state(start)
    p = greedy_swap(st, policy, rng)
    return p, st.icl()


def make_offspring(model: Model, p1: Partition, p2: Partition, config: RunConfig,
                   rng: np.random.Generator, policy: MovePolicy = MovePolicy()) -> tuple:
    """cross -> greedy merge -> (maybe) split -> greedy swap; returns (partition, icl)."""
    child = cross_partition(p1, p2)
    mask = None
    if policy.restrict_to_common_parent:
        mask = common_parent_mask(parents_of_clusters(child, p1), parents_of_clusters(child, p2))
    st = model.state(child)
    greedy_merge(st, mask, policy.eps)
    if rng.random() < config.mutation_prob:
        out = _split_slots(st.z, st.size, rng)
        if out is not None:
            z, src = out
            cap = st.capacity
            st = model.state(Partition(z, K=cap + 1, n_rows=child.n_rows))
            if mask is not None:
                grown = np.zeros((cap + 1, cap + 1), dtype=bool)
                grown[:cap, :cap] = mask
                grown[cap, :cap] = mask[src]
                grown[:cap, cap] = mask[:, src]
                grown[src, cap] = grown[cap, src] = True
                mask = grown
    p = greedy_swap(st, policy, rng, mask)
    return p, st.icl()


def init_population(model: Model, config: RunConfig, policy: MovePolicy = MovePolicy(),
                    executor=None) -> Population:
    def one(v):
        rng = _stream(config.seed, 0, 0, v)
        return _swap_refined(model, random_partition(model.dataset, config.initial_K, rng), policy, rng)

    slots = range(config.pop_size)
    members = list(executor.map(one, slots)) if executor else [one(v) for v in slots]
    return Population(members, 0)


def hybrid_fit(dataset: Dataset, config: RunConfig, policy: Optional[MovePolicy] = None,
               callback: Optional[Callable[[Population], None]] = None) -> FitOutcome:
    """Run the hybrid genetic algorithm and return the best partition found.

    Each offspring slot draws from its own random stream keyed by
    ``(seed, generation, slot)``, so results do not depend on ``threads``.
    """
    if policy is None:
        policy = MovePolicy(restrict_to_common_parent=config.restrict_moves)
    model = Model(dataset, config)
    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        pop = init_population(model, config, policy, executor)
        history = [pop.best_member[1].total]
        if callback:
            callback(pop)
        stale = 0
        for gen in range(1, config.max_generations):
            pairs = rank_select_pairs(pop, config.pop_size - 1, _stream(config.seed, gen, 1))

            def one(s, gen=gen, pairs=pairs, members=pop.members):
                a, b = pairs[s]
                return make_offspring(model, members[a][0], members[b][0], config,
                                      _stream(config.seed, gen, 0, s), policy)

            slots = range(config.pop_size - 1)
            kids = list(executor.map(one, slots)) if executor else [one(s) for s in slots]
            pop = Population([pop.best_member] + kids, gen)
            best = pop.best_member[1].total
            stale = stale + 1 if best <= history[-1] else 0
            history.append(best)
            if callback:
                callback(pop)
            if config.early_stop and stale >= 3:
                break
    finally:
        if executor:
            executor.shutdown()
    p, v = pop.best_member
    return FitOutcome(p, v, history, pop)


def greedy_fit(dataset: Dataset, config: RunConfig, seed: Optional[int] = None,
               model: Optional[Model] = None, policy: MovePolicy = MovePolicy()) -> tuple:
    """Single random start at ``initial_K`` refined by greedy swaps then greedy merges."""
    model = model or Model(dataset, config)
    rng = _stream(config.seed if seed is None else seed, 2)
    st = model.state(random_partition(dataset, config.initial_K, rng))
    greedy_swap(st, policy, rng)
    greedy_merge(st, None, policy.eps)
    return st.partition(), st.icl()


def multistart_greedy(dataset: Dataset, config: RunConfig, starts: Optional[int] = None) -> tuple:
    """Best of ``starts`` (default ``pop_size``) independent greedy fits."""
    model = Model(dataset, config)
    starts = config.pop_size if starts is None else starts
    best = None
    for s in range(starts):
        p, v = greedy_fit(dataset, config, seed=_stream(config.seed, 3, s).integers(2**62), model=model)
        if best is None or v.total > best[1].total:
            best = (p, v)
    return best
