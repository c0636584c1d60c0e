import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset, random_partition_for
from iclhier.data import DataKind, Dataset, Partition, RunConfig, canonical_labels
from iclhier.icl import DomainError, Model, ModelMismatchError, icl, log_p_z, log_p_z_sizes
from oracles import log_px_dc, log_px_lbm_bernoulli, log_px_mom, log_px_sbm, polya_moment

MODELS = ["mom", "sbm", "dcsbm", "lbm-bern", "dclbm"]


# ---------------------------------------------------------------- log p(Z)


def test_log_p_z_examples():
    assert log_p_z(Partition([0, 0, 0, 0]), 0.3) == 0.0
    assert log_p_z(Partition([0, 1]), 1.0) == pytest.approx(math.log(1 / 6), abs=1e-12)
    assert log_p_z(Partition([0, 0, 1]), 1.0) == pytest.approx(math.log(1 / 12), abs=1e-12)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=7), st.floats(0.05, 5.0))
def test_log_p_z_matches_urn(lab, alpha):
    # probability of a fixed label sequence is the Dirichlet moment E[prod pi_k^n_k]
    p = Partition(canonical_labels(lab))
    assert log_p_z(p, alpha) == pytest.approx(polya_moment(p.sizes, alpha), abs=1e-10)


def test_log_p_z_domain():
    with pytest.raises(DomainError):
        log_p_z(Partition([0, 1]), 0.0)


def test_log_p_z_bipartition_is_product():
    p = Partition([0, 1, 1, 2, 3, 3, 3], n_rows=3)
    assert log_p_z(p, 0.7) == pytest.approx(log_p_z_sizes([1, 2], 0.7) + log_p_z_sizes([1, 3], 0.7))


# ---------------------------------------------------------------- closed forms


def test_mom_examples():
    z = Dataset.from_dense(np.zeros((3, 2), int), DataKind.COUNT_MATRIX)
    m = Model(z, RunConfig(model="mom"))
    assert m.state(Partition([0, 1, 0])).log_p_x() == 0.0
    one = Dataset.from_dense(np.array([[1, 0]]), DataKind.COUNT_MATRIX)
    assert Model(one, RunConfig(model="mom")).state(Partition([0])).log_p_x() == pytest.approx(math.log(0.5))


def test_sbm_examples():
    ds = Dataset.from_dense(np.array([[0, 1], [0, 0]]), DataKind.DIRECTED_GRAPH)
    assert Model(ds, RunConfig(model="sbm")).state(Partition([0, 0])).log_p_x() == pytest.approx(math.log(1 / 6))
    for n in (2, 5, 9):
        e = Dataset(DataKind.DIRECTED_GRAPH, n, n, [], [], [])
        v = icl(Partition(np.zeros(n, int)), e, RunConfig(model="sbm"))
        assert v.total == pytest.approx(-math.log(1 + n * (n - 1)))
        assert v.log_p_z_given_alpha == 0.0


def test_sbm_rejects_weights():
    ds = Dataset.from_dense(np.array([[0, 2], [0, 0]]), DataKind.DIRECTED_GRAPH)
    with pytest.raises(DomainError):
        Model(ds, RunConfig(model="sbm"))


def test_dcsbm_examples():
    z = Dataset(DataKind.DIRECTED_GRAPH, 1, 1, [], [], [], self_loops_allowed=True)
    assert Model(z, RunConfig(model="dcsbm", beta=2.0)).state(Partition([0])).log_p_x() == pytest.approx(-math.log(3))
    one = Dataset(DataKind.DIRECTED_GRAPH, 1, 1, [0], [0], [1], self_loops_allowed=True)
    assert Model(one, RunConfig(model="dcsbm", beta=1.0)).state(Partition([0])).log_p_x() == pytest.approx(math.log(0.25))


def test_dclbm_examples():
    z = Dataset.from_dense(np.zeros((1, 1), int), DataKind.BIPARTITE_MATRIX)
    assert Model(z, RunConfig(model="dclbm", beta=2.0)).state(Partition([0, 1], n_rows=1)).log_p_x() == pytest.approx(-math.log(3))
    one = Dataset.from_dense(np.ones((1, 1), int), DataKind.BIPARTITE_MATRIX)
    assert Model(one, RunConfig(model="dclbm", beta=1.0)).state(Partition([0, 1], n_rows=1)).log_p_x() == pytest.approx(math.log(0.25))
    z2 = Dataset.from_dense(np.zeros((2, 2), int), DataKind.BIPARTITE_MATRIX)
    p = Partition([0, 1, 2, 2], n_rows=2)
    expect = -math.log(1 * 2 + 1) * 2  # two row clusters of size 1, one column cluster of size 2
    assert Model(z2, RunConfig(model="dclbm", beta=1.0)).state(p).log_p_x() == pytest.approx(expect)


def test_lbm_bernoulli_examples():
    one = Dataset.from_dense(np.ones((1, 1), int), DataKind.BIPARTITE_MATRIX)
    assert Model(one, RunConfig(model="lbm-bern")).state(Partition([0, 1], n_rows=1)).log_p_x() == pytest.approx(math.log(0.5))
    z = Dataset.from_dense(np.zeros((1, 2), int), DataKind.BIPARTITE_MATRIX)
    assert Model(z, RunConfig(model="lbm-bern")).state(Partition([0, 1, 1], n_rows=1)).log_p_x() == pytest.approx(math.log(1 / 3))


def test_model_mismatch():
    ds = Dataset.from_dense(np.ones((2, 2), int), DataKind.COUNT_MATRIX)
    with pytest.raises(ModelMismatchError):
        Model(ds, RunConfig(model="sbm"))
    with pytest.raises(ModelMismatchError):
        icl(Partition([0, 0]), ds, RunConfig(model="dclbm"))


def _oracle(model, ds, p, h):
    x = ds.dense()
    if model == "mom":
        return log_px_mom(x, p.labels, h["beta"])
    if model == "sbm":
        return log_px_sbm(x, p.labels, h["eta0"], h["zeta0"])
    if model == "lbm-bern":
        return log_px_lbm_bernoulli(x, p.row_labels, p.col_labels, h["eta0"], h["zeta0"])
    if model == "dcsbm":
        return log_px_dc(x, p.labels, p.labels, h["beta"])[0]
    return log_px_dc(x, p.row_labels, p.col_labels, h["beta"])[0]


@pytest.mark.parametrize("model", MODELS)
def test_closed_form_matches_brute_force(model):
    rng = np.random.default_rng(7)
    for _ in range(15):
        ds = random_dataset(model, rng)
        p = random_partition_for(ds, rng)
        cfg = RunConfig(model=model, beta=None if model != "mom" else 0.6, eta0=1.5, zeta0=2.0)
        st_ = Model(ds, cfg).state(p)
        assert st_.log_p_x(include_constant=True) == pytest.approx(_oracle(model, ds, p, cfg.hyper(ds)), abs=1e-6)


@pytest.mark.parametrize("model", MODELS)
def test_constant_shifts_total_only(model):
    rng = np.random.default_rng(11)
    ds = random_dataset(model, rng, n=5, d=3)
    p = random_partition_for(ds, rng)
    cfg = RunConfig(model=model)
    a, b = icl(p, ds, cfg), icl(p, ds, cfg, include_constant=True)
    m = Model(ds, cfg)
    assert b.total - a.total == pytest.approx(m.data_constant())
    assert a.log_p_z_given_alpha == b.log_p_z_given_alpha
    assert b.includes_data_constant and not a.includes_data_constant


@pytest.mark.parametrize("model", MODELS)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_icl_invariant_under_relabeling(model, seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(model, rng, n=6, d=4)
    p = random_partition_for(ds, rng)
    perm = rng.permutation(p.K)
    q = Partition(perm[p.labels], n_rows=p.n_rows)
    cfg = RunConfig(model=model, alpha=0.8)
    assert icl(p, ds, cfg).total == pytest.approx(icl(q, ds, cfg).total, abs=1e-10)


# ---------------------------------------------------------------- deltas


def _state(model, seed, n=25, d=12):
    rng = np.random.default_rng(seed)
    ds = random_dataset(model, rng, n=n, d=d, density=0.3)
    p = random_partition_for(ds, rng, max_k=5)
    return Model(ds, RunConfig(model=model, alpha=0.7)).state(p), rng


@pytest.mark.parametrize("model", MODELS)
def test_swap_there_and_back(model):
    st_, rng = _state(model, 1)
    for _ in range(50):
        i = int(rng.integers(st_.model.n_elements))
        g = int(st_.z[i])
        cand = [h for h in np.flatnonzero(st_.size > 0) if h != g and st_.side[h] == st_.side[g]]
        if not cand or st_.size[g] == 1:
            continue
        h = int(rng.choice(cand))
        before = {k: v.copy() for k, v in st_.stats().items()}
        d1 = st_.delta_swap(i, h)
        st_.apply_swap(i, h)
        d2 = st_.delta_swap(i, g)
        st_.apply_swap(i, g)
        assert d1 + d2 == pytest.approx(0.0, abs=1e-10)
        after = st_.stats()
        for k in before:
            assert np.array_equal(before[k], after[k])


@pytest.mark.parametrize("model", MODELS)
def test_stats_match_rebuild_after_moves(model):
    st_, rng = _state(model, 2)
    for _ in range(200):
        i = int(rng.integers(st_.model.n_elements))
        live = [h for h in np.flatnonzero(st_.size > 0) if h != st_.z[i] and st_.side[h] == st_.side[st_.z[i]]]
        if live:
            st_.apply_swap(i, int(rng.choice(live)))
    fresh = st_.model.state(st_.partition())
    # put the surviving slots in canonical (first appearance) order
    live = np.flatnonzero(st_.size > 0)
    first = np.array([np.flatnonzero(st_.z == k)[0] for k in live])
    order = np.argsort(np.argsort(first))
    perm = np.argsort(order)
    a, b = st_.stats(), fresh.stats()
    for k in a:
        v = a[k][perm][:, perm] if k == "nu" else a[k][perm]
        assert np.array_equal(v, b[k])


def test_would_empty_source_is_infeasible():
    ds = Dataset.from_dense(np.array([[1, 0], [0, 2], [3, 1]]), DataKind.COUNT_MATRIX)
    st_ = Model(ds, RunConfig(model="mom")).state(Partition([0, 1, 1]))
    assert st_.delta_swap(0, 1) == -math.inf
    assert math.isfinite(st_.delta_swap(0, 1, allow_empty=True))


def test_cross_side_moves_infeasible():
    ds = Dataset.from_dense(np.ones((2, 2), int), DataKind.BIPARTITE_MATRIX)
    st_ = Model(ds, RunConfig(model="dclbm")).state(Partition([0, 1, 2, 2], n_rows=2))
    assert st_.delta_merge(0, 2) == -math.inf
    assert st_.delta_swap(0, 2, allow_empty=True) == -math.inf


def test_degree_zero_node_move_only_changes_normalisation():
    x = np.zeros((6, 6), int)
    x[0, 1] = x[1, 2] = x[2, 0] = x[3, 4] = 2
    ds = Dataset.from_dense(x, DataKind.DIRECTED_GRAPH, self_loops_allowed=True)
    m = Model(ds, RunConfig(model="dcsbm", alpha=1.0))
    st_ = m.state(Partition([0, 0, 0, 1, 1, 1]))
    # node 5 has no edges; moving it changes only pair counts, degree terms and p(Z)
    d = st_.delta_swap(5, 0)
    before = st_.icl().total
    st_.apply_swap(5, 0)
    assert d == pytest.approx(st_.icl().total - before, abs=1e-10)
    assert st_.stats()["nu"].sum() == x.sum()


def test_merge_to_one_matches_endpoint():
    for model in MODELS:
        st_, _ = _state(model, 3, n=10, d=6)
        while st_.K > (2 if st_.model.bipartite else 1):
            live = np.flatnonzero(st_.size > 0)
            pairs = [(g, h) for g in live for h in live if g < h and st_.side[g] == st_.side[h]]
            g, h = pairs[0]
            d = st_.delta_merge(g, h)
            before = st_.icl().total
            st_.apply_merge(g, h)
            assert d == pytest.approx(st_.icl().total - before, abs=1e-8)


def test_mom_merge_symmetric():
    ds = Dataset.from_dense(np.array([[2, 1, 0], [2, 1, 0], [0, 0, 3]]), DataKind.COUNT_MATRIX)
    st_ = Model(ds, RunConfig(model="mom")).state(Partition([0, 1, 2]))
    assert st_.delta_merge(0, 1) == st_.delta_merge(1, 0)
