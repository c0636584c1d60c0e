"""Acceptance criteria, each run at its stated tolerance.

Every test appends one ``CRITERION N: PASS|FAIL ...`` line that the terminal
summary prints in order.  Expensive fits are computed once per session.
"""

import functools
import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_dataset, random_partition_for
from iclhier.cli import main
from iclhier.data import RunConfig
from iclhier.genetic import greedy_fit, hybrid_fit, multistart_greedy
from iclhier.hierarchy import build_hierarchy, intercept, optimal_leaf_order, order_cost
from iclhier.icl import Model
from iclhier.synth import HierSbmSpec, MomSpec, gen_hier_sbm, gen_mom, nmi
from oracles import log_px_dc, log_px_lbm_bernoulli, log_px_mom, log_px_sbm, tree_consistent_orders

ROOT = Path(__file__).resolve().parents[1]
MODELS = ["mom", "sbm", "dcsbm", "lbm-bern", "dclbm"]
SBM_SEEDS = range(20)
MOM_SEEDS = range(100, 125)


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


# ---------------------------------------------------------------- cached fits


@functools.lru_cache(maxsize=None)
def sbm_runs():
    """Hybrid (defaults) and single-start greedy fits on the scaled hierarchical SBM."""
    out = []
    for seed in SBM_SEEDS:
        ds, sub, sup = gen_hier_sbm(HierSbmSpec(n=750), np.random.default_rng(seed))
        cfg = RunConfig(model="sbm", seed=seed)
        fit = hybrid_fit(ds, cfg)
        gp, _ = greedy_fit(ds, cfg)
        model = Model(ds, cfg)
        path = build_hierarchy(model.state(fit.best))
        out.append(dict(seed=seed, ds=ds, sub=sub, sup=sup, model=model, fit=fit, path=path,
                        nmi=nmi(fit.best, sub), greedy_nmi=nmi(gp, sub)))
    return out


@functools.lru_cache(maxsize=None)
def mom_runs():
    out = []
    for seed in MOM_SEEDS:
        ds, lab, _ = gen_mom(MomSpec(), np.random.default_rng(seed))
        cfg = RunConfig(model="mom", seed=seed)
        fit = hybrid_fit(ds, cfg)
        _, ms = multistart_greedy(ds, cfg)
        model = Model(ds, cfg)
        path = build_hierarchy(model.state(fit.best))
        out.append(dict(seed=seed, fit=fit, multistart=ms.total, path=path, nmi=nmi(fit.best, lab)))
    return out


# ---------------------------------------------------------------- 1. oracle exactness


def _small(model, rng):
    return random_dataset(model, rng, n=int(rng.integers(1, 7)), d=int(rng.integers(1, 5)), max_count=3)


def test_criterion_1_oracle_exactness():
    rng = np.random.default_rng(2024)
    worst_quad, worst_mc, bad = 0.0, 0.0, []
    for model in MODELS:
        for _ in range(50):
            ds = _small(model, rng)
            p = random_partition_for(ds, rng)
            cfg = RunConfig(model=model, eta0=1.5, zeta0=2.0, beta=0.7 if model == "mom" else None)
            h = cfg.hyper(ds)
            got = Model(ds, cfg).state(p).log_p_x(include_constant=True)
            x = ds.dense()
            if model in ("dcsbm", "dclbm"):
                rl, cl = (p.labels, p.labels) if model == "dcsbm" else (p.row_labels, p.col_labels)
                exact, mc, sigma = log_px_dc(x, rl, cl, h["beta"], rng=rng, samples=10 ** 6)
                err = abs(got - exact)
                worst_quad = max(worst_quad, err)
                z = abs(got - mc) / max(sigma, 1e-300) if abs(got - mc) > 1e-6 else 0.0
                worst_mc = max(worst_mc, z)
                if err > 1e-6 or z > 3.0:
                    bad.append((model, err, z))
                continue
            if model == "mom":
                ref = log_px_mom(x, p.labels, h["beta"])
            elif model == "sbm":
                ref = log_px_sbm(x, p.labels, h["eta0"], h["zeta0"])
            else:
                ref = log_px_lbm_bernoulli(x, p.row_labels, p.col_labels, h["eta0"], h["zeta0"])
            err = abs(got - ref)
            worst_quad = max(worst_quad, err)
            if err > 1e-6:
                bad.append((model, err, None))
    record(1, not bad, f"(5 models x 50 instances; max |closed - quadrature/urn| = {worst_quad:.2e}, "
                       f"max Monte-Carlo deviation = {worst_mc:.2f} sigma; failures={bad[:3]})")


# ---------------------------------------------------------------- 2. delta consistency


def test_criterion_2_delta_consistency():
    rng = np.random.default_rng(7)
    worst = 0.0
    for model in MODELS:
        ds = random_dataset(model, rng, n=30, d=15, density=0.3, max_count=4)
        m = Model(ds, RunConfig(model=model, alpha=0.8))
        st = m.state(random_partition_for(ds, rng, max_k=6))
        swaps = 0
        while swaps < 1000:
            i = int(rng.integers(m.n_elements))
            g = st.z[i]
            cand = [h for h in np.flatnonzero(st.size > 0) if h != g and st.side[h] == st.side[g]]
            if not cand or st.size[g] == 1:
                continue
            h = int(rng.choice(cand))
            before = st.icl().total
            d = st.delta_swap(i, h)
            st.apply_swap(i, h)
            worst = max(worst, abs(d - (m.state(st.partition()).icl().total - before)))
            swaps += 1
        merges = 0
        while merges < 500:
            st = m.state(random_partition_for(ds, rng, max_k=6))
            live = np.flatnonzero(st.size > 0)
            pairs = [(a, b) for a, b in itertools.combinations(live, 2) if st.side[a] == st.side[b]]
            if not pairs:
                continue
            a, b = pairs[int(rng.integers(len(pairs)))]
            before = st.icl().total
            d = st.delta_merge(a, b)
            st.apply_merge(a, b)
            worst = max(worst, abs(d - (m.state(st.partition()).icl().total - before)))
            merges += 1
    record(2, worst <= 1e-8, f"(1000 swaps + 500 merges per model; max |delta - recompute| = {worst:.2e})")


# ---------------------------------------------------------------- 3. hierarchical SBM recovery


@pytest.mark.slow
def test_criterion_3_sbm_recovery():
    runs = sbm_runs()
    h = np.array([r["nmi"] for r in runs])
    g = np.array([r["greedy_nmi"] for r in runs])
    hits = int(np.sum(h >= 0.95))
    ok = hits >= 16 and np.median(h) > np.median(g)
    ks = [r["fit"].best.K for r in runs]
    record(3, ok, f"(n=750: NMI>=0.95 in {hits}/20 seeds, need 16; median hybrid NMI {np.median(h):.3f} vs "
                  f"greedy {np.median(g):.3f}; hybrid K range {min(ks)}-{max(ks)})")


# ---------------------------------------------------------------- 4. MoM recovery


@pytest.mark.slow
def test_criterion_4_mom_recovery():
    runs = mom_runs()
    k15 = sum(r["fit"].best.K == 15 for r in runs)
    hyb = np.median([r["fit"].icl.total for r in runs])
    ms = np.median([r["multistart"] for r in runs])
    ok = k15 >= math.ceil(0.6 * 25) and hyb >= ms
    record(4, ok, f"(K=15 in {k15}/25 runs, need 15; median ICL hybrid {hyb:.2f} vs multistart {ms:.2f})")


# ---------------------------------------------------------------- 5. ICLlin soundness


@pytest.mark.slow
def test_criterion_5_icllin_soundness():
    worst_plug, worst_rel, checked, small_first = 0.0, 0.0, 0, 0
    for r in sbm_runs():
        path, model = r["path"], r["model"]
        if path.n_steps:
            small_first += path.log_alpha[0] < math.log(1e-1)
        I = [intercept(model.state(path.partition_at(j))) for j in range(path.n_steps + 1)]
        for t, x in enumerate(path.log_alpha):
            if not x < math.log(1e-2):
                continue
            checked += 1
            mother = path.slopes[t] * x + I[t]
            child = path.slopes[t + 1] * x + I[t + 1]
            worst_plug = max(worst_plug, abs(mother - child))
            if x > -700:
                a = math.exp(x)
                for j in (t, t + 1):
                    ex = path.icl_exact_at(j, a)
                    lin = path.slopes[j] * x + I[j]
                    worst_rel = max(worst_rel, abs(ex - lin) / abs(ex))
    ok = worst_plug <= 1e-9 and worst_rel <= 1e-3 and small_first >= 18
    record(5, ok, f"({checked} tipping points below 1e-2: max plug-back gap {worst_plug:.2e}, max relative "
                  f"ICLex/ICLlin gap {worst_rel:.2e}; first tipping below 0.1 on {small_first}/20 seeds)")


# ---------------------------------------------------------------- 6. Pareto pruning


def _grid_dominance(path):
    fa = path.front_log_alpha
    if np.any(np.diff(fa) >= 0):
        return False
    span = max(10.0, abs(fa[-1]))
    ends = np.concatenate([fa[1:], [fa[-1] - span]])
    for f, j in enumerate(path.front):
        xs = np.linspace(ends[f], fa[f], 100)
        vals = path.slopes[:, None] * xs[None, :] + path.intercepts[:, None]
        tol = 1e-9 * np.maximum(1.0, np.abs(vals).max(axis=0))
        if np.any(vals[j] < vals.max(axis=0) - tol):
            return False
    return True


@pytest.mark.slow
def test_criterion_6_pareto_pruning():
    paths = [r["path"] for r in sbm_runs()] + [r["path"] for r in mom_runs()]
    good = sum(_grid_dominance(p) for p in paths)
    record(6, good == len(paths), f"({good}/{len(paths)} paths strictly decreasing with 100-point grid dominance)")


# ---------------------------------------------------------------- 7. leaf ordering


def test_criterion_7_leaf_order():
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(200):
        K = int(rng.integers(2, 9))
        nodes, children, nxt = list(range(K)), [], K
        while len(nodes) > 1:
            a, b = rng.choice(len(nodes), 2, replace=False)
            children.append((nodes[a], nodes[b]))
            nodes = [v for i, v in enumerate(nodes) if i not in (a, b)] + [nxt]
            nxt += 1
        d = rng.integers(0, 100, (K, K)).astype(float)
        d = d + d.T
        order, cost = optimal_leaf_order(children, K, d)
        brute = min(order_cost(o, d) for o in tree_consistent_orders(np.array(children), K, 2 * K - 2))
        agree += cost == brute and order_cost(order, d) == brute
    record(7, agree == 200, f"(DP cost equals exhaustive minimum on {agree}/200 random trees, K<=8)")


# ---------------------------------------------------------------- 8. super-structure from the dendrogram


@pytest.mark.slow
def test_criterion_8_super_structure():
    runs = sbm_runs()
    qual = [r for r in runs if r["nmi"] >= 0.95]
    succ = sum(nmi(r["path"].partition_with(3), r["sup"]) >= 0.95 for r in qual)
    cut3 = [nmi(r["path"].partition_with(3), r["sup"]) for r in runs if r["path"].K >= 3]
    need = math.ceil(14 / 16 * len(qual))
    ok = len(qual) > 0 and succ >= need
    record(8, ok, f"({len(qual)} qualifying seeds, {succ} with super-level NMI>=0.95, need {need}; "
                  f"diagnostic: median super NMI of the 3-cluster cut over all seeds "
                  f"{np.median(cut3) if cut3 else float('nan'):.3f})")


# ---------------------------------------------------------------- 9. real data recipe


def test_criterion_9_real_data_recipe():
    recipe = ROOT / "scripts" / "real_data_recipe.md"
    text = recipe.read_text(encoding="utf-8") if recipe.exists() else ""
    ok = all(k in text for k in ("Blogs", "Books", "Football"))
    record(9, ok, "(not asserted in CI by design; manual recipe scripts/real_data_recipe.md present)")


# ---------------------------------------------------------------- 10. determinism


def _json_wo_timing(p):
    d = json.loads(Path(p).read_text(encoding="utf-8"))
    d.pop("timing", None)
    return d


def test_criterion_10_determinism(tmp_path):
    pre = str(tmp_path / "d")
    assert main(["generate", "hier-sbm", "--spec", "n=120,super_K=2,sub_per_super=2", "--seed", "3",
                 "--out", pre]) == 0
    assert main(["generate", "mom", "--spec", "n=80,K=4,d=20", "--seed", "3", "--out", pre]) == 0
    same = True
    for model, inp, fmt in (("sbm", pre + ".tsv", "edges-tsv"), ("dcsbm", pre + ".tsv", "edges-tsv"),
                            ("mom", pre + ".csv", "csv-counts")):
        fits, hiers = [], []
        for threads in (1, 2, 4, 1):
            f = tmp_path / f"{model}-{threads}-{len(fits)}.json"
            h = tmp_path / f"h-{model}-{threads}-{len(fits)}.json"
            assert main(["fit", "--model", model, "--input", inp, "--format", fmt, "--seed", "11",
                         "--pop-size", "12", "--generations", "4", "--threads", str(threads),
                         "--out", str(f)]) == 0
            assert main(["hierarchy", "--from", str(f), "--out", str(h)]) == 0
            fits.append(_json_wo_timing(f))
            hiers.append(_json_wo_timing(h))
        same &= all(x == fits[0] for x in fits) and all(x == hiers[0] for x in hiers)
    record(10, same, "(fit and hierarchy JSON identical across --threads 1/2/4 and repeats, 3 models)")
