"""Command-line interface: ``fit``, ``hierarchy``, ``generate`` and ``eval``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import MODELS, RunConfig, validate_partition
from .genetic import hybrid_fit
from .hierarchy import build_hierarchy, cut_heuristic, dot, newick
from .icl import DomainError, Model, ModelMismatchError
from .io import (FORMATS, FitResult, FormatMismatchError, InputError, InputSpec, SchemaError, dump_json,
                 hierarchy_to_dict, load_dataset, load_json, read_labels, write_labels)
from .synth import NMI_VARIANT, HierSbmSpec, MomSpec, gen_hier_sbm, gen_mom, nmi

EXIT_INPUT = 2
EXIT_MISMATCH = 3
EXIT_DIMS = 4
DEFAULT_SEED = 1234


class CliError(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


def _fail(code, msg):
    raise CliError(code, msg)


# ---------------------------------------------------------------- fit


def _config_from_args(a) -> RunConfig:
    try:
        return RunConfig(model=a.model, alpha=a.alpha, beta=a.beta, eta0=a.eta0, zeta0=a.zeta0,
                         pop_size=a.pop_size, mutation_prob=a.mutation, max_generations=a.generations,
                         initial_K=a.init_k, seed=a.seed, threads=a.threads, early_stop=a.early_stop,
                         restrict_moves=not a.unrestricted_moves)
    except ValueError as e:
        _fail(EXIT_INPUT, f"invalid option: {e}")


def _load(spec: InputSpec):
    try:
        return load_dataset(spec)
    except InputError as e:
        _fail(EXIT_INPUT, f"malformed input: {e}")
    except FormatMismatchError as e:
        _fail(EXIT_MISMATCH, f"model/format mismatch: {e}")


def cmd_fit(a) -> int:
    cfg = _config_from_args(a)
    spec = InputSpec(a.input, a.format, a.model, a.nodes, a.cols, a.undirected, a.self_loops, a.sum_duplicates)
    ds = _load(spec)
    t0 = time.perf_counter()
    try:
        out = hybrid_fit(ds, cfg)
    except (ModelMismatchError, DomainError) as e:
        _fail(EXIT_MISMATCH, f"model/data mismatch: {e}")
    wall = time.perf_counter() - t0
    hyper = {"alpha": cfg.alpha, **cfg.hyper(ds)}
    conf = {k: v for k, v in dataclasses.asdict(cfg).items() if k not in ("threads", "model", "seed")}
    p = out.best
    res = FitResult(
        model=cfg.model, hyper=hyper, config=conf, input=spec.to_dict(),
        dims={"kind": ds.kind.value, "n": ds.n, "d": ds.d, "nnz": int(ds.vals.size), "total": ds.total},
        labels=p.labels.tolist(), n_rows=p.n_rows,
        icl={"total": out.icl.total, "log_p_x_given_z": out.icl.log_p_x_given_z,
             "log_p_z_given_alpha": out.icl.log_p_z_given_alpha,
             "includes_data_constant": out.icl.includes_data_constant},
        history=out.history, seed=cfg.seed, tool_version=__version__,
        timing={"wall_clock_seconds": wall})
    dump_json(res.to_dict(), a.out)
    print(f"icl={out.icl.total:.6f} K={p.K}")
    return 0


# ---------------------------------------------------------------- hierarchy


def cmd_hierarchy(a) -> int:
    try:
        fit = FitResult.from_dict(load_json(a.from_))
    except (InputError, SchemaError) as e:
        _fail(EXIT_INPUT, f"unreadable fit: {e}")
    try:
        spec = InputSpec.from_dict(fit.input)
    except TypeError as e:
        _fail(EXIT_INPUT, f"unreadable fit: {e}")
    if a.input:
        spec = dataclasses.replace(spec, path=a.input)
    ds = _load(spec)
    p = fit.partition()
    dims = fit.dims
    if (ds.n, ds.d) != (dims.get("n"), dims.get("d")) or not validate_partition(p, ds):
        _fail(EXIT_DIMS, "dataset dimensions do not match the fit")
    h = dict(fit.hyper)
    cfg = RunConfig(model=fit.model, alpha=h.pop("alpha", 1.0), **h)
    model = Model(ds, cfg)
    path = build_hierarchy(model.state(p))
    cut = cut_heuristic(path)
    dump_json(hierarchy_to_dict(path, fit, cut, __version__), a.out)
    if a.dot:
        Path(a.dot).write_text(dot(path), encoding="utf-8")
    if a.newick:
        Path(a.newick).write_text("\n".join(newick(path)) + "\n", encoding="utf-8")
    print(f"K={path.K} fronts={len(path.front)} suggested_cut={cut.n_clusters}")
    return 0


# ---------------------------------------------------------------- generate / eval


def _parse_spec(text: str, cls):
    """JSON file path, inline JSON object, or ``key=value,key=value``."""
    try:
        if text and Path(text).is_file():
            raw = json.loads(Path(text).read_text(encoding="utf-8"))
        elif text.strip().startswith("{"):
            raw = json.loads(text)
        else:
            raw = {}
            for item in filter(None, (s.strip() for s in text.split(","))):
                k, v = item.split("=", 1)
                raw[k.strip()] = v.strip()
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for k, v in raw.items():
            if k not in fields:
                raise ValueError(f"unknown spec field {k!r}")
            typ = type(fields[k].default)
            if typ is bool and isinstance(v, str):
                v = v.lower() in ("1", "true", "yes")
            kw[k] = typ(v)
        return cls(**kw)
    except (ValueError, TypeError, json.JSONDecodeError, OSError) as e:
        _fail(EXIT_INPUT, f"malformed spec: {e}")


def cmd_generate(a) -> int:
    rng = np.random.default_rng(a.seed)
    prefix = Path(a.out)
    if a.kind == "hier-sbm":
        spec = _parse_spec(a.spec, HierSbmSpec)
        ds, sub, sup = gen_hier_sbm(spec, rng)
        lines = [f"# nodes: {ds.n}", f"# {'directed' if spec.directed else 'undirected'} hier-sbm seed={a.seed}"]
        lines += [f"{r}\t{c}" for r, c in zip(ds.rows, ds.cols)]
        Path(f"{prefix}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_labels(f"{prefix}.labels", sub.labels)
        write_labels(f"{prefix}.super.labels", sup.labels)
    else:
        spec = _parse_spec(a.spec, MomSpec)
        ds, lab, _ = gen_mom(spec, rng)
        np.savetxt(f"{prefix}.csv", ds.dense(), fmt="%d", delimiter=",")
        write_labels(f"{prefix}.labels", lab.labels)
    return 0


def cmd_eval(a) -> int:
    try:
        la, lb = read_labels(a.a), read_labels(a.b)
        v = nmi(la, lb)
    except (OSError, ValueError, KeyError) as e:
        _fail(EXIT_INPUT, f"cannot compare labels: {e}")
    print(f"{v:.6f}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iclhier", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    f = sub.add_parser("fit", help="hybrid genetic search for the ICL-best partition")
    f.add_argument("--model", required=True, choices=MODELS)
    f.add_argument("--input", required=True)
    f.add_argument("--format", required=True, choices=FORMATS)
    f.add_argument("--alpha", type=float, default=1.0)
    f.add_argument("--beta", type=float, default=None)
    f.add_argument("--eta0", type=float, default=1.0)
    f.add_argument("--zeta0", type=float, default=1.0)
    f.add_argument("--pop-size", type=int, default=50)
    f.add_argument("--mutation", type=float, default=0.25)
    f.add_argument("--generations", type=int, default=10)
    f.add_argument("--init-k", type=int, default=20)
    f.add_argument("--seed", type=int, default=DEFAULT_SEED)
    f.add_argument("--threads", type=int, default=1)
    f.add_argument("--early-stop", action="store_true", help="stop after 3 generations without progress")
    f.add_argument("--unrestricted-moves", action="store_true",
                   help="allow offspring moves between clusters without a common parent")
    f.add_argument("--nodes", type=int, default=None, help="number of nodes (rows for bipartite data)")
    f.add_argument("--cols", type=int, default=None, help="number of columns of bipartite edge lists")
    f.add_argument("--undirected", action="store_true")
    f.add_argument("--self-loops", action="store_true")
    f.add_argument("--sum-duplicates", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    h = sub.add_parser("hierarchy", help="regularisation path, dendrogram and leaf order of a fit")
    h.add_argument("--from", dest="from_", required=True)
    h.add_argument("--input", default=None, help="override the dataset path recorded in the fit")
    h.add_argument("--out", required=True)
    h.add_argument("--dot", default=None)
    h.add_argument("--newick", default=None)
    h.set_defaults(func=cmd_hierarchy)

    g = sub.add_parser("generate", help="synthetic benchmark data")
    g.add_argument("kind", choices=("hier-sbm", "mom"))
    g.add_argument("--spec", default="", help="JSON file, JSON object, or key=value list")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help=f"compare partitions (NMI, {NMI_VARIANT} normalisation)")
    e.add_argument("metric", choices=("nmi",))
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
