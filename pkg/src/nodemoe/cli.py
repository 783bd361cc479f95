"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or arguments, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import analysis, theory
from .bundle import BundleError, DatasetBundle, load_bundle, save_bundle
from .csbm import REGIME1, CsbmError, CsbmParams, generate
from .graph import GraphError, node_homophily
from .model import ExpertConfig, GateConfig, ModelConfig, NodeMoE, load_checkpoint, save_checkpoint
from .spectral import INIT_STRATEGIES, SmoothingGrid, export_filters
from .trainer import TrainConfig, TrainingDiverged, evaluate, history_to_csv, make_split, train

log = logging.getLogger("nodemoe")

PRESETS = {
    "regime1": dict(REGIME1),
    "homophilic": dict(REGIME1, P=1.0),
    "heterophilic": dict(REGIME1, P=0.0),
}
CSBM_KEYS = ("n", "d", "p0", "q0", "p1", "q1", "P", "dist")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _print_config(command, cfg):
    cfg = {k: v for k, v in cfg.items() if k not in ("func", "command")}
    print(json.dumps({"command": command, "config": cfg}, sort_keys=True, default=str))
    sys.stdout.flush()


def _add_csbm_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--p0", type=float)
    p.add_argument("--q0", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--q1", type=float)
    p.add_argument("--P", type=float)
    p.add_argument("--mu-nu-dist", dest="dist", type=float)
    p.add_argument("--pair-rule", choices=("pattern_blocks", "lower_index"), default="pattern_blocks")


def _csbm_values(args, default_preset="regime1") -> dict:
    vals = dict(PRESETS[args.preset or default_preset])
    if getattr(args, "params", None):
        for item in args.params.split(","):
            if "=" not in item:
                raise UsageError(f"--params expects key=value pairs, got {item!r}")
            k, v = item.split("=", 1)
            k = {"mu_nu_dist": "dist", "mu-nu-dist": "dist"}.get(k.strip(), k.strip())
            if k not in CSBM_KEYS:
                raise UsageError(f"--params: unknown key {k!r}; expected {CSBM_KEYS}")
            vals[k] = int(v) if k in ("n", "d") else float(v)
    for k in CSBM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            vals[k] = v
    vals["pair_rule"] = args.pair_rule
    return vals


# ----------------------------------------------------------------- commands


def cmd_generate(args):
    vals = _csbm_values(args)
    vals["seed"] = args.seed
    _print_config("generate", dict(vals, out=args.out))
    params = CsbmParams.with_distance(**vals)
    sample = generate(params)
    split = make_split(params.n, sample.labels, seed=args.seed) if args.with_split else None
    save_bundle(DatasetBundle.from_sample(sample, args.name, split), args.out)
    print(f"wrote {params.n} nodes, {sample.graph.num_edges} edges to {args.out}")
    return 0


def _expert_configs(args) -> list[ExpertConfig]:
    inits = [s.strip() for s in args.init.split(",")] if args.init else None
    if inits is None:
        inits = ["uniform"] if args.experts == 1 else (["decreasing", "increasing", "uniform"] * args.experts)[: args.experts]
    if len(inits) != args.experts:
        raise UsageError(f"--init lists {len(inits)} strategies for {args.experts} experts")
    for s in inits:
        if s not in INIT_STRATEGIES:
            raise UsageError(f"unknown init strategy {s!r}; choose from {INIT_STRATEGIES}")
    alphas = [float(a) for a in str(args.alpha).split(",")]
    if len(alphas) == 1:
        alphas = alphas * args.experts
    if len(alphas) != args.experts:
        raise UsageError("--alpha must be one value or one per expert")
    return [ExpertConfig(order=args.order, hidden=args.hidden, init=i, alpha=a, dropout=args.dropout)
            for i, a in zip(inits, alphas)]


def _check_mode(args):
    if args.mode == "soft" and args.k is not None:
        raise UsageError("--k only applies to --mode topk")
    if args.mode == "topk":
        if args.experts < 2:
            raise UsageError("--mode topk needs at least 2 experts")
        k = 1 if args.k is None else args.k
        if not 1 <= k <= args.experts:
            raise UsageError(f"--k must lie in [1, {args.experts}]")
        return k
    return 1


def _data_split(bundle, seed, fractions=(0.6, 0.2, 0.2)):
    if bundle.split is not None:
        return bundle.split
    return make_split(bundle.graph.num_nodes, bundle.labels, fractions, seed)


def cmd_train(args):
    k = _check_mode(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    bundle = load_bundle(args.data)
    experts = _expert_configs(args)
    gate = GateConfig(mode=args.mode, k=k, hidden=args.gate_hidden, epsilon=args.epsilon, dropout=args.dropout)
    tcfg = TrainConfig(epochs=args.epochs, patience=args.patience, lr_filter=args.lr_filter,
                       lr_network=args.lr_network, wd_filter=args.wd_filter, wd_network=args.wd_network,
                       gamma=args.gamma, beta=args.beta, seed=args.seed)
    tcfg.validate()
    mcfg = ModelConfig(bundle.features.shape[1], bundle.num_classes, experts, gate, seed=args.seed)
    mcfg.validate()
    _print_config("train", {"data": args.data, "model": mcfg.to_dict(), "train": tcfg.to_dict(),
                            "repeats": args.repeats, "out": args.out, "history": args.history})
    accs = []
    for r in range(args.repeats):
        seed = args.seed + r
        mcfg_r = ModelConfig(**dict(mcfg.to_dict(), seed=seed))
        tcfg_r = TrainConfig(**dict(tcfg.to_dict(), seed=seed, fractions=tuple(tcfg.fractions)))
        split = _data_split(bundle, seed)
        model = NodeMoE(mcfg_r)
        result = train(model, bundle, split, tcfg_r)
        test_acc, _ = evaluate(model, bundle, split.test)
        accs.append(test_acc)
        print(f"repeat {r} seed {seed}: best_epoch={result.best_epoch} val={result.best_val:.4f} test={test_acc:.4f}")
        suffix = "" if r == 0 else f".r{r}"
        extra = {"train": tcfg_r.to_dict(), "split": split.to_dict(), "data": os.path.abspath(args.data),
                 "best_epoch": result.best_epoch, "best_val": result.best_val, "test_acc": test_acc}
        if args.out:
            save_checkpoint(model, args.out + suffix, extra)
        if args.history:
            _write(args.history + suffix, history_to_csv(result.history))
    print(f"test accuracy over {len(accs)} repeat(s): mean={np.mean(accs):.4f} std={np.std(accs):.4f}")
    return 0


def _ckpt_split(bundle, extra, seed=0):
    if "split" in extra:
        s = extra["split"]
        from .trainer import Split

        return Split(s["train"], s["val"], s["test"])
    return _data_split(bundle, seed)


def cmd_evaluate(args):
    _print_config("evaluate", vars(args))
    bundle = load_bundle(args.data)
    model, extra = load_checkpoint(args.ckpt)
    split = _ckpt_split(bundle, extra)
    acc, flags = evaluate(model, bundle, split.part(args.split))
    print(f"{args.split} accuracy: {acc!r}")
    if args.out:
        idx = split.part(args.split)
        _write(args.out, analysis.table_to_csv([{"node": int(i), "correct": int(f)} for i, f in zip(idx, flags)]))
    return 0


def cmd_analyze(args):
    _print_config("analyze", vars(args))
    bundle = load_bundle(args.data)
    needs_ckpt = args.report in ("gates", "filters", "accuracy-buckets")
    if needs_ckpt and not args.ckpt:
        raise UsageError(f"--report {args.report} requires --ckpt")
    g, y = bundle.graph, bundle.labels
    svg = None
    if args.report == "homophily":
        rows = analysis.homophily_density(g, y, args.bins)
        text = analysis.table_to_csv(rows)
        mean_h = float(np.nanmean(node_homophily(g, y)))
        print(f"graph homophily mean={mean_h!r} density mode={analysis.density_mode(rows)!r}")
        svg = analysis.svg_line_plot([r["center"] for r in rows], {"density": [r["density"] for r in rows]},
                                     "node homophily density")
    elif args.report == "communities":
        rows = analysis.community_homophily(g, y, args.top, args.seed)
        text = analysis.table_to_csv(rows, ["rank", "community", "size", "homophily"])
    elif args.report == "filters":
        model, _ = load_checkpoint(args.ckpt)
        text = export_filters(model.filters(), SmoothingGrid.uniform(args.grid_points))
        grid = SmoothingGrid.uniform(args.grid_points).points
        svg = analysis.svg_line_plot(grid, {f"expert {o}": f.response(grid) for o, f in enumerate(model.filters())},
                                     "learned filters")
    elif args.report == "gates":
        model, extra = load_checkpoint(args.ckpt)
        idx = _ckpt_split(bundle, extra).part(args.split) if args.split != "all" else None
        rows, rho = analysis.model_gate_by_homophily(model, bundle, args.buckets, idx)
        text = analysis.table_to_csv(rows)
        print(f"spearman(bucket, high-pass weight) = {rho!r}")
    else:
        model, extra = load_checkpoint(args.ckpt)
        other = load_checkpoint(args.ckpt_b)[0] if args.ckpt_b else None
        idx = _ckpt_split(bundle, extra).part(args.split if args.split != "all" else "test")
        rows, overall = analysis.model_accuracy_by_homophily(model, other, bundle, idx, args.buckets)
        text = analysis.table_to_csv(rows)
        print("overall " + json.dumps(overall, sort_keys=True))
    _write(args.out, text)
    if args.svg and svg is not None:
        _write(args.svg, svg)
    return 0


def cmd_validate_theorem(args):
    vals = _csbm_values(args)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    _print_config("validate-theorem", dict(vals, R=args.R, seeds=args.seeds, seed=args.seed, out=args.out))
    reports = []
    for s in range(args.seed, args.seed + args.seeds):
        params = CsbmParams.with_distance(seed=s, **vals)
        rep = theory.validate_theorem(params, args.R)
        reports.append(rep)
        print(rep.text())
    med = {k: float(np.median([getattr(r, k) for r in reports])) for k in ("h0_acc", "h1_acc", "h1_bce", "part2_acc")}
    print("median " + json.dumps(med, sort_keys=True))
    _write(args.out, theory.reports_to_csv(reports))
    return 0


def cmd_export_filters(args):
    _print_config("export-filters", vars(args))
    model, _ = load_checkpoint(args.ckpt)
    _write(args.out, export_filters(model.filters(), SmoothingGrid.uniform(args.grid_points)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nodemoe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample a two-pattern CSBM dataset")
    _add_csbm_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name", default="csbm")
    g.add_argument("--with-split", action="store_true", help="also write a 60/20/20 splits.json")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train Node-MoE")
    t.add_argument("--data", required=True)
    t.add_argument("--experts", type=int, default=2)
    t.add_argument("--order", type=int, default=10)
    t.add_argument("--init", help="comma-separated per-expert strategies")
    t.add_argument("--alpha", default="0.9")
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--gate-hidden", type=int, default=32)
    t.add_argument("--epsilon", type=float, default=0.0)
    t.add_argument("--dropout", type=float, default=0.0)
    t.add_argument("--gamma", type=float, default=0.1)
    t.add_argument("--beta", type=float, default=0.01)
    t.add_argument("--mode", choices=("soft", "topk"), default="soft")
    t.add_argument("--k", type=int)
    t.add_argument("--epochs", type=int, default=1000)
    t.add_argument("--patience", type=int, default=100)
    t.add_argument("--lr-filter", type=float, default=0.01)
    t.add_argument("--lr-network", type=float, default=0.01)
    t.add_argument("--wd-filter", type=float, default=0.0)
    t.add_argument("--wd-network", type=float, default=5e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--repeats", type=int, default=1)
    t.add_argument("--out", help="checkpoint path (repeat i > 0 gets suffix .r<i>)")
    t.add_argument("--history", help="per-epoch history CSV path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="accuracy of a checkpoint on a split part")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--out", help="per-node correctness CSV")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", help="homophily / community / gate / filter / accuracy tables")
    a.add_argument("--data", required=True)
    a.add_argument("--ckpt")
    a.add_argument("--ckpt-b", help="second checkpoint for accuracy-buckets comparison")
    a.add_argument("--report", required=True,
                   choices=("homophily", "communities", "gates", "filters", "accuracy-buckets"))
    a.add_argument("--bins", type=int, default=50)
    a.add_argument("--buckets", type=int, default=5)
    a.add_argument("--top", type=int, default=10)
    a.add_argument("--grid-points", type=int, default=51)
    a.add_argument("--split", choices=("train", "val", "test", "all"), default="all")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--svg", help="optional SVG plot path")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("validate-theorem", help="global vs node-wise filter separability")
    _add_csbm_flags(v)
    v.add_argument("--params", help="comma-separated key=value overrides, e.g. n=500,P=0.3")
    v.add_argument("--R", type=float, default=1.0)
    v.add_argument("--seeds", type=int, default=10)
    v.add_argument("--seed", type=int, default=0, help="first seed")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_validate_theorem)

    x = sub.add_parser("export-filters", help="frequency responses of a checkpoint's experts")
    x.add_argument("--ckpt", required=True)
    x.add_argument("--grid-points", type=int, default=51)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_filters)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, BundleError, CsbmError, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
