"""Command line entry point: ``hypermt <command> [options]``.

Every command writes its outputs and a ``manifest.json`` into ``--out-dir``.
Options may also come from a TOML file given with ``--config``; top-level
keys apply to every command and a ``[<command>]`` table to one command.
Flags on the command line win over the file, which wins over defaults.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (MODES, NegativeSamplingError, community_report, cosine_similarity_per_node,
                         cross_validate, nmi)
from .fixtures import fixture_noisy
from .generator import GenConfig, generate, planted_params, size_profile
from .hypergraph import (HypergraphFormatError, clique_expand, load_hypergraph, load_labels,
                         read_hyperedges, save_hypergraph, save_labels, save_node_map)
from .inference import FitConfig, FitError, fit, load_model, save_model
from .scoring import prob_exists_clique, prob_exists_hypergraph

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("hypermt")

DATA_ERRORS = (HypergraphFormatError, FitError, NegativeSamplingError, ValueError,
               FileNotFoundError, KeyError)


def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else (1e308 if value > 0 else -1e308)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n", encoding="utf-8")


def _fit_config(args) -> FitConfig:
    return FitConfig(
        num_communities=args.k,
        seed=args.seed,
        num_restarts=args.restarts,
        max_iters=args.max_iters,
        tol=args.tol,
        gamma_u=args.gamma_u,
        gamma_w=args.gamma_w,
        simplex=args.simplex,
        auto_constraint=args.auto_constraint,
        max_size=args.max_size,
        n_jobs=max(1, args.threads or 1),
    )


def _load_input(args):
    return load_hypergraph(args.input, strict=not args.lenient, max_size=args.max_size,
                           binarize=args.binarize)


def cmd_infer(args, out: Path) -> dict:
    h = _load_input(args)
    cfg = _fit_config(args)
    result = fit(h, cfg)
    paths = save_model(result, h, out, cfg)
    save_node_map(h, out / "nodes.csv")
    paths["nodes"] = out / "nodes.csv"
    logger.info("loglik %.6f after %d iterations (restart %d)", result.loglik,
                result.iterations, result.restart)
    return {"inputs": [args.input], "outputs": paths,
            "results": {"loglik": result.loglik, "iterations": result.iterations,
                        "restart": result.restart, "simplex": result.simplex}}


def cmd_predict(args, out: Path) -> dict:
    params, names = load_model(args.model_dir)
    cands = read_hyperedges(args.candidates, node_names=names, allow_new_nodes=False)
    if args.mode == "clique":
        scores = prob_exists_clique(cands.edges, params)
    else:
        scores = prob_exists_hypergraph(cands.edges, params)
    path = out / "scores.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge", "score"])
        for e, s in zip(cands.edges, scores):
            writer.writerow([" ".join(names[i] for i in e), repr(float(s))])
    return {"inputs": [args.candidates, Path(args.model_dir) / "u.csv",
                       Path(args.model_dir) / "w.csv"],
            "outputs": {"scores": path}, "results": {"candidates": len(cands.edges)}}


def cmd_cv(args, out: Path) -> dict:
    h = _load_input(args)
    cfg = _fit_config(args)
    report = cross_validate(h, cfg, mode=args.mode, num_folds=args.folds,
                            samples=args.samples, seed=args.seed)
    if args.labels:
        labels = load_labels(args.labels, h)
        data = clique_expand(h) if args.mode == "clique" else h
        full = fit(data, cfg)
        metrics = community_report(full.params, labels)
        report.f1, report.cosine, report.nmi = metrics["f1"], metrics["cosine"], metrics["nmi"]
    report_path = out / "report.json"
    _write_json(report_path, report.to_dict())
    folds_path = out / "folds.csv"
    with open(folds_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        fields = list(asdict(report.folds[0]))
        writer.writerow(fields)
        for f in report.folds:
            writer.writerow([getattr(f, name) for name in fields])
    logger.info("AUC %.3f +- %.3f", report.auc_mean, report.auc_sd)
    inputs = [args.input] + ([args.labels] if args.labels else [])
    return {"inputs": inputs, "outputs": {"report": report_path, "folds": folds_path},
            "results": {"auc_mean": report.auc_mean, "auc_sd": report.auc_sd,
                        "auc_pairs_mean": report.auc_pairs_mean}}


def _parse_rows(text: str) -> list[list[float]]:
    return [[float(x) for x in row.split(",")] for row in text.split(";") if row.strip()]


def cmd_generate(args, out: Path) -> dict:
    profiles = _parse_rows(args.profiles) if args.profiles else None
    proportions = _parse_rows(args.proportions)[0] if args.proportions else None
    shares = size_profile(args.mean_size, args.max_size)
    per_size = {d: args.edges * s for d, s in zip(range(2, args.max_size + 1), shares)}
    u, w = planted_params(args.nodes, args.k, args.max_size, per_size, profiles=profiles,
                          proportions=proportions, background=args.background)
    gen = generate(GenConfig(u, w, seed=args.seed, mode=args.mode))
    h = gen.hypergraph
    edges_path = out / "edges.txt"
    save_hypergraph(h, edges_path)
    u_path = out / "u_true.csv"
    w_path = out / "w_true.csv"
    np.savetxt(u_path, np.column_stack([np.arange(h.num_nodes), u]), delimiter=",",
               header=",".join(["node"] + [f"k{k}" for k in range(args.k)]), comments="",
               fmt=["%d"] + ["%.17g"] * args.k)
    np.savetxt(w_path, np.column_stack([np.arange(2, args.max_size + 1), w[2:]]), delimiter=",",
               header=",".join(["d"] + [f"k{k}" for k in range(args.k)]), comments="",
               fmt=["%d"] + ["%.17g"] * args.k)
    return {"inputs": [], "outputs": {"edges": edges_path, "u_true": u_path, "w_true": w_path},
            "results": {"num_edges": h.num_edges, "max_size": h.max_size,
                        "merged_duplicates": gen.merged_duplicates,
                        "has_duplicates": gen.merged_duplicates > 0,
                        "expected_counts": gen.expected_counts}}


def _read_truth(path: str | Path, names: list[str]) -> np.ndarray:
    lookup = {tok: i for i, tok in enumerate(names)}
    rows: dict[int, list[float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row and row[0] in lookup:
                rows[lookup[row[0]]] = [float(x) for x in row[1:]]
    if len(rows) != len(names):
        raise ValueError(f"{path}: ground truth missing for some nodes")
    return np.array([rows[i] for i in range(len(names))])


def cmd_eval(args, out: Path) -> dict:
    params, names = load_model(args.model_dir)
    results: dict = {}
    inputs = [Path(args.model_dir) / "u.csv"]
    if args.labels:
        labels = load_labels(args.labels, names)
        metrics = community_report(params, labels)
        per_node = metrics.pop("cosine_per_node")
        results.update(metrics)
        inputs.append(args.labels)
    elif args.truth:
        truth = _read_truth(args.truth, names)
        per_node = cosine_similarity_per_node(params.u, truth)
        results["cosine"] = float(per_node.mean())
        results["nmi"] = nmi(params.hard_assignments(), truth.argmax(axis=1))
        inputs.append(args.truth)
    else:
        raise ValueError("eval needs --labels or --truth")
    cos_path = out / "cosine.csv"
    with open(cos_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "cosine"])
        for name, value in zip(names, per_node):
            writer.writerow([name, repr(float(value))])
    eval_path = out / "eval.json"
    _write_json(eval_path, results)
    return {"inputs": inputs, "outputs": {"eval": eval_path, "cosine": cos_path},
            "results": results}


def cmd_expand(args, out: Path) -> dict:
    h = _load_input(args)
    g = clique_expand(h)
    path = out / "expanded.txt"
    save_hypergraph(g, path)
    return {"inputs": [args.input], "outputs": {"edges": path},
            "results": {"num_edges": g.num_edges}}


def cmd_fixture_noisy(args, out: Path) -> dict:
    h = _load_input(args)
    labels = load_labels(args.labels, h) if args.labels else None
    noisy, new_labels, event = fixture_noisy(h, labels, args.guests, args.members, args.seed)
    edges_path = out / "edges.txt"
    save_hypergraph(noisy, edges_path)
    outputs = {"edges": edges_path}
    if new_labels is not None:
        outputs["labels"] = out / "labels.csv"
        save_labels(noisy, new_labels, outputs["labels"])
    inputs = [args.input] + ([args.labels] if args.labels else [])
    return {"inputs": inputs, "outputs": outputs,
            "results": {"event": [noisy.node_label(i) for i in event],
                        "num_nodes": noisy.num_nodes, "num_edges": noisy.num_edges}}


COMMANDS = {
    "infer": cmd_infer,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "expand": cmd_expand,
    "fixture-noisy": cmd_fixture_noisy,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("--config", type=Path, help="TOML file with option defaults")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", required=True, help="hyperedge-list file")
    data.add_argument("--max-size", type=int, help="drop hyperedges larger than this")
    data.add_argument("--binarize", action="store_true", help="set all weights to 1")
    data.add_argument("--lenient", action="store_true",
                      help="skip lines with fewer than 2 nodes instead of failing")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--k", type=int, required=True, help="number of communities")
    model.add_argument("--restarts", type=int, default=10)
    model.add_argument("--max-iters", type=int, default=500)
    model.add_argument("--tol", type=float, default=1e-6)
    model.add_argument("--gamma-u", type=float, default=0.0)
    model.add_argument("--gamma-w", type=float, default=0.0)
    model.add_argument("--simplex", action="store_true")
    model.add_argument("--auto-constraint", action="store_true")

    parser = argparse.ArgumentParser(prog="hypermt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("infer", parents=[common, data, model], help="fit memberships and affinities")

    p = sub.add_parser("predict", parents=[common], help="score candidate hyperedges")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--mode", choices=("hypergraph", "clique"), default="hypergraph")

    p = sub.add_parser("cv", parents=[common, data, model], help="cross-validated AUC")
    p.add_argument("--mode", choices=MODES, default="hypergraph")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--labels", help="node,label CSV for F1 / cosine / NMI of a full fit")

    p = sub.add_parser("generate", parents=[common], help="sample a synthetic hypergraph")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--edges", type=float, default=500.0, help="expected number of hyperedges")
    p.add_argument("--mean-size", type=float, default=3.0)
    p.add_argument("--background", type=float, default=0.0,
                   help="membership level outside a node's own block")
    p.add_argument("--profiles", help="membership rows, e.g. '1,0;0,1;0.5,0.5'")
    p.add_argument("--proportions", help="block shares, e.g. '0.25,0.25,0.5'")
    p.add_argument("--mode", choices=("exact", "per-size"), default="exact")

    p = sub.add_parser("eval", parents=[common], help="compare a fit with node metadata")
    p.add_argument("--model-dir", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--labels", help="node,label CSV")
    group.add_argument("--truth", help="ground-truth membership CSV (node,k0,...)")

    sub.add_parser("expand", parents=[common, data], help="clique-expand a hypergraph")

    p = sub.add_parser("fixture-noisy", parents=[common, data],
                       help="add one large event hyperedge with guest nodes")
    p.add_argument("--labels")
    p.add_argument("--guests", type=int, default=10)
    p.add_argument("--members", type=int, default=10)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    with open(known.config, "rb") as fh:
        conf = tomllib.load(fh)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    shared = {k.replace("-", "_"): v for k, v in conf.items() if not isinstance(v, dict)}
    for name, sp in subparsers.choices.items():
        dests = {a.dest for a in sp._actions}
        own = {k.replace("-", "_"): v for k, v in conf.get(name, {}).items()}
        values = {k: v for k, v in {**shared, **own}.items() if k in dests}
        for action in sp._actions:
            if action.dest in values:
                action.required = False
        sp.set_defaults(**values)


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, tomllib.TOMLDecodeError) as err:
        print(f"hypermt: cannot read config: {err}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        info = COMMANDS[args.command](args, out)
    except DATA_ERRORS as err:
        print(f"hypermt {args.command}: {err}", file=sys.stderr)
        return 1
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": {k: v for k, v in vars(args).items() if k != "command"},
        "seed": args.seed,
        "version": __version__,
        "inputs": {str(p): _digest(p) for p in info.get("inputs", [])},
        "outputs": {k: str(v) for k, v in info.get("outputs", {}).items()},
        "results": info.get("results", {}),
        "wall_time": time.perf_counter() - start,
    }
    _write_json(out / "manifest.json", manifest)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
