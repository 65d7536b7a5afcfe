"""Command-line entry point.

Exit codes: 0 success, 1 tolerance/assertion failure, 2 input or
configuration error. Results go to stdout as JSON, except ``extract``
which prints the subgraph text format.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import check_compatible, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .data import DataError, Example, label_set, load_dataset
from .gradcheck import TOLERANCE, run_gradcheck
from .kg_store import load_embeddings, load_graph
from .linker import read_stoplist
from .model import init_model, softmax
from .subgraph import corpus_stats, serialize_subgraph
from .text_encoder import load_word_embeddings
from .trainer import Pipeline, evaluate, history_report, predict_scores, sweep_thetas, train, write_history

logger = logging.getLogger("kes")


class ToleranceFailure(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def build_pipeline(cfg: RunConfig) -> Pipeline:
    cfg.require_paths("kg_triples")
    for key in ("kg_embeddings", "word_embeddings", "stoplist"):
        if getattr(cfg, key):
            cfg.require_paths(key)
    graph = load_graph(cfg.kg_triples)
    nodes = load_embeddings(cfg.kg_embeddings or None, graph, cfg.node_dim, cfg.seed)
    words = load_word_embeddings(cfg.word_embeddings or None, cfg.word_dim, cfg.seed)
    stop = read_stoplist(cfg.stoplist) if cfg.stoplist else None
    return Pipeline(graph, nodes, words, cfg.ppr_config(), cfg.max_len, stop,
                    Path(cfg.cache_dir) if cfg.cache_dir else None)


def _dataset(cfg: RunConfig, key: str, override: str | None = None) -> list[Example]:
    path = override or getattr(cfg, key)
    if not path:
        raise ConfigError(f"config key {key!r} is required for this command")
    if not Path(path).exists():
        raise ConfigError(f"{key}: no such file: {path}")
    data = load_dataset(path, cfg.num_classes)
    if not data:
        raise DataError(f"{path}: dataset is empty")
    return data


def cmd_build_graph(cfg: RunConfig, args) -> int:
    pipe = build_pipeline(cfg)
    summary = pipe.graph.summary()
    summary["embedding_dim"] = pipe.node_table.dim
    summary["embedding_coverage"] = pipe.node_table.coverage_fraction
    summary["word_vectors"] = len(pipe.word_table.vectors)
    _emit(summary)
    return 0


def cmd_extract(cfg: RunConfig, args) -> int:
    pipe = build_pipeline(cfg)
    sys.stdout.write(serialize_subgraph(pipe.subgraph(args.premise, args.hypothesis)))
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    pipe = build_pipeline(cfg)
    data = _dataset(cfg, "train", args.data)
    for rec in corpus_stats(data, pipe.graph, cfg.thetas, cfg.ppr_config(), cfg.max_len,
                            pipe.stoplist, jobs=args.jobs):
        _emit(rec)
    return 0


def _train_once(cfg: RunConfig, pipe: Pipeline, train_data, dev_data):
    params = init_model(seed=cfg.seed, **cfg.model_kwargs())
    c = cfg.num_classes
    tcfg = cfg.train_config()
    result = train(params, pipe.prepare_all(train_data, c, cfg.use_graph),
                   pipe.prepare_all(dev_data, c, cfg.use_graph), tcfg)
    return result, tcfg


def cmd_train(cfg: RunConfig, args) -> int:
    train_data = _dataset(cfg, "train")
    dev_data = _dataset(cfg, "dev")
    pipe = build_pipeline(cfg)
    result, tcfg = _train_once(cfg, pipe, train_data, dev_data)
    out = Path(cfg.checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    save_checkpoint(ckpt, result.params, {"best_epoch": result.best_epoch})
    report = history_report(result, tcfg, {"run_config": cfg.to_text()})
    write_history(out / "history.json", report)
    _emit({"checkpoint": str(ckpt), "history": str(out / "history.json"), "config": report["config"],
           "best_epoch": result.best_epoch, "best_dev_acc": result.best_dev_accuracy,
           "epochs_run": len(result.history)})
    return 0


def _load_checked(cfg: RunConfig, path: str):
    if not Path(path).exists():
        raise ConfigError(f"no such checkpoint: {path}")
    params = load_checkpoint(path)
    expected = {k: v for k, v in cfg.model_kwargs().items()
                if k in ("word_dim", "text_dim", "hidden_dim", "num_classes", "use_graph")}
    if params.uses_graph and cfg.use_graph:
        expected.update(node_dim=cfg.node_dim, graph_dim=cfg.graph_dim)
    check_compatible(params, expected)
    return params


def cmd_eval(cfg: RunConfig, args) -> int:
    params = _load_checked(cfg, args.checkpoint)
    data = _dataset(cfg, "test", args.data)
    pipe = build_pipeline(cfg)
    prepared = pipe.prepare_all(data, cfg.num_classes, params.uses_graph)
    _emit(evaluate(params, prepared, jobs=args.jobs).as_dict(label_set(cfg.num_classes)))
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    params = _load_checked(cfg, args.checkpoint)
    pipe = build_pipeline(cfg)
    ex = pipe.prepare(Example(args.premise, args.hypothesis, ""), None, params.uses_graph)
    probs = softmax(predict_scores(params, ex))
    labels = label_set(cfg.num_classes)
    _emit({"label": labels[int(np.argmax(probs))],
           "probabilities": {lab: float(p) for lab, p in zip(labels, probs)}})
    return 0


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    report = run_gradcheck(num_models=args.models, seed=cfg.seed)
    report["tolerance"] = TOLERANCE
    report["passed"] = report["max_rel_error"] < TOLERANCE
    _emit(report)
    if not report["passed"]:
        raise ToleranceFailure(f"max relative error {report['max_rel_error']:.3g} >= {TOLERANCE}")
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    train_data = _dataset(cfg, "train")
    dev_data = _dataset(cfg, "dev")
    pipe = build_pipeline(cfg)
    records = sweep_thetas(lambda: init_model(seed=cfg.seed, **cfg.model_kwargs()), pipe,
                           train_data, dev_data, cfg.train_config(), cfg.thetas)
    for rec in records:
        _emit(rec)
    best = max(records, key=lambda r: (r["best_dev_acc"], -r["theta"]))
    _emit({"best_theta": best["theta"], "best_dev_acc": best["best_dev_acc"]})
    return 0


def _parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key = value config file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--theta", type=float)
    shared.add_argument("--jobs", type=int, default=1, help="parallel workers for extraction/evaluation")
    shared.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kes", description="KG-augmented textual entailment")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build-graph", parents=[shared], help="load and summarize KG + embeddings")
    p = sub.add_parser("extract", parents=[shared], help="print the contextual subgraph of a pair")
    p.add_argument("premise")
    p.add_argument("hypothesis")
    p = sub.add_parser("stats", parents=[shared], help="subgraph size averages per theta")
    p.add_argument("--data", help="dataset file (default: config 'train')")
    sub.add_parser("train", parents=[shared], help="train and write checkpoint + history")
    p = sub.add_parser("eval", parents=[shared], help="accuracy and confusion counts")
    p.add_argument("checkpoint")
    p.add_argument("--data", help="dataset file (default: config 'test')")
    p = sub.add_parser("predict", parents=[shared], help="classify one pair")
    p.add_argument("checkpoint")
    p.add_argument("premise")
    p.add_argument("hypothesis")
    p = sub.add_parser("gradcheck", parents=[shared], help="finite-difference gradient check")
    p.add_argument("--models", type=int, default=20)
    sub.add_parser("sweep", parents=[shared], help="train once per theta in the grid")
    return parser


COMMANDS = {
    "build-graph": cmd_build_graph, "extract": cmd_extract, "stats": cmd_stats, "train": cmd_train,
    "eval": cmd_eval, "predict": cmd_predict, "gradcheck": cmd_gradcheck, "sweep": cmd_sweep,
}


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.theta is not None:
        overrides["theta"] = repr(args.theta)
    cfg = cfg.with_overrides(overrides)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ToleranceFailure as exc:
        print(f"kes: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:  # every input error class derives from ValueError
        print(f"kes: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
