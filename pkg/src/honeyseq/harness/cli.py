"""``honeyseq`` command line.

Every subcommand takes ``--seed``, ``--config`` and ``--out``.  Exit status
is 0 on success, 1 on data errors (a JSON object ``{"error", "message"}`` is
printed on stderr) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .. import synth
from ..features import EncodedDataset, export_columns
from ..ingest import read_log
from ..neural import checkpoint
from ..tahoe import TahoeError, ingest_events, load, persist
from .experiment import (
    PROFILES,
    Corpus,
    ExperimentConfig,
    Runner,
    build_report,
    epoch_curve,
    evaluate,
    fit,
    grid_search,
    is_monotone,
    learning_curve,
    prepare_corpus,
    write_report_csv,
)

log = logging.getLogger("honeyseq")


class DataError(Exception):
    pass


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def _experiment_config(args) -> ExperimentConfig:
    data = _read_json(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise DataError("experiment config must be a JSON object")
    data.setdefault("profile", getattr(args, "profile", None) or "full")
    if data["profile"] not in PROFILES:
        raise DataError(f"unknown profile {data['profile']!r}")
    cfg = ExperimentConfig.from_dict(data)
    epochs = getattr(args, "epochs", None)
    if epochs is not None:
        cfg = replace(cfg, train=replace(cfg.train, max_epochs=epochs))
    return cfg


def _load_corpus(path) -> Corpus:
    return Corpus.from_dict(_read_json(path))


# --- subcommands -----------------------------------------------------------

def cmd_ingest(args) -> None:
    cfg = _experiment_config(args)
    events, errors = read_log(args.log)
    store = ingest_events(events, timezone=cfg.timezone)
    persist(store, args.out)
    _write_json(None, {
        "events": len(events),
        "errors": [{"line": n, "error": f"{type(e).__name__}: {e}"} for n, e in errors],
        "sessions": len(store.sessions),
        "documents": len(store),
        "store": str(args.out),
    })


def cmd_synth(args) -> None:
    cfg = synth.load_config(args.config)
    events = synth.generate_corpus(cfg, args.sessions, out=args.out, seed=args.seed)
    _write_json(None, {"events": len(events), "sessions": args.sessions, "log": str(args.out),
                       "bayes_accuracy": synth.bayes_accuracy(cfg), "config_digest": cfg.digest()})


def cmd_featurize(args) -> None:
    cfg = _experiment_config(args)
    store = load(args.store)
    corpus = prepare_corpus(store, cfg.split_ratio, args.seed or 0, cfg.timezone)
    _write_json(args.out, corpus.to_dict())
    if args.csv:
        export_columns(EncodedDataset(corpus.vocab, corpus.train + corpus.test, corpus.scaler), args.csv)
    _write_json(None, {"dataset": str(args.out), **corpus.summary()})


def cmd_train(args) -> None:
    cfg = _experiment_config(args)
    corpus = _load_corpus(args.dataset)
    seed = args.seed or 0
    result = fit(args.model, args.target, corpus, cfg.model_config(args.model), cfg.train,
                 args.size, seed, track_epochs=True)
    checkpoint.save(args.out, result.model, args.target, corpus.vocab.digest(), {
        "seed": seed,
        "train_size": result.train_size,
        "test_accuracy": result.accuracy,
        "epoch_accuracy": result.epoch_accuracy,
        "train_loss": result.train_loss,
    })
    _write_json(None, {"checkpoint": str(args.out), "model": args.model, "target": args.target,
                       "test_accuracy": result.accuracy})


def cmd_evaluate(args) -> None:
    model, meta = checkpoint.load(args.checkpoint)
    corpus = _load_corpus(args.dataset)
    target = meta["target"]
    seqs = corpus.test if args.split == "test" else corpus.train
    acc = evaluate(model, seqs, target, corpus.vocab, meta["vocab_digest"])
    _write_json(args.out, {"model": model.kind, "target": target, "split": args.split,
                           "sequences": len(seqs), "accuracy": acc})


def cmd_curves(args) -> None:
    cfg = _experiment_config(args)
    corpus = _load_corpus(args.dataset)
    seed = args.seed or 0
    runner = Runner(corpus, cfg, seed)
    out = {"seed": seed, "config_digest": cfg.digest()}
    if args.kind in ("epoch", "both"):
        n = len(corpus.train)
        sizes = cfg.epoch_curve_sizes or (n, int(n * 0.8))
        out["epoch_curves"] = [
            {"model": m, "target": t, "train_size": s,
             "accuracy": epoch_curve(m, t, corpus, seed, s, cfg, runner)}
            for s in sizes for m in cfg.models for t in cfg.targets
        ]
    if args.kind in ("learning", "both"):
        rows = []
        for m in cfg.learning_models:
            for t in cfg.learning_targets:
                table = learning_curve(m, t, cfg.learning_sizes, corpus, seed, cfg, runner)
                rows.append({"model": m, "target": t, "rows": table, "monotone": is_monotone(table)})
        out["learning_curve"] = rows
    _write_json(args.out, out)


def cmd_gridsearch(args) -> None:
    cfg = _experiment_config(args)
    corpus = _load_corpus(args.dataset)
    seed = args.seed or 0
    grid = grid_search(cfg.grid_blocks, cfg.grid_filters, cfg.grid_filter_sizes, corpus, seed,
                       cfg.grid_target, cfg)
    _write_json(args.out, {"seed": seed, "config_digest": cfg.digest(), **grid})
    if args.csv:
        write_report_csv({"grid": {"status": "ok", **grid}}, args.csv)


def cmd_report(args) -> None:
    cfg = _experiment_config(args)
    corpus = _load_corpus(args.dataset)
    sections = tuple(args.sections.split(",")) if args.sections else (
        "accuracy", "epoch_curves", "learning_curve", "grid")
    report = build_report(corpus, cfg, args.seed or 0, sections)
    _write_json(args.out, report)
    if args.csv_dir:
        write_report_csv(report, args.csv_dir)


# --- parser ----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0, or the config's)")
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--out", type=Path, required=out_required, default=None, help="output path")


def _experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="base experiment profile (overridden by --config)")
    p.add_argument("--epochs", type=int, default=None, help="override max epochs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="honeyseq", description="Honeypot session modeling toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Cowrie JSON-lines log -> TAHOE store file")
    p.add_argument("log", type=Path)
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generator config -> synthetic Cowrie log")
    p.add_argument("--sessions", type=int, default=synth.DEFAULT_SESSIONS)
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="store -> encoded train/test dataset (JSON)")
    p.add_argument("store", type=Path)
    p.add_argument("--csv", type=Path, default=None, help="also write the encoded columns as CSV")
    _common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train one model on one target -> checkpoint")
    p.add_argument("dataset", type=Path)
    p.add_argument("--model", choices=("tcn", "lstm", "gru"), default="tcn")
    p.add_argument("--target", choices=("event_type", "command_param", "command", "command_type"),
                   default="command_type")
    p.add_argument("--size", type=int, default=None, help="use the first N training sequences")
    _experiment(p)
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("dataset", type=Path)
    p.add_argument("--split", choices=("test", "train"), default="test")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="epoch and learning curves")
    p.add_argument("dataset", type=Path)
    p.add_argument("--kind", choices=("epoch", "learning", "both"), default="both")
    _experiment(p)
    _common(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("gridsearch", help="TCN blocks x filters x filter size grid")
    p.add_argument("dataset", type=Path)
    p.add_argument("--csv", type=Path, default=None, help="directory for grid.csv")
    _experiment(p)
    _common(p)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("report", help="full comparison report (JSON, optional CSV)")
    p.add_argument("dataset", type=Path)
    p.add_argument("--csv-dir", type=Path, default=None)
    p.add_argument("--sections", default=None,
                   help="comma list of accuracy,epoch_curves,learning_curve,grid")
    _experiment(p)
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, TypeError, DataError, TahoeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
