"""Splits, training cells, curves, grid search and report assembly."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..features import (
    CATEGORICAL,
    TARGETS,
    EncodedSequence,
    Scaler,
    Vocabulary,
    build_vocab,
    encode_sequence,
    sequence_features,
)
from ..sequence import EmptyInput, SessionSequence, build_sequences
from ..tahoe import DocumentStore
from ..neural import InputSpec, RecurrentConfig, SequenceClassifier, TcnConfig, TrainConfig
from ..neural.train import accuracy, train

log = logging.getLogger(__name__)

REPORT_SCHEMA = "honeyseq-report"
REPORT_VERSION = 1


class VocabMismatch(ValueError):
    pass


class SizeTooLarge(ValueError):
    pass


class InvalidGrid(ValueError):
    pass


# --- splitting and corpus preparation -------------------------------------

def split_sessions(sequences: Sequence[Any], ratio: float = 0.8, seed: int = 0):
    """Random session-level split; the train side gets ``ceil(n * ratio)`` sessions.

    Train members come out in the shuffled order (so "the first s training
    sequences" is a random subset); test members keep their input order.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    n = len(sequences)
    if n == 0:
        raise EmptyInput("no sessions to split")
    k = min(n, math.ceil(round(n * ratio, 9)))
    perm = np.random.default_rng(seed).permutation(n)
    chosen = set(perm[:k].tolist())
    train_part = [sequences[i] for i in perm[:k]]
    test_part = [s for i, s in enumerate(sequences) if i not in chosen]
    return train_part, test_part


@dataclass
class Corpus:
    """Encoded train/test splits with the train-only vocabulary and scaler."""

    vocab: Vocabulary
    scaler: Scaler
    train: list[EncodedSequence]
    test: list[EncodedSequence]
    seed: int = 0
    split_ratio: float = 0.8

    @property
    def input_spec(self) -> InputSpec:
        return InputSpec({n: self.vocab.size(n) for n in CATEGORICAL}, self.scaler)

    def num_classes(self, target: str) -> int:
        return self.vocab.num_classes(target)

    def summary(self) -> dict[str, int]:
        return {
            "sessions": len(self.train) + len(self.test),
            "train_sequences": len(self.train),
            "test_sequences": len(self.test),
            "train_events": sum(s.steps + 1 for s in self.train),
            "test_events": sum(s.steps + 1 for s in self.test),
        }

    def to_dict(self) -> dict[str, Any]:
        def enc(seqs):
            return [{"sessionid": s.sessionid, "inputs": s.inputs.astype(np.int64).tolist(),
                     "targets": s.targets.tolist()} for s in seqs]
        return {
            "format": "honeyseq-dataset",
            "version": 1,
            "seed": self.seed,
            "split_ratio": self.split_ratio,
            "vocab": self.vocab.to_dict(),
            "vocab_digest": self.vocab.digest(),
            "scaler": self.scaler.to_dict(),
            "train": enc(self.train),
            "test": enc(self.test),
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Corpus":
        if obj.get("format") != "honeyseq-dataset" or obj.get("version") != 1:
            raise ValueError("not a version-1 honeyseq dataset")

        def dec(items):
            return [EncodedSequence(it["sessionid"], np.asarray(it["inputs"], dtype=np.float64),
                                    np.asarray(it["targets"], dtype=np.int64)) for it in items]
        vocab = Vocabulary.from_dict(obj["vocab"])
        if obj.get("vocab_digest") not in (None, vocab.digest()):
            raise VocabMismatch("dataset vocabulary does not match its digest")
        return cls(vocab, Scaler.from_dict(obj["scaler"]), dec(obj["train"]), dec(obj["test"]),
                   int(obj.get("seed", 0)), float(obj.get("split_ratio", 0.8)))


def prepare_corpus(store: DocumentStore, ratio: float = 0.8, seed: int = 0, tz: str = "UTC") -> Corpus:
    """store -> sequences -> split -> vocabulary (train only) -> encoding -> scaler."""
    sequences = build_sequences(store)
    train_seqs, test_seqs = split_sessions(sequences, ratio, seed)

    def feats(seqs: Iterable[SessionSequence]):
        return [(s.sessionid, sequence_features(s, store.session(s.sessionid), tz)) for s in seqs]

    train_feats, test_feats = feats(train_seqs), feats(test_seqs)
    vocab = build_vocab(f for _, f in train_feats)
    train_enc = [encode_sequence(f, vocab, sid) for sid, f in train_feats]
    test_enc = [encode_sequence(f, vocab, sid) for sid, f in test_feats]
    return Corpus(vocab, Scaler.fit(train_enc), train_enc, test_enc, seed, ratio)


# --- configuration ---------------------------------------------------------

def default_sizes(n_train: int, parts: int = 5) -> list[int]:
    """Evenly spaced fractions of the training set (63..315 for 315)."""
    return sorted({max(1, round(n_train * i / parts)) for i in range(1, parts + 1)})


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...] = ("tcn", "lstm", "gru")
    targets: tuple[str, ...] = TARGETS
    tcn: TcnConfig = TcnConfig()
    recurrent: RecurrentConfig = RecurrentConfig()
    train: TrainConfig = TrainConfig()
    split_ratio: float = 0.8
    timezone: str = "UTC"
    # None means "derive from the training set size"
    epoch_curve_sizes: tuple[int, ...] | None = None
    learning_sizes: tuple[int, ...] | None = None
    learning_models: tuple[str, ...] = ("tcn", "lstm", "gru")
    learning_targets: tuple[str, ...] = ("command_type",)
    grid_blocks: tuple[int, ...] = (1, 2, 3, 4)
    grid_filters: tuple[int, ...] = (25, 50, 100, 150)
    grid_filter_sizes: tuple[int, ...] = (2, 3, 4)
    grid_target: str = "command_type"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        base = PROFILES[data.pop("profile", "full")]
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown experiment config keys: {', '.join(unknown)}")
        kw: dict[str, Any] = {}
        for key, value in data.items():
            if key == "tcn":
                kw[key] = replace(base.tcn, **value)
            elif key == "recurrent":
                kw[key] = replace(base.recurrent, **value)
            elif key == "train":
                kw[key] = replace(base.train, **value)
            elif isinstance(value, list):
                kw[key] = tuple(value)
            else:
                kw[key] = value
        return replace(base, **kw)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def model_config(self, kind: str):
        return self.tcn if kind == "tcn" else self.recurrent


PROFILES: dict[str, ExperimentConfig] = {
    # library defaults throughout
    "full": ExperimentConfig(),
    # same training schedule, smaller recurrent state so a full report fits on one core
    "desk": ExperimentConfig(recurrent=RecurrentConfig(hidden_size=128, dropout=0.05)),
}


# --- training cells --------------------------------------------------------

@dataclass
class RunResult:
    kind: str
    target: str
    train_size: int
    model_config: dict[str, Any]
    accuracy: float
    epoch_accuracy: list[float] | None
    train_loss: list[float]
    model: SequenceClassifier | None = field(default=None, repr=False)


def _check_kind_target(kind: str, target: str) -> None:
    if kind not in ("tcn", "lstm", "gru"):
        raise ValueError(f"unknown model kind {kind!r}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")


def fit(kind: str, target: str, corpus: Corpus, model_config=None, train_config: TrainConfig = TrainConfig(),
        size: int | None = None, seed: int = 0, track_epochs: bool = False) -> RunResult:
    """Train one model on the first ``size`` training sequences and score it on the test split."""
    _check_kind_target(kind, target)
    n = len(corpus.train)
    size = n if size is None else size
    if size < 1:
        raise ValueError("training size must be >= 1")
    if size > n:
        raise SizeTooLarge(f"size {size} exceeds the {n} training sequences")
    if model_config is None:
        model_config = TcnConfig() if kind == "tcn" else RecurrentConfig()
    model = SequenceClassifier.create(kind, model_config, corpus.input_spec, corpus.num_classes(target), seed)
    tc = replace(train_config, seed=seed)
    history = train(model, target, corpus.train[:size], tc, corpus.test if track_epochs else None)
    if track_epochs and history.eval_accuracy:
        final = history.eval_accuracy[-1]
    else:
        final = accuracy(model, corpus.test, target) if corpus.test else float("nan")
    return RunResult(kind, target, size, asdict(model_config), final,
                     list(history.eval_accuracy) if track_epochs else None, list(history.train_loss), model)


class Runner:
    """Memoizes training cells so shared cells (e.g. the full-size run behind
    both the accuracy table and the epoch curve) are trained once."""

    def __init__(self, corpus: Corpus, config: ExperimentConfig, seed: int = 0):
        self.corpus, self.config, self.seed = corpus, config, seed
        self.cache: dict[tuple, RunResult] = {}

    def run(self, kind: str, target: str, size: int | None = None, model_config=None,
            track_epochs: bool = False) -> RunResult:
        size = len(self.corpus.train) if size is None else size
        model_config = model_config or self.config.model_config(kind)
        key = (kind, target, size, json.dumps(asdict(model_config), sort_keys=True))
        hit = self.cache.get(key)
        if hit is not None and (hit.epoch_accuracy is not None or not track_epochs):
            return hit
        log.info("training %s/%s on %d sequences (%s)", kind, target, size, key[3])
        result = fit(kind, target, self.corpus, model_config, self.config.train, size, self.seed, track_epochs)
        result.model = None  # keep the cache light
        self.cache[key] = result
        return result


def evaluate(model: SequenceClassifier, sequences: Sequence[EncodedSequence], target: str,
             vocab: Vocabulary | None = None, model_vocab_digest: str | None = None) -> float:
    """Fraction of predicted time steps whose argmax equals the next-event label."""
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if vocab is not None:
        if model_vocab_digest is not None and model_vocab_digest != vocab.digest():
            raise VocabMismatch("model was trained with a different vocabulary")
        if model.num_classes != vocab.num_classes(target):
            raise VocabMismatch(f"model has {model.num_classes} classes, vocabulary gives "
                                f"{vocab.num_classes(target)} for {target}")
        card = {n: vocab.size(n) for n in CATEGORICAL}
        if card != model.inputs.cardinality:
            raise VocabMismatch("input vocabulary sizes differ from the model's")
    if not sequences:
        raise EmptyInput("empty evaluation set")
    return accuracy(model, sequences, target)


def learning_curve(kind: str, target: str, sizes: Iterable[int] | None, corpus: Corpus, seed: int = 0,
                   config: ExperimentConfig = PROFILES["full"], runner: Runner | None = None) -> list[dict]:
    """Rows ``{"size", "accuracy"}`` for each distinct size, ascending."""
    n = len(corpus.train)
    sizes = default_sizes(n) if sizes is None else sorted(set(int(s) for s in sizes))
    if not sizes:
        raise ValueError("no sizes given")
    for s in sizes:
        if s < 1:
            raise ValueError(f"training size must be >= 1, got {s}")
        if s > n:
            raise SizeTooLarge(f"size {s} exceeds the {n} training sequences")
    runner = runner or Runner(corpus, config, seed)
    return [{"size": s, "accuracy": runner.run(kind, target, s).accuracy} for s in sizes]


def is_monotone(rows: Sequence[dict]) -> bool:
    acc = [r["accuracy"] for r in rows]
    return all(b >= a for a, b in zip(acc, acc[1:]))


def epoch_curve(kind: str, target: str, corpus: Corpus, seed: int = 0, size: int | None = None,
                config: ExperimentConfig = PROFILES["full"], runner: Runner | None = None) -> list[float]:
    """Test accuracy after each epoch (length ``max_epochs``), unsmoothed."""
    runner = runner or Runner(corpus, config, seed)
    return list(runner.run(kind, target, size, track_epochs=True).epoch_accuracy)


def _check_grid(values: Sequence[int], name: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in values)
    if not vals:
        raise InvalidGrid(f"{name} is empty")
    if any(v < 1 for v in vals):
        raise InvalidGrid(f"{name} values must be >= 1")
    if len(set(vals)) != len(vals):
        raise InvalidGrid(f"{name} has duplicates")
    return vals


def grid_search(blocks: Sequence[int], filters: Sequence[int], filter_sizes: Sequence[int], corpus: Corpus,
                seed: int = 0, target: str = "command_type", config: ExperimentConfig = PROFILES["full"],
                runner: Runner | None = None) -> dict[str, Any]:
    """Full factorial over TCN shapes; ``best`` is the first cell with the top accuracy."""
    blocks = _check_grid(blocks, "blocks")
    filters = _check_grid(filters, "filters")
    filter_sizes = _check_grid(filter_sizes, "filter_sizes")
    runner = runner or Runner(corpus, config, seed)
    rows = []
    for b in blocks:
        for f in filters:
            for k in filter_sizes:
                cfg = TcnConfig(b, f, k, config.tcn.dropout)
                rows.append({"num_blocks": b, "num_filters": f, "filter_size": k,
                             "accuracy": runner.run("tcn", target, None, cfg).accuracy})
    best = max(rows, key=lambda r: r["accuracy"])  # max keeps the first maximum
    return {"target": target, "rows": rows, "best": dict(best)}


# --- report ----------------------------------------------------------------

def _cell(fn):
    try:
        return {"status": "ok", **fn()}
    except Exception as exc:  # a failed cell is recorded, not fatal
        log.warning("cell failed: %s", exc)
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def build_report(corpus: Corpus, config: ExperimentConfig, seed: int = 0, sections: Sequence[str] = (
        "accuracy", "epoch_curves", "learning_curve", "grid"), runner: Runner | None = None,
        extra: dict[str, Any] | None = None) -> dict[str, Any]:
    """Assemble the versioned report; contains no wall-clock data so reruns are byte-identical."""
    runner = runner or Runner(corpus, config, seed)
    n = len(corpus.train)
    curve_sizes = list(config.epoch_curve_sizes or (n, math.floor(n * 0.8)))
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "version": REPORT_VERSION,
        "seed": seed,
        "config_digest": config.digest(),
        "config": config.to_dict(),
        "vocab_digest": corpus.vocab.digest(),
        "corpus": corpus.summary(),
    }
    if extra:
        report.update(extra)
    if "accuracy" in sections:
        track = "epoch_curves" in sections and n in curve_sizes
        cells = []
        for kind in config.models:
            for target in config.targets:
                cells.append({"model": kind, "target": target, **_cell(
                    lambda: {"accuracy": runner.run(kind, target, n, track_epochs=track).accuracy})})
        report["accuracy"] = cells
        report["tcn_vs_recurrent"] = _comparison(cells, config.targets)
    if "epoch_curves" in sections:
        curves = []
        for size in curve_sizes:
            for kind in config.models:
                for target in config.targets:
                    curves.append({"model": kind, "target": target, "train_size": size, **_cell(
                        lambda: {"accuracy": runner.run(kind, target, size, track_epochs=True).epoch_accuracy})})
        report["epoch_curves"] = curves
    if "learning_curve" in sections:
        sizes = list(config.learning_sizes or default_sizes(n))
        rows = []
        for kind in config.learning_models:
            for target in config.learning_targets:
                res = _cell(lambda: {"rows": learning_curve(kind, target, sizes, corpus, seed, config, runner)})
                if res["status"] == "ok":
                    res["monotone"] = is_monotone(res["rows"])
                rows.append({"model": kind, "target": target, **res})
        report["learning_curve"] = rows
    if "grid" in sections:
        report["grid"] = _cell(lambda: grid_search(config.grid_blocks, config.grid_filters,
                                                   config.grid_filter_sizes, corpus, seed,
                                                   config.grid_target, config, runner))
    return report


def _comparison(cells: list[dict], targets: Sequence[str]) -> dict[str, Any]:
    """Whether TCN matched or beat both recurrent models, per target (reported only)."""
    acc = {(c["model"], c["target"]): c.get("accuracy") for c in cells if c["status"] == "ok"}
    out = {}
    for t in targets:
        tcn = acc.get(("tcn", t))
        others = [acc[(m, t)] for m in ("lstm", "gru") if (m, t) in acc]
        out[t] = None if tcn is None or not others else bool(all(tcn >= o for o in others))
    return out


def validate_report(report: dict[str, Any]) -> list[str]:
    """Problems with a report's structure or values; empty when it is well formed."""
    problems = []
    if report.get("schema") != REPORT_SCHEMA or report.get("version") != REPORT_VERSION:
        problems.append("unknown schema or version")

    def check(value, where):
        if not isinstance(value, float) or not 0.0 <= value <= 1.0:
            problems.append(f"{where}: accuracy {value!r} outside [0, 1]")

    for c in report.get("accuracy", []):
        if c["status"] == "ok":
            check(c["accuracy"], f"accuracy {c['model']}/{c['target']}")
    for c in report.get("epoch_curves", []):
        if c["status"] == "ok":
            for i, v in enumerate(c["accuracy"]):
                check(v, f"epoch {i} {c['model']}/{c['target']}/{c['train_size']}")
    for c in report.get("learning_curve", []):
        for r in c.get("rows", []):
            check(r["accuracy"], f"learning {c['model']}/{c['target']}/{r['size']}")
    grid = report.get("grid")
    if grid and grid.get("status") == "ok":
        for r in grid["rows"]:
            check(r["accuracy"], f"grid {r['num_blocks']}/{r['num_filters']}/{r['filter_size']}")
    return problems


def write_report_csv(report: dict[str, Any], directory) -> list[str]:
    """Flatten a report into ``accuracy.csv``, ``epoch_curves.csv``,
    ``learning_curve.csv`` and ``grid.csv`` (only the sections present)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name, header, rows):
        path = out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        written.append(str(path))

    if "accuracy" in report:
        dump("accuracy.csv", ["model", "target", "status", "accuracy"],
             [[c["model"], c["target"], c["status"], c.get("accuracy", "")] for c in report["accuracy"]])
    if "epoch_curves" in report:
        rows = []
        for c in report["epoch_curves"]:
            for i, v in enumerate(c.get("accuracy") or []):
                rows.append([c["model"], c["target"], c["train_size"], i + 1, v])
        dump("epoch_curves.csv", ["model", "target", "train_size", "epoch", "accuracy"], rows)
    if "learning_curve" in report:
        rows = [[c["model"], c["target"], r["size"], r["accuracy"]]
                for c in report["learning_curve"] for r in c.get("rows", [])]
        dump("learning_curve.csv", ["model", "target", "train_size", "accuracy"], rows)
    grid = report.get("grid")
    if grid and grid.get("status") == "ok":
        dump("grid.csv", ["num_blocks", "num_filters", "filter_size", "accuracy"],
             [[r["num_blocks"], r["num_filters"], r["filter_size"], r["accuracy"]] for r in grid["rows"]])
    return written
