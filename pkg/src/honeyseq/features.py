"""Per-event feature vectors and next-event target encoding.

Each event maps to 17 predictors; each input column ``j`` of an encoded
sequence is paired with the four targets of event ``j + 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .sequence import SessionSequence, command_type, split_command
from .tahoe import SessionDocument, TahoeEvent, canonical_hash

FEATURES = (
    "hour", "date", "month", "day",
    "session_start", "session_end", "event_order",
    "event_type", "sensor", "attacker_ip",
    "dest_ip", "dest_port",
    "command_param", "command", "command_type", "command_success",
    "login_success",
)
CATEGORICAL = (
    "month", "day", "event_type", "sensor", "attacker_ip",
    "dest_ip", "command_param", "command", "command_type",
)
BOOLEAN = ("session_start", "session_end", "command_success", "login_success")
INTEGER = ("hour", "date", "event_order", "dest_port")
TARGETS = ("event_type", "command_param", "command", "command_type")

# features absent for an event type; everything else is always present
KIND_SPECIFIC = {
    "dest_ip": "network_traffic",
    "dest_port": "network_traffic",
    "command_param": "shell_command",
    "command": "shell_command",
    "command_type": "shell_command",
    "command_success": "shell_command",
    "login_success": "ssh",
}

MISSING = -1
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_DAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class TooShort(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    hour: int
    date: int
    month: str
    day: str
    session_start: bool
    session_end: bool
    event_order: int
    event_type: str
    sensor: str
    attacker_ip: str | None
    dest_ip: str | None = None
    dest_port: int | None = None
    command_param: str | None = None
    command: str | None = None
    command_type: str | None = None
    command_success: bool | None = None
    login_success: bool | None = None

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


assert tuple(f.name for f in fields(FeatureVector)) == FEATURES


def _tz(name: str):
    return timezone.utc if name.upper() == "UTC" else ZoneInfo(name)


def extract_features(event: TahoeEvent, session: SessionDocument, order: int, tz: str = "UTC") -> FeatureVector:
    when = datetime.fromtimestamp(event.timestamp, _tz(tz))
    total = len(session._ref)
    kind = event.sub_type
    extra: dict[str, Any] = {}
    if kind == "network_traffic":
        extra["dest_ip"] = event.first("dst_ip")
        extra["dest_port"] = event.first("dst_port")
    elif kind == "shell_command":
        text = (event.first("shell_command") or "").strip()
        if text:
            cmd, _ = split_command(text)
            extra.update(command_param=text, command=cmd, command_type=command_type(cmd).value)
        extra["command_success"] = event.first("success")
    elif kind == "ssh":
        extra["login_success"] = event.first("success")
    return FeatureVector(
        hour=when.hour,
        date=when.day,
        month=_MONTHS[when.month - 1],
        day=_DAYS[when.weekday()],
        session_start=order == 1,
        session_end=order == total,
        event_order=order,
        event_type=kind,
        sensor=session.hostname,
        attacker_ip=event.attacker_ip,
        **extra,
    )


def sequence_features(seq: SessionSequence, session: SessionDocument, tz: str = "UTC") -> list[FeatureVector]:
    return [extract_features(ev, session, i + 1, tz) for i, ev in enumerate(seq.events)]


class Vocabulary:
    """Per-feature value <-> index maps, frozen once built.

    Index ``len(values)`` is the out-of-vocabulary slot; ``-1`` means missing.
    As a target, a missing value gets its own class ``len(values) + 1``.
    """

    def __init__(self, values: dict[str, Sequence[Any]]):
        self.values = {name: tuple(values.get(name, ())) for name in CATEGORICAL}
        self._index = {name: {v: i for i, v in enumerate(vals)} for name, vals in self.values.items()}

    def size(self, name: str) -> int:
        return len(self.values[name])

    def oov(self, name: str) -> int:
        return len(self.values[name])

    def num_classes(self, target: str) -> int:
        return len(self.values[target]) + 2

    def encode(self, name: str, value: Any) -> int:
        if value is None:
            return MISSING
        return self._index[name].get(value, self.oov(name))

    def decode(self, name: str, index: int) -> Any:
        if index == MISSING:
            return None
        if not 0 <= index < len(self.values[name]):
            raise KeyError(f"{name} index {index} has no vocabulary value")
        return self.values[name][index]

    def target_class(self, name: str, value: Any) -> int:
        if value is None:
            return len(self.values[name]) + 1
        return self.encode(name, value)

    def digest(self) -> str:
        return canonical_hash({k: list(v) for k, v in self.values.items()})

    def to_dict(self) -> dict[str, list[Any]]:
        return {k: list(v) for k, v in self.values.items()}

    @classmethod
    def from_dict(cls, data: dict[str, list[Any]]) -> "Vocabulary":
        return cls(data)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.values == other.values


def build_vocab(feature_sequences: Iterable[Sequence[FeatureVector]]) -> Vocabulary:
    """First-seen index assignment over sessions, then events, then features."""
    seen: dict[str, dict[Any, None]] = {name: {} for name in CATEGORICAL}
    for vectors in feature_sequences:
        for fv in vectors:
            for name in CATEGORICAL:
                value = getattr(fv, name)
                if value is not None:
                    seen[name].setdefault(value, None)
    return Vocabulary({name: list(vals) for name, vals in seen.items()})


def encode_vector(fv: FeatureVector, vocab: Vocabulary) -> np.ndarray:
    col = np.empty(len(FEATURES))
    for i, name in enumerate(FEATURES):
        value = getattr(fv, name)
        if name in CATEGORICAL:
            col[i] = vocab.encode(name, value)
        elif value is None:
            col[i] = MISSING
        else:
            col[i] = float(value)
    return col


def decode_vector(col: np.ndarray, vocab: Vocabulary) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for i, name in enumerate(FEATURES):
        v = int(col[i])
        if name in CATEGORICAL:
            out[name] = vocab.decode(name, v)
        elif name in BOOLEAN:
            out[name] = None if v == MISSING else bool(v)
        elif name == "dest_port" and v == MISSING:
            out[name] = None
        else:
            out[name] = v
    return out


def target_vector(fv: FeatureVector, vocab: Vocabulary) -> np.ndarray:
    return np.array([vocab.target_class(t, getattr(fv, t)) for t in TARGETS], dtype=np.int64)


@dataclass
class EncodedSequence:
    sessionid: str
    inputs: np.ndarray   # (17, M-1) float64
    targets: np.ndarray  # (4, M-1) int64

    @property
    def steps(self) -> int:
        return self.inputs.shape[1]


def encode_sequence(vectors: Sequence[FeatureVector], vocab: Vocabulary, sessionid: str = "") -> EncodedSequence:
    if len(vectors) < 2:
        raise TooShort(f"need at least 2 events, got {len(vectors)}")
    inputs = np.stack([encode_vector(fv, vocab) for fv in vectors[:-1]], axis=1)
    targets = np.stack([target_vector(fv, vocab) for fv in vectors[1:]], axis=1)
    return EncodedSequence(sessionid, inputs, targets)


@dataclass
class Scaler:
    """z-score parameters for the integer features, fit on the train split."""

    mean: dict[str, float]
    std: dict[str, float]

    @classmethod
    def fit(cls, sequences: Iterable[EncodedSequence]) -> "Scaler":
        seqs = list(sequences)
        mean, std = {}, {}
        for name in INTEGER:
            i = FEATURES.index(name)
            vals = np.concatenate([s.inputs[i] for s in seqs]) if seqs else np.zeros(1)
            mean[name] = float(vals.mean())
            sd = float(vals.std())
            std[name] = sd if sd > 0 else 1.0
        return cls(mean, std)

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {"mean": dict(self.mean), "std": dict(self.std)}

    @classmethod
    def from_dict(cls, data) -> "Scaler":
        return cls(dict(data["mean"]), dict(data["std"]))


@dataclass
class EncodedDataset:
    vocab: Vocabulary
    sequences: list[EncodedSequence]
    scaler: Scaler | None = None

    def class_counts(self, target: str) -> np.ndarray:
        k = TARGETS.index(target)
        counts = np.zeros(self.vocab.num_classes(target), dtype=np.int64)
        for s in self.sequences:
            np.add.at(counts, s.targets[k], 1)
        return counts

    @property
    def num_events(self) -> int:
        return sum(s.steps for s in self.sequences)


def export_columns(dataset: EncodedDataset, path) -> None:
    """Write one row per encoded column; header cells are ``name:type``."""
    types = {n: "cat" if n in CATEGORICAL else "bool" if n in BOOLEAN else "int" for n in FEATURES}
    header = ["sessionid:str", "position:int"]
    header += [f"{n}:{types[n]}" for n in FEATURES]
    header += [f"next_{t}:class" for t in TARGETS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for seq in dataset.sequences:
            for j in range(seq.steps):
                row = [seq.sessionid, j + 1]
                row += [int(v) for v in seq.inputs[:, j]]
                row += [int(v) for v in seq.targets[:, j]]
                writer.writerow(row)


def missing_pattern(fv: FeatureVector) -> tuple[bool, ...]:
    return tuple(getattr(fv, name) is None for name in FEATURES)


def expected_missing_pattern(event_type: str) -> tuple[bool, ...]:
    return tuple(
        name in KIND_SPECIFIC and KIND_SPECIFIC[name] != event_type for name in FEATURES
    )


__all__ = [
    "FEATURES", "CATEGORICAL", "BOOLEAN", "INTEGER", "TARGETS", "MISSING",
    "FeatureVector", "Vocabulary", "EncodedSequence", "EncodedDataset", "Scaler", "TooShort",
    "extract_features", "sequence_features", "build_vocab", "encode_sequence", "encode_vector",
    "decode_vector", "target_vector", "export_columns", "missing_pattern", "expected_missing_pattern",
]
