"""Self-describing JSON checkpoints.

Each tensor is stored with its shape and its values as base64 of
little-endian float64 bytes, row-major.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict

import numpy as np

from .models import InputSpec, RecurrentConfig, SequenceClassifier, TcnConfig

FORMAT = "honeyseq-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_tensor(array: np.ndarray) -> dict:
    data = np.ascontiguousarray(array, dtype="<f8").tobytes()
    return {"shape": list(array.shape), "dtype": "float64-le", "data": base64.b64encode(data).decode("ascii")}


def decode_tensor(obj: dict) -> np.ndarray:
    if obj.get("dtype") != "float64-le":
        raise CheckpointError(f"unsupported dtype {obj.get('dtype')!r}")
    raw = base64.b64decode(obj["data"])
    shape = tuple(obj["shape"])
    arr = np.frombuffer(raw, dtype="<f8")
    if arr.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError("tensor data does not match its shape")
    return arr.reshape(shape).astype(np.float64)


def to_dict(model: SequenceClassifier, target: str, vocab_digest: str, extra: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "target": target,
        "config": asdict(model.config),
        "num_classes": model.num_classes,
        "inputs": model.inputs.to_dict(),
        "vocab_digest": vocab_digest,
        "params": {name: encode_tensor(model.params[name]) for name in sorted(model.params)},
        "extra": extra or {},
    }


def from_dict(obj: dict) -> tuple[SequenceClassifier, dict]:
    if obj.get("format") != FORMAT:
        raise CheckpointError("not a honeyseq checkpoint")
    if "version" not in obj:
        raise CheckpointError("checkpoint has no version")
    if obj["version"] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {obj['version']}")
    kind = obj["kind"]
    config = TcnConfig(**obj["config"]) if kind == "tcn" else RecurrentConfig(**obj["config"])
    model = SequenceClassifier(kind, config, InputSpec.from_dict(obj["inputs"]), int(obj["num_classes"]))
    model.params = {name: decode_tensor(t) for name, t in obj["params"].items()}
    meta = {"target": obj["target"], "vocab_digest": obj["vocab_digest"], "extra": obj.get("extra", {})}
    return model, meta


def save(path, model: SequenceClassifier, target: str, vocab_digest: str, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(model, target, vocab_digest, extra), fh)


def load(path) -> tuple[SequenceClassifier, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(str(exc)) from None
    return from_dict(obj)
