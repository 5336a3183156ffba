"""TCN, LSTM and GRU next-event classifiers."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from ..features import CATEGORICAL, FEATURES, INTEGER, Scaler
from . import ops
from .tensor import ShapeMismatch, Tensor, parameter

MODEL_KINDS = ("tcn", "lstm", "gru")

_CAT_ROWS = [FEATURES.index(n) for n in CATEGORICAL]
_REAL_ROWS = [i for i, n in enumerate(FEATURES) if n not in CATEGORICAL]


@dataclass(frozen=True)
class TcnConfig:
    num_blocks: int = 2
    num_filters: int = 100
    filter_size: int = 2
    dropout: float = 0.02

    def __post_init__(self):
        if self.num_blocks < 1 or self.num_filters < 1 or self.filter_size < 1:
            raise ValueError("num_blocks, num_filters and filter_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def dilation(self, block: int) -> int:
        """Dilation of 0-based block ``block``."""
        return 2 ** block

    @property
    def receptive_field(self) -> int:
        return 1 + 2 * (self.filter_size - 1) * (2 ** self.num_blocks - 1)


@dataclass(frozen=True)
class RecurrentConfig:
    hidden_size: int = 600
    dropout: float = 0.05

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class InputSpec:
    """How the 17 encoded rows enter a network.

    ``cardinality[name]`` is the vocabulary size of a categorical feature;
    its embedding table has ``size + 2`` rows (missing, values..., OOV).
    """

    cardinality: dict[str, int]
    scaler: Scaler | None = None
    embedding_dim: int = 8

    @property
    def channels(self) -> int:
        return len(CATEGORICAL) * self.embedding_dim + len(_REAL_ROWS)

    def real_rows(self, inputs: np.ndarray) -> np.ndarray:
        reals = inputs[_REAL_ROWS].astype(np.float64, copy=True)
        if self.scaler is not None:
            for name in INTEGER:
                k = _REAL_ROWS.index(FEATURES.index(name))
                reals[k] = (reals[k] - self.scaler.mean[name]) / self.scaler.std[name]
        return reals

    def to_dict(self):
        return {
            "cardinality": dict(self.cardinality),
            "scaler": self.scaler.to_dict() if self.scaler else None,
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_dict(cls, data):
        scaler = Scaler.from_dict(data["scaler"]) if data.get("scaler") else None
        return cls(dict(data["cardinality"]), scaler, int(data["embedding_dim"]))


def _uniform(rng: np.random.Generator, shape, fan_in: int, gain: float) -> np.ndarray:
    bound = gain * np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class SequenceClassifier:
    kind: str
    config: TcnConfig | RecurrentConfig
    inputs: InputSpec
    num_classes: int
    params: dict[str, np.ndarray] = field(default_factory=dict)

    # -- construction ----------------------------------------------------
    @classmethod
    def create(cls, kind: str, config, inputs: InputSpec, num_classes: int, seed: int = 0):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        expected = TcnConfig if kind == "tcn" else RecurrentConfig
        if not isinstance(config, expected):
            raise TypeError(f"{kind} needs a {expected.__name__}")
        model = cls(kind, config, inputs, num_classes)
        model.params = model._init_params(np.random.default_rng(seed))
        return model

    def _init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        p: dict[str, np.ndarray] = {}
        dim = self.inputs.embedding_dim
        for name in CATEGORICAL:
            rows = self.inputs.cardinality[name] + 2
            p[f"embed.{name}"] = rng.uniform(-1.0, 1.0, size=(rows, dim))
        channels = self.inputs.channels
        relu_gain = np.sqrt(2.0)
        if self.kind == "tcn":
            cfg = self.config
            width, k = cfg.num_filters, cfg.filter_size
            c_in = channels
            for blk in range(cfg.num_blocks):
                for layer, fan in ((1, c_in), (2, width)):
                    p[f"block{blk}.conv{layer}.w"] = _uniform(rng, (width, fan, k), fan * k, relu_gain)
                    p[f"block{blk}.conv{layer}.b"] = np.zeros(width)
                    p[f"block{blk}.norm{layer}.gain"] = np.ones(width)
                    p[f"block{blk}.norm{layer}.offset"] = np.zeros(width)
                if c_in != width:
                    p[f"block{blk}.proj.w"] = _uniform(rng, (width, c_in), c_in, 1.0)
                    p[f"block{blk}.proj.b"] = np.zeros(width)
                c_in = width
            head_in = width
        else:
            hidden = self.config.hidden_size
            gates = 4 if self.kind == "lstm" else 3
            p["rnn.w"] = _uniform(rng, (gates * hidden, channels), channels, 1.0)
            p["rnn.u"] = _uniform(rng, (gates * hidden, hidden), hidden, 1.0)
            bias = np.zeros(gates * hidden)
            if self.kind == "lstm":
                bias[hidden:2 * hidden] = 1.0  # forget gate starts open
            p["rnn.b"] = bias
            head_in = hidden
        # small head keeps the initial loss near ln(num_classes)
        p["head.w"] = _uniform(rng, (self.num_classes, head_in), head_in, 0.1)
        p["head.b"] = np.zeros(self.num_classes)
        return p

    def num_parameters(self, prefix: str = "") -> int:
        return sum(v.size for k, v in self.params.items() if k.startswith(prefix))

    # -- forward ---------------------------------------------------------
    def input_layer(self, inputs: np.ndarray, tensors: dict[str, Tensor]) -> Tensor:
        if inputs.ndim != 2 or inputs.shape[0] != len(FEATURES):
            raise ShapeMismatch(f"expected ({len(FEATURES)}, T) inputs, got {inputs.shape}")
        if inputs.shape[1] < 1:
            raise ShapeMismatch("empty sequence")
        tables = [tensors[f"embed.{name}"] for name in CATEGORICAL]
        rows = [inputs[row].astype(np.int64) + 1 for row in _CAT_ROWS]
        return ops.embed_concat(tables, rows, self.inputs.real_rows(inputs))

    def forward(self, inputs: np.ndarray, dropout_key: tuple[int, ...] | None = None,
                tensors: dict[str, Tensor] | None = None) -> Tensor:
        """Per-timestep logits (num_classes, T).

        ``dropout_key`` enables training-mode dropout with masks drawn from
        a counter-based generator keyed by ``dropout_key + (layer,)``.
        """
        if tensors is None:
            tensors = {k: Tensor(v) for k, v in self.params.items()}
        layer = itertools.count()

        def rng():
            if dropout_key is None:
                return None
            key = np.random.SeedSequence([*dropout_key, next(layer)])
            return np.random.Generator(np.random.Philox(key))

        x = self.input_layer(inputs, tensors)
        if self.kind == "tcn":
            cfg = self.config
            for blk in range(cfg.num_blocks):
                d = cfg.dilation(blk)
                h = x
                for layer_no in (1, 2):
                    pre = f"block{blk}"
                    h = ops.causal_conv(h, tensors[f"{pre}.conv{layer_no}.w"], tensors[f"{pre}.conv{layer_no}.b"], d)
                    h = ops.layer_norm(h, tensors[f"{pre}.norm{layer_no}.gain"], tensors[f"{pre}.norm{layer_no}.offset"])
                    h = ops.relu(h)
                    h = ops.dropout(h, cfg.dropout, rng())
                if f"block{blk}.proj.w" in tensors:
                    skip = ops.linear(x, tensors[f"block{blk}.proj.w"], tensors[f"block{blk}.proj.b"])
                else:
                    skip = x
                x = ops.relu(ops.add(skip, h))
        else:
            cell = ops.lstm if self.kind == "lstm" else ops.gru
            x = cell(x, tensors["rnn.w"], tensors["rnn.u"], tensors["rnn.b"])
            x = ops.dropout(x, self.config.dropout, rng())
        return ops.linear(x, tensors["head.w"], tensors["head.b"])

    def logits(self, inputs: np.ndarray) -> np.ndarray:
        return self.forward(inputs).data

    def describe(self) -> dict:
        return {"kind": self.kind, "config": asdict(self.config), "num_classes": self.num_classes}


def residual_block_forward(x: np.ndarray, params: dict[str, np.ndarray], dilation: int,
                           dropout: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Standalone residual block on arrays.

    ``params`` holds ``conv{1,2}.w/.b``, ``norm{1,2}.gain/.offset`` and,
    when channel counts differ, ``proj.w/.b``.  ``rng=None`` is eval mode.
    """
    t = {k: Tensor(v) for k, v in params.items()}
    xt = Tensor(x)
    h = xt
    for n in (1, 2):
        h = ops.causal_conv(h, t[f"conv{n}.w"], t[f"conv{n}.b"], dilation)
        h = ops.layer_norm(h, t[f"norm{n}.gain"], t[f"norm{n}.offset"])
        h = ops.dropout(ops.relu(h), dropout, rng)
    skip = ops.linear(xt, t["proj.w"], t["proj.b"]) if "proj.w" in t else xt
    if skip.shape != h.shape:
        raise ShapeMismatch(f"residual: skip {skip.shape} vs branch {h.shape}")
    return ops.relu(ops.add(skip, h)).data


def tcn_forward(inputs: np.ndarray, config: TcnConfig, model: SequenceClassifier) -> np.ndarray:
    if model.kind != "tcn" or model.config != config:
        raise ShapeMismatch("model is not a TCN with this configuration")
    return model.logits(inputs)


def predict_next(model: SequenceClassifier, prefix: np.ndarray) -> np.ndarray:
    """Class distribution for the event following the last column of ``prefix``."""
    if prefix.ndim != 2 or prefix.shape[1] < 1:
        raise ShapeMismatch("prefix must be (17, L) with L >= 1")
    return ops.softmax_array(model.logits(prefix)[:, -1:])[:, 0]


def param_tensors(model: SequenceClassifier) -> dict[str, Tensor]:
    return {k: parameter(v) for k, v in model.params.items()}
