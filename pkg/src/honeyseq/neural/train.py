"""Loss, gradients, Adam and the epoch loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..features import TARGETS, EncodedSequence
from . import ops
from .models import SequenceClassifier, param_tensors
from .tensor import NonFinite

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 30
    minibatch_size: int = 1
    initial_lr: float = 0.001
    lr_drop_factor: float = 0.1
    lr_drop_period: int = 12
    gradient_threshold: float = 1.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle: bool = True

    def learning_rate(self, epoch: int) -> float:
        """Rate for 0-based ``epoch``: dropped by the factor every period."""
        return self.initial_lr * self.lr_drop_factor ** (epoch // self.lr_drop_period)


def loss_and_grad(model: SequenceClassifier, inputs: np.ndarray, targets: np.ndarray,
                  threshold: float | None = None, dropout_key: tuple[int, ...] | None = None,
                  check: bool = True):
    """Mean per-timestep cross-entropy and its gradient for every parameter.

    With ``check=False`` the per-parameter finiteness scan is skipped; the
    caller is then responsible for checking the gradient.
    """
    tensors = param_tensors(model)
    logits = model.forward(inputs, dropout_key=dropout_key, tensors=tensors)
    loss = ops.softmax_cross_entropy(logits, targets)
    if not np.isfinite(loss.data):
        raise NonFinite(f"loss is {float(loss.data)}")
    loss.backward()
    grads = {}
    for name, t in tensors.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if check and not np.all(np.isfinite(g)):
            raise NonFinite(f"gradient of {name} is not finite")
        grads[name] = g
    if threshold is not None:
        clip_gradients(grads, threshold)
    return float(loss.data), grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], threshold: float) -> float:
    """Rescale in place so the global L2 norm is at most ``threshold``."""
    norm = global_norm(grads)
    if norm > threshold:
        factor = threshold / norm
        for g in grads.values():
            g *= factor
    return norm


class Adam:
    """Adam over one contiguous buffer.

    On construction every array in ``params`` is copied into a flat buffer
    and the dict entries are rebound to views of it, so a step is a handful
    of whole-buffer numpy operations.
    """

    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = params
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.names = list(params)
        self.flat = np.concatenate([np.asarray(params[k], dtype=np.float64).ravel() for k in self.names])
        self.slices = {}
        start = 0
        for k in self.names:
            shape = np.shape(params[k])
            stop = start + int(np.prod(shape, dtype=np.int64))
            self.slices[k] = slice(start, stop)
            params[k] = self.flat[start:stop].reshape(shape)
            start = stop
        self.m = np.zeros_like(self.flat)
        self.v = np.zeros_like(self.flat)
        self._tmp = np.empty_like(self.flat)
        self.t = 0

    def flatten(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[k].ravel() for k in self.names])

    def step(self, grads, lr: float) -> None:
        """Apply one update; ``grads`` is a dict or an already flattened array."""
        g = grads if isinstance(grads, np.ndarray) else self.flatten(grads)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        step = lr * np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        eps_hat = self.epsilon * np.sqrt(1.0 - b2 ** self.t)
        m, v, tmp = self.m, self.v, self._tmp
        m *= b1
        np.multiply(g, 1.0 - b1, out=tmp)
        m += tmp
        v *= b2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v += tmp
        np.sqrt(v, out=tmp)
        tmp += eps_hat
        np.divide(m, tmp, out=tmp)
        tmp *= step
        self.flat -= tmp


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    eval_accuracy: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)

    def to_dict(self):
        return {"train_loss": self.train_loss, "eval_accuracy": self.eval_accuracy,
                "learning_rate": self.learning_rate}


def _target_row(target: str) -> int:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    return TARGETS.index(target)


def predictions(model: SequenceClassifier, seq: EncodedSequence) -> np.ndarray:
    return model.logits(seq.inputs).argmax(axis=0)


def accuracy(model: SequenceClassifier, sequences: Sequence[EncodedSequence], target: str) -> float:
    """Fraction of predicted time steps whose argmax matches the next-event label."""
    k = _target_row(target)
    correct = total = 0
    for seq in sequences:
        correct += int((predictions(model, seq) == seq.targets[k]).sum())
        total += seq.steps
    return correct / total if total else float("nan")


def train(model: SequenceClassifier, target: str, sequences: Sequence[EncodedSequence],
          config: TrainConfig = TrainConfig(), eval_sequences: Sequence[EncodedSequence] | None = None,
          ) -> History:
    """Fit ``model`` in place on one target; deterministic given ``config.seed``."""
    if not sequences:
        raise ValueError("empty training set")
    k = _target_row(target)
    opt = Adam(model.params, config.beta1, config.beta2, config.epsilon)
    history = History()
    n = len(sequences)
    for epoch in range(config.max_epochs):
        lr = config.learning_rate(epoch)
        if config.shuffle:
            order = np.random.default_rng([config.seed, epoch]).permutation(n)
        else:
            order = np.arange(n)
        losses = []
        for start in range(0, n, config.minibatch_size):
            batch = order[start:start + config.minibatch_size]
            total = None
            for idx in batch:
                seq = sequences[idx]
                key = (config.seed, epoch, int(idx))
                try:
                    loss, grads = loss_and_grad(model, seq.inputs, seq.targets[k], None, key, check=False)
                except NonFinite as exc:
                    raise NonFinite(f"epoch {epoch}, sequence {seq.sessionid or idx}: {exc}") from None
                losses.append(loss)
                flat = opt.flatten(grads)
                total = flat if total is None else total + flat
            if len(batch) > 1:
                total /= len(batch)
            norm = float(np.sqrt(np.dot(total, total)))
            if not np.isfinite(norm):
                ids = ", ".join(sequences[i].sessionid or str(i) for i in batch)
                raise NonFinite(f"epoch {epoch}, sequence {ids}: non-finite gradient")
            if norm > config.gradient_threshold:
                total *= config.gradient_threshold / norm
            opt.step(total, lr)
        history.train_loss.append(float(np.mean(losses)))
        history.learning_rate.append(lr)
        if eval_sequences:
            history.eval_accuracy.append(accuracy(model, eval_sequences, target))
        log.debug("epoch %d lr %.0e loss %.4f", epoch, lr, history.train_loss[-1])
    return history
