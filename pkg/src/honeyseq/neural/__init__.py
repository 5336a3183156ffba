from .models import (
    MODEL_KINDS,
    InputSpec,
    RecurrentConfig,
    SequenceClassifier,
    TcnConfig,
    predict_next,
    residual_block_forward,
    tcn_forward,
)
from .ops import causal_conv_array as causal_dilated_conv
from .ops import gru_step, lstm_step
from .tensor import NonFinite, ShapeMismatch, Tensor
from .train import Adam, History, TrainConfig, accuracy, clip_gradients, loss_and_grad, train

__all__ = [
    "MODEL_KINDS", "InputSpec", "RecurrentConfig", "SequenceClassifier", "TcnConfig",
    "predict_next", "residual_block_forward", "tcn_forward", "causal_dilated_conv",
    "gru_step", "lstm_step", "NonFinite", "ShapeMismatch", "Tensor", "Adam", "History",
    "TrainConfig", "accuracy", "clip_gradients", "loss_and_grad", "train",
]
