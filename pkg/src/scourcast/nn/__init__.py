"""Reverse-mode differentiable operator set for the forecast models."""

from .autograd import (
    Tensor,
    conv1d,
    constant,
    mae_metric,
    mse_loss,
)
from .gradcheck import gradient_check
from .layers import (
    BatchNorm,
    CAUSAL,
    Conv1d,
    ConvMode,
    Dense,
    LSTMCell,
    PADDED,
    Parameter,
    VANILLA,
    conv_output_length,
    dilated_causal,
    dropout,
    lstm_cell_step,
)
from .optim import Adam, adam_step

__all__ = [
    "Adam",
    "BatchNorm",
    "CAUSAL",
    "Conv1d",
    "ConvMode",
    "Dense",
    "LSTMCell",
    "PADDED",
    "Parameter",
    "Tensor",
    "VANILLA",
    "adam_step",
    "constant",
    "conv1d",
    "conv_output_length",
    "dilated_causal",
    "dropout",
    "gradient_check",
    "lstm_cell_step",
    "mae_metric",
    "mse_loss",
]
