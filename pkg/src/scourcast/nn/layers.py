"""Trainable layers: dense, LSTM cell, 1-D convolutions, batch norm, dropout.

Layers own named Parameters and build autograd graphs when called. All
state is float64; initialization draws from a caller-supplied Generator
so runs are reproducible end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import BadRate, BadStride, DegenerateBatch, FilterTooLong, ShapeMismatch
from . import autograd as ag
from .autograd import Tensor

BN_EPS = 1e-8
BN_MOMENTUM = 0.9


class Parameter(Tensor):
    """Leaf tensor with a name and adaptive-moment optimizer state."""

    __slots__ = ("name", "m", "v")

    def __init__(self, name: str, data: np.ndarray):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.data.shape})"


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> np.ndarray:
    r = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


class Dense:
    """Affine map x @ W.T + b with weight [n_out, n_in]."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 name: str = "dense"):
        self.weight = Parameter(f"{name}.weight",
                                glorot_uniform(rng, (n_out, n_in), n_in, n_out))
        self.bias = Parameter(f"{name}.bias", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ag.linear(x, self.weight, self.bias)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class LSTMCell:
    """One recurrent memory cell over the concatenation [a_prev, x_t].

    Gate weights are [units, units + n_x]; the forget-gate bias starts
    at one so long sequences keep their memory early in training.
    """

    def __init__(self, n_x: int, units: int, rng: np.random.Generator,
                 name: str = "lstm"):
        if units <= 0:
            raise ValueError("units must be positive")
        self.n_x = n_x
        self.units = units
        r = 1.0 / math.sqrt(units)
        shape = (units, units + n_x)

        def w(gate: str) -> Parameter:
            return Parameter(f"{name}.w_{gate}", rng.uniform(-r, r, size=shape))

        self.w_f, self.w_i, self.w_o, self.w_c = w("f"), w("i"), w("o"), w("c")
        self.b_f = Parameter(f"{name}.b_f", np.ones(units))
        self.b_i = Parameter(f"{name}.b_i", np.zeros(units))
        self.b_o = Parameter(f"{name}.b_o", np.zeros(units))
        self.b_c = Parameter(f"{name}.b_c", np.zeros(units))

    def parameters(self) -> list[Parameter]:
        return [self.w_f, self.w_i, self.w_o, self.w_c,
                self.b_f, self.b_i, self.b_o, self.b_c]

    def gate_tensors(self) -> tuple[Tensor, Tensor]:
        """Stack the four gates so a step needs one matrix product."""
        w_all = ag.concat([self.w_f, self.w_i, self.w_o, self.w_c], axis=0)
        b_all = ag.concat([self.b_f, self.b_i, self.b_o, self.b_c], axis=0)
        return w_all, b_all

    def step(self, x_t: Tensor, a_prev: Tensor, c_prev: Tensor,
             gates: tuple[Tensor, Tensor] | None = None) -> tuple[Tensor, Tensor]:
        """Advance one timestep; returns (a_t, c_t)."""
        if x_t.shape[-1] != self.n_x:
            raise ShapeMismatch(f"LSTM expects {self.n_x} input features, got {x_t.shape[-1]}")
        if a_prev.shape[-1] != self.units or c_prev.shape[-1] != self.units:
            raise ShapeMismatch("hidden/cell state width disagrees with units")
        w_all, b_all = self.gate_tensors() if gates is None else gates
        u = self.units
        z = ag.linear(ag.concat([a_prev, x_t], axis=1), w_all, b_all)
        gamma_f = ag.sigmoid(ag.narrow(z, 1, 0, u))
        gamma_i = ag.sigmoid(ag.narrow(z, 1, u, u))
        gamma_o = ag.sigmoid(ag.narrow(z, 1, 2 * u, u))
        c_tilde = ag.tanh(ag.narrow(z, 1, 3 * u, u))
        c_t = ag.add(ag.mul(gamma_i, c_tilde), ag.mul(gamma_f, c_prev))
        a_t = ag.mul(gamma_o, ag.tanh(c_t))
        return a_t, c_t


def lstm_cell_step(x_t: Tensor, a_prev: Tensor, c_prev: Tensor,
                   cell: LSTMCell) -> tuple[Tensor, Tensor]:
    """Functional form of one LSTM step (unit-test surface)."""
    return cell.step(x_t, a_prev, c_prev)


# --- convolution modes ----------------------------------------------------------

@dataclass(frozen=True)
class ConvMode:
    """Boundary/tap-spacing scheme for temporal convolution."""

    kind: str            # vanilla | padded | causal | dilated_causal
    dilation: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("vanilla", "padded", "causal", "dilated_causal"):
            raise ValueError(f"unknown convolution kind {self.kind!r}")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        if self.kind != "dilated_causal" and self.dilation != 1:
            raise ValueError("only dilated_causal convolutions take a dilation")

    def padding(self, k: int) -> tuple[int, int]:
        """(left, right) zero padding for filter length k."""
        if self.kind == "vanilla":
            return 0, 0
        if self.kind == "padded":
            return (k - 1 + 1) // 2, (k - 1) // 2
        if self.kind == "causal":
            return k - 1, 0
        return (k - 1) * self.dilation, 0

    @property
    def is_causal(self) -> bool:
        return self.kind in ("causal", "dilated_causal")


VANILLA = ConvMode("vanilla")
PADDED = ConvMode("padded")
CAUSAL = ConvMode("causal")


def dilated_causal(d: int) -> ConvMode:
    return ConvMode("dilated_causal", d)


def conv_output_length(l: int, k: int, mode: ConvMode, stride: int = 1) -> int:
    left, right = mode.padding(k)
    span = (k - 1) * mode.dilation + 1
    return (l + left + right - span) // stride + 1


class Conv1d:
    """Temporal convolution layer with filters [n_filters, k, n_in]."""

    def __init__(self, n_in: int, n_filters: int, k: int, mode: ConvMode,
                 rng: np.random.Generator, name: str = "conv", stride: int = 1):
        if stride < 1 or (stride != 1 and mode.kind != "vanilla"):
            raise BadStride(f"stride {stride} unsupported for {mode.kind} convolution")
        self.k = k
        self.mode = mode
        self.stride = stride
        fan_in, fan_out = n_in * k, n_filters * k
        self.filters = Parameter(f"{name}.filters",
                                 glorot_uniform(rng, (n_filters, k, n_in), fan_in, fan_out))
        self.bias = Parameter(f"{name}.bias", np.zeros(n_filters))

    def __call__(self, x: Tensor) -> Tensor:
        l = x.shape[1]
        if self.mode.kind == "vanilla" and self.k > l:
            raise FilterTooLong(f"filter length {self.k} > sequence length {l}")
        left, right = self.mode.padding(self.k)
        return ag.conv1d(x, self.filters, self.bias, left, right,
                         self.mode.dilation, self.stride)

    def parameters(self) -> list[Parameter]:
        return [self.filters, self.bias]


class BatchNorm:
    """Per-feature normalization over batch and time for [B, l, F] input.

    Train mode normalizes with batch statistics and updates the running
    estimates (momentum 0.9); infer mode applies the running estimates.
    """

    def __init__(self, n_features: int, name: str = "bn"):
        self.gamma = Parameter(f"{name}.gamma", np.ones(n_features))
        self.beta = Parameter(f"{name}.beta", np.zeros(n_features))
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)
        self.name = name

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        if x.data.ndim != 3:
            raise ShapeMismatch("batch norm expects [batch, time, features]")
        if train:
            if x.data.shape[0] * x.data.shape[1] == 1:
                raise DegenerateBatch("cannot estimate variance from one value")
            mu = ag.mean_axes(x, (0, 1))
            centered = ag.sub(x, mu)
            var = ag.mean_axes(ag.square(centered), (0, 1))
            inv = ag.div(centered, ag.sqrt(ag.add(var, ag.constant(BN_EPS))))
            self.running_mean = (BN_MOMENTUM * self.running_mean
                                 + (1 - BN_MOMENTUM) * mu.data.reshape(-1))
            self.running_var = (BN_MOMENTUM * self.running_var
                                + (1 - BN_MOMENTUM) * var.data.reshape(-1))
        else:
            centered = ag.sub(x, ag.constant(self.running_mean))
            inv = ag.scale(centered, 1.0 / np.sqrt(self.running_var + BN_EPS))
        return ag.add(ag.mul(inv, self.gamma), self.beta)

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def load_buffers(self, state: dict[str, np.ndarray]) -> None:
        self.running_mean = np.array(state[f"{self.name}.running_mean"])
        self.running_var = np.array(state[f"{self.name}.running_var"])


def dropout(x: Tensor, rate: float, train: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, rescale survivors.

    Identity at rate 0 or in infer mode. When no generator is supplied
    in train mode the mask draws fresh OS entropy, which deliberately
    breaks determinism (gradient checking rejects such graphs).
    """
    if not 0.0 <= rate < 1.0:
        raise BadRate(f"dropout rate {rate} outside [0, 1)")
    if not train or rate == 0.0:
        return x
    gen = rng if rng is not None else np.random.default_rng()
    mask = (gen.random(x.shape) >= rate) / (1.0 - rate)
    return ag.scale(x, mask)
