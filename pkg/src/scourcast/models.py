"""The six forecast architectures and their nomenclature strings.

LSTM families: ``ss`` (single-shot), ``ss2`` (two stacked layers),
``fb`` (feedback, autoregressive over the forecast window). CNN
families: ``vcn`` (vanilla), ``fcn`` (padded + batch norm), ``dcn``
(causal with dilations 1 then 2). Config strings follow
``fam-(w_in,w_out)-units-dropout`` for LSTMs and
``fam-k1-F1-k2-F2-dropout`` for CNNs, e.g. ``ss-(336,168)-128-0`` or
``fcn-5-64-7-64-0``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConfigMismatch,
    ConfigSyntaxError,
    FilterTooLong,
    NonPositiveDimension,
    UnknownFamily,
)
from .nn import autograd as ag
from .nn.autograd import Tensor
from .nn.layers import (
    BatchNorm,
    CAUSAL,
    Conv1d,
    Dense,
    LSTMCell,
    PADDED,
    Parameter,
    VANILLA,
    dilated_causal,
    dropout,
)
from .rng import seed_stream

LSTM_FAMILIES = ("ss", "ss2", "fb")
CNN_FAMILIES = ("vcn", "dcn", "fcn")


@dataclass(frozen=True)
class ModelConfig:
    """Parsed form of one nomenclature string.

    LSTM families carry (w_in, w_out, units); CNN families carry the
    two filter specs and get their windows bound at build time.
    """

    family: str
    w_in: int | None = None
    w_out: int | None = None
    units: int | None = None
    k1: int | None = None
    f1: int | None = None
    k2: int | None = None
    f2: int | None = None
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in LSTM_FAMILIES + CNN_FAMILIES:
            raise UnknownFamily(f"unknown model family {self.family!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigSyntaxError(f"dropout {self.dropout} outside [0, 1)")
        if self.is_lstm:
            needed = {"w_in": self.w_in, "w_out": self.w_out, "units": self.units}
            extra = (self.k1, self.f1, self.k2, self.f2)
        else:
            needed = {"k1": self.k1, "f1": self.f1, "k2": self.k2, "f2": self.f2}
            extra = (self.units,)
        for field_name, value in needed.items():
            if value is None:
                raise ConfigSyntaxError(f"{self.family} config needs {field_name}")
            if value <= 0:
                raise NonPositiveDimension(f"{field_name} must be positive, got {value}")
        if any(v is not None for v in extra):
            raise ConfigSyntaxError(f"{self.family} config carries foreign fields")
        for win in (self.w_in, self.w_out):
            if win is not None and win <= 0:
                raise NonPositiveDimension(f"window sizes must be positive, got {win}")

    @property
    def is_lstm(self) -> bool:
        return self.family in LSTM_FAMILIES

    def with_windows(self, w_in: int, w_out: int) -> "ModelConfig":
        """Bind forecast windows (CNN configs leave them to bind time)."""
        return replace(self, w_in=w_in, w_out=w_out)


_LSTM_RE = re.compile(r"^(ss2|ss|fb)-\((\d+),(\d+)\)-(\d+)-(\d+(?:\.\d+)?)$")
_CNN_RE = re.compile(r"^(vcn|dcn|fcn)-(\d+)-(\d+)-(\d+)-(\d+)-(\d+(?:\.\d+)?)$")


def parse_config(text: str) -> ModelConfig:
    """Parse a nomenclature string into a ModelConfig."""
    text = text.strip()
    m = _LSTM_RE.match(text)
    if m:
        fam, w_in, w_out, units, drop = m.groups()
        return ModelConfig(family=fam, w_in=int(w_in), w_out=int(w_out),
                           units=int(units), dropout=float(drop))
    m = _CNN_RE.match(text)
    if m:
        fam, k1, f1, k2, f2, drop = m.groups()
        return ModelConfig(family=fam, k1=int(k1), f1=int(f1),
                           k2=int(k2), f2=int(f2), dropout=float(drop))
    head = text.split("-", 1)[0]
    if head not in LSTM_FAMILIES + CNN_FAMILIES:
        raise UnknownFamily(f"unknown model family {head!r} in {text!r}")
    raise ConfigSyntaxError(f"cannot parse model configuration {text!r}")


def format_config(cfg: ModelConfig) -> str:
    """Canonical nomenclature string (dropout 0.0 prints as 0)."""
    drop = format(cfg.dropout, "g")
    if cfg.is_lstm:
        return f"{cfg.family}-({cfg.w_in},{cfg.w_out})-{cfg.units}-{drop}"
    return f"{cfg.family}-{cfg.k1}-{cfg.f1}-{cfg.k2}-{cfg.f2}-{drop}"


def _target_positions(n_in: int, n_target: int,
                      positions: Sequence[int | None] | None) -> list[int | None]:
    """Map each input column to the target column it mirrors, if any."""
    if positions is not None:
        if len(positions) != n_in:
            raise ConfigMismatch("target position map must cover every input channel")
        return list(positions)
    return [j if j < n_target else None for j in range(n_in)]


class SingleShotLSTM:
    """One or two LSTM layers, final state to a dense head, all steps at once."""

    def __init__(self, cfg: ModelConfig, n_in: int, n_target: int, seed: int,
                 target_positions: Sequence[int | None] | None = None):
        if cfg.family not in ("ss", "ss2"):
            raise ConfigMismatch(f"single-shot builder got family {cfg.family!r}")
        self.cfg = cfg
        self.n_in = n_in
        self.n_target = n_target
        rng = seed_stream(seed, "init", format_config(cfg))
        self.cells = [LSTMCell(n_in, cfg.units, rng, name="lstm0")]
        if cfg.family == "ss2":
            self.cells.append(LSTMCell(cfg.units, cfg.units, rng, name="lstm1"))
        self.head = Dense(cfg.units, cfg.w_out * n_target, rng, name="head")

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for cell in self.cells:
            out.extend(cell.parameters())
        out.extend(self.head.parameters())
        return out

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        """x [batch, w_in, n_in] -> predictions [batch, w_out, n_target]."""
        B, T, n = x.shape
        if n != self.n_in:
            raise ConfigMismatch(f"model expects {self.n_in} input channels, got {n}")
        u = self.cfg.units
        gates = [cell.gate_tensors() for cell in self.cells]
        a = [ag.constant(np.zeros((B, u))) for _ in self.cells]
        c = [ag.constant(np.zeros((B, u))) for _ in self.cells]
        for t in range(T):
            inp = ag.constant(x[:, t, :])
            for li, cell in enumerate(self.cells):
                a[li], c[li] = cell.step(inp, a[li], c[li], gates[li])
                inp = a[li]
        hidden = dropout(a[-1], self.cfg.dropout, train, rng)
        flat = self.head(hidden)
        return ag.reshape(flat, (B, self.cfg.w_out, self.n_target))


class FeedbackLSTM:
    """Autoregressive LSTM: each predicted step becomes the next input.

    During rollout, predicted values fill the input columns that mirror
    a target channel; the remaining input columns repeat their last
    observed value.
    """

    def __init__(self, cfg: ModelConfig, n_in: int, n_target: int, seed: int,
                 target_positions: Sequence[int | None] | None = None):
        if cfg.family != "fb":
            raise ConfigMismatch(f"feedback builder got family {cfg.family!r}")
        self.cfg = cfg
        self.n_in = n_in
        self.n_target = n_target
        self.positions = _target_positions(n_in, n_target, target_positions)
        if all(p is None for p in self.positions):
            raise ConfigMismatch("feedback rollout needs >= 1 input channel tied to a target")
        rng = seed_stream(seed, "init", format_config(cfg))
        self.cell = LSTMCell(n_in, cfg.units, rng, name="lstm0")
        self.head = Dense(cfg.units, n_target, rng, name="head")

    def parameters(self) -> list[Parameter]:
        return self.cell.parameters() + self.head.parameters()

    def _next_input(self, y: Tensor, last_observed: np.ndarray) -> Tensor:
        cols: list[Tensor] = []
        for j, pos in enumerate(self.positions):
            if pos is None:
                cols.append(ag.constant(last_observed[:, j:j + 1]))
            else:
                cols.append(ag.narrow(y, 1, pos, 1))
        return ag.concat(cols, axis=1)

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        B, T, n = x.shape
        if n != self.n_in:
            raise ConfigMismatch(f"model expects {self.n_in} input channels, got {n}")
        u = self.cfg.units
        gates = self.cell.gate_tensors()
        a = ag.constant(np.zeros((B, u)))
        c = ag.constant(np.zeros((B, u)))
        for t in range(T):
            a, c = self.cell.step(ag.constant(x[:, t, :]), a, c, gates)
        last_observed = x[:, -1, :]
        steps: list[Tensor] = []
        y = self.head(dropout(a, self.cfg.dropout, train, rng))
        steps.append(ag.reshape(y, (B, 1, self.n_target)))
        for _ in range(1, self.cfg.w_out):
            a, c = self.cell.step(self._next_input(y, last_observed), a, c, gates)
            y = self.head(dropout(a, self.cfg.dropout, train, rng))
            steps.append(ag.reshape(y, (B, 1, self.n_target)))
        return ag.concat(steps, axis=1) if len(steps) > 1 else steps[0]


class ConvForecaster:
    """Two convolution blocks, then flatten, dropout and a dense head.

    vcn: vanilla conv + ReLU per block. fcn: padded conv + batch norm +
    ReLU, so sequence length never shrinks. dcn: causal convs with
    dilations 1 then 2, each with batch norm + ReLU.
    """

    def __init__(self, cfg: ModelConfig, n_in: int, n_target: int, seed: int,
                 target_positions: Sequence[int | None] | None = None):
        if cfg.family not in CNN_FAMILIES:
            raise ConfigMismatch(f"CNN builder got family {cfg.family!r}")
        if cfg.w_in is None or cfg.w_out is None:
            raise ConfigMismatch("CNN configs need windows bound before building")
        self.cfg = cfg
        self.n_in = n_in
        self.n_target = n_target
        rng = seed_stream(seed, "init", format_config(cfg))

        if cfg.family == "vcn":
            modes = (VANILLA, VANILLA)
            self.norms: list[BatchNorm] | None = None
            l1 = cfg.w_in - cfg.k1 + 1
            l2 = l1 - cfg.k2 + 1
            if l2 < 1:
                raise FilterTooLong(
                    f"vcn needs w_in >= k1 + k2 - 1 = {cfg.k1 + cfg.k2 - 1}, got {cfg.w_in}")
        elif cfg.family == "fcn":
            modes = (PADDED, PADDED)
            self.norms = [BatchNorm(cfg.f1, "bn1"), BatchNorm(cfg.f2, "bn2")]
            l2 = cfg.w_in
        else:
            modes = (CAUSAL, dilated_causal(2))
            self.norms = [BatchNorm(cfg.f1, "bn1"), BatchNorm(cfg.f2, "bn2")]
            l2 = cfg.w_in
        self.conv1 = Conv1d(n_in, cfg.f1, cfg.k1, modes[0], rng, name="conv1")
        self.conv2 = Conv1d(cfg.f1, cfg.f2, cfg.k2, modes[1], rng, name="conv2")
        self.flat_len = l2 * cfg.f2
        self.head = Dense(self.flat_len, cfg.w_out * n_target, rng, name="head")

    def parameters(self) -> list[Parameter]:
        out = self.conv1.parameters() + self.conv2.parameters()
        if self.norms:
            for bn in self.norms:
                out.extend(bn.parameters())
        out.extend(self.head.parameters())
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        if self.norms:
            for bn in self.norms:
                state.update(bn.buffers())
        return state

    def load_buffers(self, state: dict[str, np.ndarray]) -> None:
        if self.norms:
            for bn in self.norms:
                bn.load_buffers(state)

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        B, T, n = x.shape
        if n != self.n_in or T != self.cfg.w_in:
            raise ConfigMismatch(
                f"model expects [*, {self.cfg.w_in}, {self.n_in}], got [*, {T}, {n}]")
        h = self.conv1(ag.constant(x))
        if self.norms:
            h = self.norms[0](h, train)
        h = ag.relu(h)
        h = self.conv2(h)
        if self.norms:
            h = self.norms[1](h, train)
        h = ag.relu(h)
        flat = ag.reshape(h, (B, self.flat_len))
        flat = dropout(flat, self.cfg.dropout, train, rng)
        out = self.head(flat)
        return ag.reshape(out, (B, self.cfg.w_out, self.n_target))


ForecastModel = SingleShotLSTM | FeedbackLSTM | ConvForecaster


def build_model(cfg: ModelConfig, n_in: int, n_target: int, seed: int,
                target_positions: Sequence[int | None] | None = None) -> ForecastModel:
    """Instantiate the architecture a config names."""
    if cfg.family in ("ss", "ss2"):
        return SingleShotLSTM(cfg, n_in, n_target, seed, target_positions)
    if cfg.family == "fb":
        return FeedbackLSTM(cfg, n_in, n_target, seed, target_positions)
    return ConvForecaster(cfg, n_in, n_target, seed, target_positions)


def state_dict(model: ForecastModel) -> dict[str, np.ndarray]:
    """Named parameter (and buffer) arrays for checkpointing."""
    state = {p.name: p.data.copy() for p in model.parameters()}
    if hasattr(model, "buffers"):
        state.update({k: v.copy() for k, v in model.buffers().items()})
    return state


def load_state_dict(model: ForecastModel, state: dict[str, np.ndarray]) -> None:
    for p in model.parameters():
        if p.name not in state:
            raise KeyError(f"checkpoint lacks parameter {p.name}")
        src = np.asarray(state[p.name], dtype=np.float64)
        if src.shape != p.data.shape:
            raise ConfigMismatch(
                f"checkpoint {p.name} shape {src.shape} != model {p.data.shape}")
        p.data[...] = src
    if hasattr(model, "load_buffers"):
        model.load_buffers(state)
