"""Training loops, evaluation, and sequential fold fine-tuning.

Training minimizes the MSE over the target channels (or Sonar alone via
``loss_mask="metric"``) in shuffled batches of 32, early-stopping on
validation MAE of the metric channel. Errors are reported in the
sensors' native feet with meters alongside (m = 0.3048 * ft exactly).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DivergedLoss, FoldTooSmall
from .frames import (
    FT_PER_M,
    Channel,
    NormalizationStats,
    SplitSpec,
    TimeSeriesFrame,
    WindowedDataset,
    chronological_split,
    fit_normalization,
    make_windows,
)
from .models import ForecastModel, ModelConfig, build_model, format_config, load_state_dict, state_dict
from .nn import autograd as ag
from .nn.optim import Adam
from .rng import seed_stream

CHECKPOINT_SCHEMA = "scourcast.checkpoint.v1"


def ft_to_m(value_ft: float) -> float:
    return value_ft * FT_PER_M


@dataclass
class TrainBudget:
    """Optimization budget; defaults bound desk-scale runtime."""

    max_epochs: int = 200
    patience: int = 15
    batch_size: int = 32
    lr: float = 1e-3


@dataclass
class TrainReport:
    """Per-epoch trajectory plus the final hold-out errors."""

    config: str
    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)      # ft, metric channel
    best_epoch: int = -1                                    # 0-based index
    wall_time_s: float = 0.0                                # volatile, not compared
    val_mae_ft: float = math.nan
    test_mae_ft: float = math.nan
    final_test_mae_ft: float = math.nan

    @property
    def val_mae_m(self) -> float:
        return ft_to_m(self.val_mae_ft)

    @property
    def test_mae_m(self) -> float:
        return ft_to_m(self.test_mae_ft)

    @property
    def final_test_mae_m(self) -> float:
        return ft_to_m(self.final_test_mae_ft)

    def to_dict(self) -> dict:
        return {
            "schema": "scourcast.train-report.v1",
            "config": self.config,
            "train_loss": self.train_loss,
            "val_mae_ft": self.val_mae,
            "best_epoch": self.best_epoch,
            "wall_time_s": self.wall_time_s,
            "final": {
                "val_mae_ft": self.val_mae_ft, "val_mae_m": self.val_mae_m,
                "test_mae_ft": self.test_mae_ft, "test_mae_m": self.test_mae_m,
                "final_test_mae_ft": self.final_test_mae_ft,
                "final_test_mae_m": self.final_test_mae_m,
            },
        }


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained model and denormalize it."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    input_channels: tuple[Channel, ...]
    target_channels: tuple[Channel, ...]
    metric_channel: Channel
    norm_stats: NormalizationStats | None

    def build(self) -> ForecastModel:
        model = build_model(self.config, len(self.input_channels),
                            len(self.target_channels), seed=0,
                            target_positions=target_position_map(
                                self.input_channels, self.target_channels))
        load_state_dict(model, self.params)
        return model

    def save(self, path: str | Path) -> None:
        stats = self.norm_stats
        payload = {
            "schema": CHECKPOINT_SCHEMA,
            "config": format_config(self.config),
            "w_in": self.config.w_in,
            "w_out": self.config.w_out,
            "input_channels": [ch.name for ch in self.input_channels],
            "target_channels": [ch.name for ch in self.target_channels],
            "metric_channel": self.metric_channel.name,
            "norm": None if stats is None else {
                ch.name: [stats.mean[ch], stats.std[ch]] for ch in stats.mean},
            "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                       for k, v in self.params.items()},
        }
        Path(path).write_text(json.dumps(payload))

    @staticmethod
    def load(path: str | Path) -> "Checkpoint":
        payload = json.loads(Path(path).read_text())
        if payload.get("schema") != CHECKPOINT_SCHEMA:
            raise ValueError(f"unsupported checkpoint schema {payload.get('schema')!r}")
        from .models import parse_config
        cfg = parse_config(payload["config"])
        if cfg.w_in is None:
            cfg = cfg.with_windows(payload["w_in"], payload["w_out"])
        params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                  for k, v in payload["params"].items()}
        norm = None
        if payload["norm"] is not None:
            mean = {Channel[name]: ms[0] for name, ms in payload["norm"].items()}
            std = {Channel[name]: ms[1] for name, ms in payload["norm"].items()}
            norm = NormalizationStats(mean, std)
        return Checkpoint(
            cfg, params,
            tuple(Channel[n] for n in payload["input_channels"]),
            tuple(Channel[n] for n in payload["target_channels"]),
            Channel[payload["metric_channel"]],
            norm,
        )


def target_position_map(input_channels: Sequence[Channel],
                        target_channels: Sequence[Channel]) -> list[int | None]:
    """For each input column, the target column it mirrors (or None)."""
    targets = list(target_channels)
    return [targets.index(ch) if ch in targets else None for ch in input_channels]


def default_metric_channel(target_channels: Sequence[Channel]) -> Channel:
    return Channel.SONAR if Channel.SONAR in target_channels else target_channels[0]


def predict(model: ForecastModel, inputs: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    """Inference over stacked inputs; returns normalized predictions."""
    outs = []
    for lo in range(0, inputs.shape[0], batch_size):
        outs.append(model.forward(inputs[lo:lo + batch_size], train=False).data)
    return np.concatenate(outs, axis=0)


def _channel_std(dataset: WindowedDataset, ch: Channel) -> float:
    if dataset.norm_stats is None:
        return 1.0
    return dataset.norm_stats.std[ch]


def dataset_mae(model: ForecastModel, dataset: WindowedDataset,
                metric_channel: Channel, batch_size: int = 256) -> float:
    """Denormalized (ft) MAE of the metric channel over a dataset."""
    preds = predict(model, dataset.inputs, batch_size)
    j = dataset.target_channel_index(metric_channel)
    mae_norm = ag.mae_metric(preds, dataset.targets, [j])
    return mae_norm * _channel_std(dataset, metric_channel)


@dataclass
class EvalReport:
    """Per-channel and per-horizon-step errors for one dataset."""

    mae_ft: float                       # metric channel
    mae_m: float
    per_channel_mae_ft: dict[Channel, float]
    per_step_mae_ft: list[float]        # metric channel, length w_out

    def to_dict(self) -> dict:
        return {
            "schema": "scourcast.eval-report.v1",
            "mae_ft": self.mae_ft,
            "mae_m": self.mae_m,
            "per_channel_mae_ft": {ch.name: v for ch, v in self.per_channel_mae_ft.items()},
            "per_channel_mae_m": {ch.name: ft_to_m(v)
                                  for ch, v in self.per_channel_mae_ft.items()},
            "per_step_mae_ft": self.per_step_mae_ft,
        }


def evaluate(model: ForecastModel, dataset: WindowedDataset,
             metric_channel: Channel | None = None,
             batch_size: int = 256) -> EvalReport:
    """Denormalized MAE per channel plus the horizon-step error curve."""
    metric = metric_channel or default_metric_channel(dataset.target_channels)
    preds = predict(model, dataset.inputs, batch_size)
    per_channel: dict[Channel, float] = {}
    for j, ch in enumerate(dataset.target_channels):
        mae_norm = ag.mae_metric(preds, dataset.targets, [j])
        per_channel[ch] = mae_norm * _channel_std(dataset, ch)
    jm = dataset.target_channel_index(metric)
    err = np.abs(preds[:, :, jm] - dataset.targets[:, :, jm])
    curve = (err.mean(axis=0) * _channel_std(dataset, metric)).tolist()
    mae_ft = per_channel[metric]
    return EvalReport(mae_ft, ft_to_m(mae_ft), per_channel, curve)


def train(model: ForecastModel, train_set: WindowedDataset, val_set: WindowedDataset,
          budget: TrainBudget = TrainBudget(), seed: int = 0,
          metric_channel: Channel | None = None,
          loss_mask: str = "targets") -> tuple[TrainReport, dict[str, np.ndarray]]:
    """Optimize the model; returns the report and best-epoch parameters.

    ``loss_mask`` selects the channels entering the MSE: "targets" (all
    target channels) or "metric" (the metric channel alone, the literal
    Sonar-only reading of the training loss).
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    metric = metric_channel or default_metric_channel(train_set.target_channels)
    if loss_mask == "targets":
        mask = list(range(len(train_set.target_channels)))
    elif loss_mask == "metric":
        mask = [train_set.target_channel_index(metric)]
    else:
        raise ValueError(f"loss_mask must be 'targets' or 'metric', got {loss_mask!r}")

    report = TrainReport(config=format_config(model.cfg))
    optimizer = Adam(model.parameters(), lr=budget.lr)
    best_val = math.inf
    best_params = state_dict(model)
    since_best = 0
    t0 = time.perf_counter()
    n = len(train_set)

    for epoch in range(budget.max_epochs):
        order = seed_stream(seed, "shuffle", epoch).permutation(n)
        drop_rng = seed_stream(seed, "dropout", epoch)
        sse, count = 0.0, 0
        for lo in range(0, n, budget.batch_size):
            idx = order[lo:lo + budget.batch_size]
            x = train_set.inputs[idx]
            y = train_set.targets[idx]
            optimizer.zero_grad()
            pred = model.forward(x, train=True, rng=drop_rng)
            loss = ag.mse_loss(pred, ag.constant(y), mask)
            loss_val = float(loss.data)
            if not math.isfinite(loss_val):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}; partial report: {report.to_dict()}")
            loss.backward()
            optimizer.step()
            elems = x.shape[0]
            sse += loss_val * elems
            count += elems
        report.train_loss.append(sse / count)

        val_mae = dataset_mae(model, val_set, metric)
        report.val_mae.append(val_mae)
        if val_mae < best_val:
            best_val = val_mae
            best_params = state_dict(model)
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        if since_best >= budget.patience:
            break

    report.wall_time_s = time.perf_counter() - t0
    report.val_mae_ft = best_val
    load_state_dict(model, best_params)
    return report, best_params


def persistence_baseline(dataset: WindowedDataset,
                         metric_channel: Channel | None = None) -> float:
    """MAE (ft) of repeating the last observed metric value over the horizon."""
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    metric = metric_channel or default_metric_channel(dataset.target_channels)
    j_in = dataset.input_channels.index(metric)
    j_tg = dataset.target_channel_index(metric)
    last = dataset.inputs[:, -1, j_in]
    err = np.abs(dataset.targets[:, :, j_tg] - last[:, None])
    return float(err.mean()) * _channel_std(dataset, metric)


# --- sequential fold training ---------------------------------------------------

@dataclass(frozen=True)
class FoldRanges:
    """Frame index ranges [lo, hi) for one fold's sub-splits."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]


@dataclass(frozen=True)
class FoldPlan:
    """Chronological folds over a frame plus a reserved final-test slice."""

    n_folds: int
    folds: tuple[FoldRanges, ...]
    final_test: tuple[int, int]

    def __post_init__(self) -> None:
        if self.n_folds != len(self.folds) or self.n_folds < 1:
            raise ValueError("fold count disagrees with fold ranges")
        prev_end = 0
        for fr in self.folds:
            if fr.train[0] < prev_end:
                raise ValueError("fold training ranges must be disjoint and ordered")
            prev_end = fr.train[1]


def make_fold_plan(frame_length: int, n_folds: int,
                   final_test_frac: float = 0.10,
                   sub_split: tuple[float, float, float] = (0.70, 0.15, 0.15),
                   ) -> FoldPlan:
    """Reserve the trailing slice, split the rest into equal folds.

    Each fold is subdivided chronologically into train/val/test by
    ``sub_split``.
    """
    n_final = int(round(frame_length * final_test_frac))
    body = frame_length - n_final
    if body < n_folds:
        raise FoldTooSmall(f"{body} steps cannot form {n_folds} folds")
    bounds = [i * body // n_folds for i in range(n_folds + 1)]
    folds = []
    for i in range(n_folds):
        lo, hi = bounds[i], bounds[i + 1]
        flen = hi - lo
        n_tr = math.floor(flen * sub_split[0])
        n_va = math.floor(flen * sub_split[1])
        folds.append(FoldRanges(
            train=(lo, lo + n_tr),
            val=(lo + n_tr, lo + n_tr + n_va),
            test=(lo + n_tr + n_va, hi),
        ))
    return FoldPlan(n_folds, tuple(folds), (body, frame_length))


@dataclass
class FoldOutcome:
    """One fold's training report, entry parameters, and checkpoint."""

    report: TrainReport
    init_params: dict[str, np.ndarray]
    checkpoint: Checkpoint


def _fold_dataset(frame: TimeSeriesFrame, span: tuple[int, int], cfg: ModelConfig,
                  input_channels: Sequence[Channel],
                  target_channels: Sequence[Channel],
                  stride: int) -> WindowedDataset:
    lo, hi = span
    if hi - lo < cfg.w_in + cfg.w_out:
        raise FoldTooSmall(
            f"range [{lo}, {hi}) too small for windows ({cfg.w_in}, {cfg.w_out})")
    sub = frame.slice(lo, hi)
    return make_windows(sub, cfg.w_in, cfg.w_out, input_channels, target_channels, stride)


def sequential_train(cfg: ModelConfig, frame: TimeSeriesFrame, plan: FoldPlan,
                     input_channels: Sequence[Channel],
                     target_channels: Sequence[Channel],
                     budget: TrainBudget = TrainBudget(), seed: int = 0,
                     metric_channel: Channel | None = None,
                     stride: int = 1, loss_mask: str = "targets") -> list[FoldOutcome]:
    """Train through folds in order, fine-tuning from the previous best.

    Fold 0 starts from fresh initialization; every later fold loads the
    preceding fold's best checkpoint. Each fold reports val, test, and
    the reserved final-test MAE.
    """
    metric = metric_channel or default_metric_channel(tuple(target_channels))
    positions = target_position_map(input_channels, target_channels)
    outcomes: list[FoldOutcome] = []
    carried: dict[str, np.ndarray] | None = None

    for fold_idx, ranges in enumerate(plan.folds):
        tr = _fold_dataset(frame, ranges.train, cfg, input_channels, target_channels, stride)
        va = _fold_dataset(frame, ranges.val, cfg, input_channels, target_channels, stride)
        te = _fold_dataset(frame, ranges.test, cfg, input_channels, target_channels, stride)
        ft = _fold_dataset(frame, plan.final_test, cfg, input_channels, target_channels, stride)
        stats = fit_normalization(tr)
        tr, va = tr.normalized(stats), va.normalized(stats)
        te, ft = te.normalized(stats), ft.normalized(stats)

        model = build_model(cfg, len(input_channels), len(target_channels),
                            seed=seed, target_positions=positions)
        if carried is not None:
            load_state_dict(model, carried)
        init_params = state_dict(model)

        report, best = train(model, tr, va, budget,
                             seed=seed + fold_idx, metric_channel=metric,
                             loss_mask=loss_mask)
        report.test_mae_ft = dataset_mae(model, te, metric)
        report.final_test_mae_ft = dataset_mae(model, ft, metric)
        checkpoint = Checkpoint(cfg, best, tuple(input_channels),
                                tuple(target_channels), metric, stats)
        outcomes.append(FoldOutcome(report, init_params, checkpoint))
        carried = best
    return outcomes


def holdout_train(cfg: ModelConfig, frame: TimeSeriesFrame, spec: SplitSpec,
                  input_channels: Sequence[Channel],
                  target_channels: Sequence[Channel],
                  budget: TrainBudget = TrainBudget(), seed: int = 0,
                  metric_channel: Channel | None = None,
                  stride: int = 1, loss_mask: str = "targets",
                  final_test_span: tuple[int, int] | None = None,
                  ) -> tuple[TrainReport, Checkpoint]:
    """Single chronological train/val/test run over a frame."""
    metric = metric_channel or default_metric_channel(tuple(target_channels))
    positions = target_position_map(input_channels, target_channels)
    body_end = final_test_span[0] if final_test_span is not None else len(frame)
    body = frame.slice(0, body_end)
    windows = make_windows(body, cfg.w_in, cfg.w_out, input_channels,
                           target_channels, stride)
    tr, va, te = chronological_split(windows, spec)
    stats = fit_normalization(tr)
    tr, va, te = tr.normalized(stats), va.normalized(stats), te.normalized(stats)

    model = build_model(cfg, len(input_channels), len(target_channels),
                        seed=seed, target_positions=positions)
    report, best = train(model, tr, va, budget, seed=seed,
                         metric_channel=metric, loss_mask=loss_mask)
    report.test_mae_ft = dataset_mae(model, te, metric)
    if final_test_span is not None:
        ft = _fold_dataset(frame, final_test_span, cfg, input_channels,
                           target_channels, stride).normalized(stats)
        report.final_test_mae_ft = dataset_mae(model, ft, metric)
    checkpoint = Checkpoint(cfg, best, tuple(input_channels),
                            tuple(target_channels), metric, stats)
    return report, checkpoint
