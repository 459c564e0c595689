"""Hyperparameter search: grid, seeded random sub-space sampling, and the
mean/median/bagging ranking policies, plus top-k ensemble forecasting.

An evaluator maps (config, repetition) to a validation MAE. Real
training and the planted-truth oracle used in fast policy tests both
satisfy that interface, so policy behavior is testable in milliseconds.
"""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BadFraction, ChannelMismatch, NoRecords, ShapeMismatch, TrialTooSmall
from .frames import Channel, TimeSeriesFrame, WindowedDataset, make_windows
from .models import ModelConfig, format_config, parse_config
from .rng import seed_stream
from .training import Checkpoint, predict

Evaluator = Callable[[ModelConfig, int], float]


@dataclass(frozen=True)
class SearchSpace:
    """Finite axes whose cross product enumerates the candidate configs.

    ``windows`` pairs (w_in, w_out); LSTM spaces set ``units``, CNN
    spaces set the filter axes.
    """

    families: tuple[str, ...]
    windows: tuple[tuple[int, int], ...]
    units: tuple[int, ...] = ()
    k1: tuple[int, ...] = ()
    f1: tuple[int, ...] = ()
    k2: tuple[int, ...] = ()
    f2: tuple[int, ...] = ()
    dropouts: tuple[float, ...] = (0.0,)

    @property
    def size(self) -> int:
        return len(self.configs())

    def configs(self) -> list[ModelConfig]:
        """Deterministic enumeration of every combination."""
        out: list[ModelConfig] = []
        for fam in self.families:
            if fam in ("ss", "ss2", "fb"):
                for (w_in, w_out), u, d in itertools.product(
                        self.windows, self.units, self.dropouts):
                    out.append(ModelConfig(family=fam, w_in=w_in, w_out=w_out,
                                           units=u, dropout=d))
            else:
                for (w_in, w_out), k1, f1, k2, f2, d in itertools.product(
                        self.windows, self.k1, self.f1, self.k2, self.f2,
                        self.dropouts):
                    out.append(ModelConfig(family=fam, k1=k1, f1=f1, k2=k2, f2=f2,
                                           dropout=d).with_windows(w_in, w_out))
        return out


def experiment1_space() -> SearchSpace:
    """The 18-config single-shot LSTM tuning space (3 windows x 3 units x 2 dropouts)."""
    return SearchSpace(
        families=("ss",),
        windows=((168, 168), (336, 168), (720, 168)),
        units=(32, 64, 128),
        dropouts=(0.0, 0.2),
    )


@dataclass(frozen=True)
class TrialRecord:
    """One (configuration, trial) -> validation MAE observation."""

    config: ModelConfig
    trial_index: int
    val_mae: float    # ft

    def __post_init__(self) -> None:
        if self.val_mae < 0:
            raise ValueError("val_mae must be non-negative")


def grid_search(space: SearchSpace, evaluate: Evaluator,
                repetitions: int = 1) -> list[TrialRecord]:
    """Train every configuration ``repetitions`` times.

    Repetition ``r`` is the trial index; evaluators derive a distinct
    seed from it, so the records form r x |space| independent draws.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    records = []
    for rep in range(repetitions):
        for cfg in space.configs():
            records.append(TrialRecord(cfg, rep, evaluate(cfg, rep)))
    return records


def random_search(space: SearchSpace, evaluate: Evaluator, sample_frac: float,
                  trials: int = 20, seed: int = 0) -> list[TrialRecord]:
    """Per trial, train a uniform without-replacement subset of configs.

    The subset size is ceil(sample_frac * |space|); sampling order is
    reproducible for a given seed.
    """
    configs = space.configs()
    n_sample = math.ceil(sample_frac * len(configs))
    if n_sample < 1:
        raise BadFraction(f"sample fraction {sample_frac} selects no configurations")
    n_sample = min(n_sample, len(configs))
    records = []
    for trial in range(trials):
        rng = seed_stream(seed, "random-search", trial)
        chosen = rng.choice(len(configs), size=n_sample, replace=False)
        for ci in sorted(chosen):
            records.append(TrialRecord(configs[ci], trial, evaluate(configs[ci], trial)))
    return records


def search_run_counts(space_size: int, sample_frac: float, trials: int) -> dict:
    """Training-run cost of a random search next to the full grid."""
    random_runs = trials * math.ceil(sample_frac * space_size)
    grid_runs = trials * space_size
    return {"random_runs": random_runs, "grid_runs": grid_runs,
            "saved_runs": grid_runs - random_runs}


@dataclass(frozen=True)
class RankedConfig:
    config: ModelConfig
    statistic: float          # policy statistic (mean/median MAE, or mean for bagging)
    f: int                    # appearances across trials
    f_topk: int = 0           # top-k markings (bagging only)

    @property
    def name(self) -> str:
        return format_config(self.config)


@dataclass(frozen=True)
class PolicyRanking:
    """Configs ordered best-first under one selection policy."""

    policy: str               # meanMAE | medianMAE | bagging
    entries: tuple[RankedConfig, ...]

    def top(self, k: int) -> list[str]:
        return [e.name for e in self.entries[:k]]

    def to_dict(self) -> dict:
        return {
            "schema": "scourcast.ranking.v1",
            "policy": self.policy,
            "entries": [
                {"rank": i + 1, "config": e.name, "statistic": e.statistic,
                 "f": e.f, "f_topk": e.f_topk}
                for i, e in enumerate(self.entries)
            ],
        }


def _group_by_config(records: Sequence[TrialRecord]) -> dict[str, list[TrialRecord]]:
    if not records:
        raise NoRecords("no trial records to rank")
    groups: dict[str, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault(format_config(rec.config), []).append(rec)
    return groups


def _rank_by_statistic(records: Sequence[TrialRecord], policy: str,
                       stat: Callable[[list[float]], float]) -> PolicyRanking:
    groups = _group_by_config(records)
    entries = []
    for name in sorted(groups):
        recs = groups[name]
        entries.append(RankedConfig(recs[0].config, stat([r.val_mae for r in recs]),
                                    f=len(recs)))
    entries.sort(key=lambda e: (e.statistic, e.name))
    return PolicyRanking(policy, tuple(entries))


def rank_mean_mae(records: Sequence[TrialRecord]) -> PolicyRanking:
    """Ascending mean validation MAE, however often a config appeared."""
    return _rank_by_statistic(records, "meanMAE", statistics.fmean)


def rank_median_mae(records: Sequence[TrialRecord]) -> PolicyRanking:
    """Ascending median validation MAE."""
    return _rank_by_statistic(records, "medianMAE", statistics.median)


def rank_bagging(records: Sequence[TrialRecord], k: int = 3) -> PolicyRanking:
    """Order by how often a config lands in a trial's top-k.

    Ties break by mean MAE, then config name. Every trial must hold at
    least k records.
    """
    groups = _group_by_config(records)
    by_trial: dict[int, list[TrialRecord]] = {}
    for rec in records:
        by_trial.setdefault(rec.trial_index, []).append(rec)
    f_topk: dict[str, int] = {name: 0 for name in groups}
    for trial, recs in sorted(by_trial.items()):
        if len(recs) < k:
            raise TrialTooSmall(f"trial {trial} holds {len(recs)} records < k={k}")
        best = sorted(recs, key=lambda r: (r.val_mae, format_config(r.config)))[:k]
        for rec in best:
            f_topk[format_config(rec.config)] += 1
    entries = []
    for name in sorted(groups):
        recs = groups[name]
        mean = statistics.fmean([r.val_mae for r in recs])
        entries.append(RankedConfig(recs[0].config, mean, f=len(recs),
                                    f_topk=f_topk[name]))
    entries.sort(key=lambda e: (-e.f_topk, e.statistic, e.name))
    return PolicyRanking("bagging", tuple(entries))


def distributions_csv(records: Sequence[TrialRecord]) -> str:
    """Plot-ready long-form CSV of per-config MAE draws."""
    lines = ["config,trial,val_mae_ft"]
    for rec in sorted(records, key=lambda r: (format_config(r.config), r.trial_index)):
        lines.append(f"{format_config(rec.config)},{rec.trial_index},{float(rec.val_mae)!r}")
    return "\n".join(lines) + "\n"


# --- planted-truth oracle ---------------------------------------------------------

class OracleEvaluator:
    """Noisy draws around planted per-config true MAEs.

    Replaces real training in policy tests: a draw for (config, trial)
    is true_mae + noise, clipped at zero, deterministic per seed.
    """

    def __init__(self, true_mae: Mapping[str, float], noise_std: float, seed: int):
        self.true_mae = dict(true_mae)
        self.noise_std = noise_std
        self.seed = seed
        self.calls = 0

    def __call__(self, cfg: ModelConfig, trial: int) -> float:
        self.calls += 1
        name = format_config(cfg)
        rng = seed_stream(self.seed, "oracle", name, trial)
        return max(0.0, self.true_mae[name] + self.noise_std * rng.standard_normal())


def planted_space_oracle(space: SearchSpace, base_mae: float = 1.0,
                         gap: float = 0.06, noise_std: float = 0.02,
                         seed: int = 0) -> tuple[OracleEvaluator, list[str]]:
    """Oracle whose true MAEs rise by ``gap`` per config (3 noise-stds).

    Returns the evaluator and the planted best-first config order.
    """
    names = [format_config(c) for c in space.configs()]
    true = {name: base_mae + gap * i for i, name in enumerate(names)}
    return OracleEvaluator(true, noise_std, seed), names


# --- ensembles ---------------------------------------------------------------------

@dataclass(frozen=True)
class ForecastBundle:
    """Tiled per-timestep forecasts of several models over one span."""

    timestamps: np.ndarray                 # (T,)
    channels: tuple[Channel, ...]
    actual: np.ndarray                     # (T, C) denormalized
    per_model: np.ndarray                  # (M, T, C) denormalized
    mean: np.ndarray                       # (T, C)
    lower95: np.ndarray                    # (T, C)
    upper95: np.ndarray                    # (T, C)

    def to_csv(self) -> str:
        header = ["timestamp"]
        for ch in self.channels:
            header.append(f"actual_{ch.name.lower()}")
        for m in range(self.per_model.shape[0]):
            for ch in self.channels:
                header.append(f"model{m + 1}_{ch.name.lower()}")
        for ch in self.channels:
            header.append(f"mean_{ch.name.lower()}")
        for ch in self.channels:
            header.append(f"lower95_{ch.name.lower()}")
        for ch in self.channels:
            header.append(f"upper95_{ch.name.lower()}")
        lines = [",".join(header)]
        M = self.per_model.shape[0]
        fmt = lambda v: repr(float(v))
        for t in range(len(self.timestamps)):
            row = [str(int(self.timestamps[t]))]
            row += [fmt(v) for v in self.actual[t]]
            for m in range(M):
                row += [fmt(v) for v in self.per_model[m, t]]
            row += [fmt(v) for v in self.mean[t]]
            row += [fmt(v) for v in self.lower95[t]]
            row += [fmt(v) for v in self.upper95[t]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def tiled_windows(frame: TimeSeriesFrame, span: tuple[int, int],
                  w_in: int, w_out: int,
                  input_channels: Sequence[Channel],
                  target_channels: Sequence[Channel]) -> WindowedDataset:
    """Non-overlapping horizon windows covering [lo, hi) exactly.

    Window origins advance by w_out; the final window is shifted back
    so its horizon ends at ``hi``, which may overlap its predecessor.
    """
    lo, hi = span
    if lo < w_in:
        raise ValueError(f"span start {lo} leaves no room for a {w_in}-step history")
    if hi - lo < w_out:
        raise ValueError(f"span [{lo}, {hi}) shorter than one horizon ({w_out})")
    starts = list(range(lo, hi - w_out + 1, w_out))
    if starts[-1] + w_out < hi:
        starts.append(hi - w_out)
    in_mat = np.stack([frame.values(ch) for ch in input_channels], axis=1)
    tg_mat = np.stack([frame.values(ch) for ch in target_channels], axis=1)
    inputs = np.stack([in_mat[s - w_in:s] for s in starts])
    targets = np.stack([tg_mat[s:s + w_out] for s in starts])
    origins = frame.timestamps[np.array(starts)]
    return WindowedDataset(inputs, targets, origins,
                           tuple(input_channels), tuple(target_channels))


def ensemble_forecast(checkpoints: Sequence[Checkpoint], frame: TimeSeriesFrame,
                      span: tuple[int, int]) -> ForecastBundle:
    """Per-timestep predictions of each model plus mean and 95% band.

    The band is mean +/- 1.96 sample standard deviations across models;
    with a single checkpoint it collapses onto the model's prediction.
    """
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    first = checkpoints[0]
    for ck in checkpoints[1:]:
        if (ck.input_channels != first.input_channels
                or ck.target_channels != first.target_channels):
            raise ChannelMismatch("checkpoints disagree on channel lists")
        if (ck.config.w_in, ck.config.w_out) != (first.config.w_in, first.config.w_out):
            raise ShapeMismatch("checkpoints disagree on window sizes")
    w_in, w_out = first.config.w_in, first.config.w_out
    lo, hi = span
    T = hi - lo
    raw = tiled_windows(frame, span, w_in, w_out,
                        first.input_channels, first.target_channels)
    chans = first.target_channels

    per_model = np.empty((len(checkpoints), T, len(chans)))
    for mi, ck in enumerate(checkpoints):
        ds = raw if ck.norm_stats is None else raw.normalized(ck.norm_stats)
        preds = predict(ck.build(), ds.inputs)
        if ck.norm_stats is not None:
            preds = ck.norm_stats.denormalize(preds, chans)
        # unfold the tiled horizons back onto the span's timeline
        flat = np.empty((T, len(chans)))
        offsets = (ds.origins - frame.timestamps[lo]) // 3600
        for s, off in enumerate(offsets):
            flat[off:off + w_out] = preds[s]
        per_model[mi] = flat

    actual = np.stack([frame.values(ch)[lo:hi] for ch in chans], axis=1)
    mean = per_model.mean(axis=0)
    if len(checkpoints) > 1:
        std = per_model.std(axis=0, ddof=1)
    else:
        std = np.zeros_like(mean)
    return ForecastBundle(
        timestamps=frame.timestamps[lo:hi],
        channels=chans,
        actual=actual,
        per_model=per_model,
        mean=mean,
        lower95=mean - 1.96 * std,
        upper95=mean + 1.96 * std,
    )
