"""Core time-series containers: frames, windows, splits, normalization.

Timestamps are integer seconds since the Unix epoch (UTC). A processed
frame is hourly aligned: every timestamp is a multiple of 3600 and the
grid spacing is exactly one hour. All containers are immutable after
construction (arrays are frozen), so they can be shared freely across
concurrent workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyPartition, FrameTooShort

HOUR = 3600

# sensors report elevations in feet; converted only when reporting
FT_PER_M = 0.3048


class Channel(enum.Enum):
    """Sensor / derived channels and their short codes."""

    SONAR = "sN"          # riverbed elevation at the pier
    STAGE = "sT"          # water-surface elevation
    DISCHARGE = "dC"      # flow volume per unit time
    EVELOCITY = "dV"      # discharge / (sonar - stage)
    YEAR_SIN = "y(sin)"   # annual-phase sine
    YEAR_COS = "y(cos)"   # annual-phase cosine

    @property
    def code(self) -> str:
        return self.value

    def __repr__(self) -> str:  # "Channel.SONAR" is noisy in test output
        return self.name


# names accepted in CSV channel columns, lowercased
_CHANNEL_ALIASES = {
    "sonar": Channel.SONAR,
    "sn": Channel.SONAR,
    "stage": Channel.STAGE,
    "st": Channel.STAGE,
    "discharge": Channel.DISCHARGE,
    "dc": Channel.DISCHARGE,
    "evelocity": Channel.EVELOCITY,
    "dv": Channel.EVELOCITY,
    "year_sin": Channel.YEAR_SIN,
    "year_cos": Channel.YEAR_COS,
}


def channel_from_name(name: str) -> Channel:
    """Map a CSV channel label (name or code, any case) to a Channel."""
    key = name.strip().lower()
    if key not in _CHANNEL_ALIASES:
        raise KeyError(f"unknown channel {name!r}")
    return _CHANNEL_ALIASES[key]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Synchronized multichannel record on a shared timestamp grid.

    ``missing[ch][i]`` is True where channel ``ch`` has no valid value at
    ``timestamps[i]``. Unmasked values are always finite.
    """

    timestamps: np.ndarray                    # (L,) int64 epoch seconds
    channels: Mapping[Channel, np.ndarray]    # each (L,) float64
    missing: Mapping[Channel, np.ndarray]     # each (L,) bool

    def __post_init__(self) -> None:
        ts = _frozen(np.asarray(self.timestamps, dtype=np.int64))
        if ts.ndim != 1 or len(ts) == 0:
            raise ValueError("timestamps must be a non-empty 1-D sequence")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        chans = {}
        miss = {}
        for ch, vals in self.channels.items():
            v = _frozen(np.asarray(vals, dtype=np.float64))
            if v.shape != ts.shape:
                raise ValueError(f"channel {ch.name} length {v.shape} != {ts.shape}")
            m = self.missing.get(ch)
            m = np.zeros(len(ts), dtype=bool) if m is None else np.asarray(m, dtype=bool)
            if m.shape != ts.shape:
                raise ValueError(f"missing mask for {ch.name} has wrong length")
            if np.any(~np.isfinite(v[~m])):
                raise ValueError(f"channel {ch.name} holds non-finite unmasked values")
            chans[ch] = v
            miss[ch] = _frozen(m)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "missing", miss)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def channel_list(self) -> list[Channel]:
        return list(self.channels)

    def is_hourly(self) -> bool:
        ts = self.timestamps
        return bool(np.all(ts % HOUR == 0) and np.all(np.diff(ts) == HOUR))

    def values(self, ch: Channel) -> np.ndarray:
        return self.channels[ch]

    def mask(self, ch: Channel) -> np.ndarray:
        return self.missing[ch]

    def with_channel(self, ch: Channel, values: np.ndarray,
                     missing: np.ndarray | None = None) -> "TimeSeriesFrame":
        """Return a new frame with ``ch`` added or replaced."""
        chans = dict(self.channels)
        miss = dict(self.missing)
        chans[ch] = np.asarray(values, dtype=np.float64)
        miss[ch] = (np.zeros(len(self), dtype=bool) if missing is None
                    else np.asarray(missing, dtype=bool))
        return TimeSeriesFrame(self.timestamps, chans, miss)

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        """Sub-frame over index range [start, stop)."""
        return TimeSeriesFrame(
            self.timestamps[start:stop],
            {ch: v[start:stop] for ch, v in self.channels.items()},
            {ch: m[start:stop] for ch, m in self.missing.items()},
        )


@dataclass(frozen=True)
class WindowSample:
    """One supervised pair: w_in input rows then w_out target rows.

    ``origin`` is the timestamp of the first target step; the last input
    row sits exactly one hour before it.
    """

    input: np.ndarray    # (w_in, n_in)
    target: np.ndarray   # (w_out, n_out)
    origin: int


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel z-score statistics, fit on the training partition only."""

    mean: Mapping[Channel, float]
    std: Mapping[Channel, float]

    def __post_init__(self) -> None:
        for ch, s in self.std.items():
            if not s > 0:
                raise ValueError(f"std for {ch.name} must be > 0, got {s}")

    def normalize(self, values: np.ndarray, chans: Sequence[Channel]) -> np.ndarray:
        mu = np.array([self.mean[c] for c in chans])
        sd = np.array([self.std[c] for c in chans])
        return (values - mu) / sd

    def denormalize(self, values: np.ndarray, chans: Sequence[Channel]) -> np.ndarray:
        mu = np.array([self.mean[c] for c in chans])
        sd = np.array([self.std[c] for c in chans])
        return values * sd + mu


@dataclass(frozen=True)
class WindowedDataset:
    """Stacked window samples over fixed input/target channel lists.

    ``norm_stats`` is None while values are raw; after ``normalized()``
    it records the statistics needed to undo the scaling.
    """

    inputs: np.ndarray          # (S, w_in, n_in) float64
    targets: np.ndarray         # (S, w_out, n_out) float64
    origins: np.ndarray         # (S,) int64
    input_channels: tuple[Channel, ...]
    target_channels: tuple[Channel, ...]
    norm_stats: NormalizationStats | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", _frozen(np.asarray(self.inputs, dtype=np.float64)))
        object.__setattr__(self, "targets", _frozen(np.asarray(self.targets, dtype=np.float64)))
        object.__setattr__(self, "origins", _frozen(np.asarray(self.origins, dtype=np.int64)))
        object.__setattr__(self, "input_channels", tuple(self.input_channels))
        object.__setattr__(self, "target_channels", tuple(self.target_channels))
        if not (self.inputs.shape[0] == self.targets.shape[0] == self.origins.shape[0]):
            raise ValueError("inputs/targets/origins disagree on sample count")
        if len(self.origins) > 1 and np.any(np.diff(self.origins) <= 0):
            raise ValueError("samples must be ordered by origin")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def w_in(self) -> int:
        return self.inputs.shape[1]

    @property
    def w_out(self) -> int:
        return self.targets.shape[1]

    def __getitem__(self, i: int) -> WindowSample:
        return WindowSample(self.inputs[i], self.targets[i], int(self.origins[i]))

    def samples(self) -> Iterator[WindowSample]:
        for i in range(len(self)):
            yield self[i]

    def normalized(self, stats: NormalizationStats) -> "WindowedDataset":
        """Apply per-channel z-scoring; raw datasets only."""
        if self.norm_stats is not None:
            raise ValueError("dataset is already normalized")
        return WindowedDataset(
            stats.normalize(self.inputs, self.input_channels),
            stats.normalize(self.targets, self.target_channels),
            self.origins, self.input_channels, self.target_channels, stats,
        )

    def target_channel_index(self, ch: Channel) -> int:
        return self.target_channels.index(ch)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/val/test fractions; must sum to one."""

    train_frac: float
    val_frac: float
    test_frac: float
    final_test_frac: float | None = None   # sequential mode only

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0 < f < 1 for f in fracs):
            raise ValueError("each split fraction must lie in (0, 1)")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fracs)}, expected 1")


def make_windows(frame: TimeSeriesFrame, w_in: int, w_out: int,
                 input_channels: Sequence[Channel],
                 target_channels: Sequence[Channel],
                 stride: int = 1) -> WindowedDataset:
    """Slide a (w_in, w_out) window over the frame at the given stride.

    Offsets whose span touches a masked position in any used channel are
    skipped. Raises FrameTooShort when not even one window fits.
    """
    if w_in < 2:
        raise ValueError("w_in must be at least 2")
    if w_out < 1:
        raise ValueError("w_out must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if not frame.is_hourly():
        raise ValueError("frame must be hourly aligned and gap-free in time")
    L = len(frame)
    span = w_in + w_out
    if L < span:
        raise FrameTooShort(f"frame length {L} < w_in + w_out = {span}")

    used = list(dict.fromkeys(list(input_channels) + list(target_channels)))
    for ch in used:
        if ch not in frame.channels:
            raise KeyError(f"frame lacks channel {ch.name}")
    any_missing = np.zeros(L, dtype=bool)
    for ch in used:
        any_missing |= frame.mask(ch)
    # bad[s] = True if [s, s+span) touches a masked position
    bad_cum = np.concatenate([[0], np.cumsum(any_missing)])

    in_mat = np.stack([frame.values(ch) for ch in input_channels], axis=1)
    tg_mat = np.stack([frame.values(ch) for ch in target_channels], axis=1)

    starts = range(0, L - span + 1, stride)
    inputs, targets, origins = [], [], []
    for s in starts:
        if bad_cum[s + span] - bad_cum[s] > 0:
            continue   # window spans a gap
        inputs.append(in_mat[s:s + w_in])
        targets.append(tg_mat[s + w_in:s + span])
        origins.append(frame.timestamps[s + w_in])
    n = len(inputs)
    shape_in = (n, w_in, len(input_channels))
    shape_tg = (n, w_out, len(target_channels))
    return WindowedDataset(
        np.array(inputs, dtype=np.float64).reshape(shape_in),
        np.array(targets, dtype=np.float64).reshape(shape_tg),
        np.array(origins, dtype=np.int64),
        tuple(input_channels), tuple(target_channels),
    )


def chronological_split(dataset: WindowedDataset,
                        spec: SplitSpec) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset]:
    """Partition samples by order: train, then val, then test."""
    S = len(dataset)
    if S == 0:
        raise EmptyPartition("cannot split an empty dataset")
    n_train = math.floor(S * spec.train_frac)
    n_val = math.floor(S * spec.val_frac)
    n_test = S - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise EmptyPartition(
            f"split of {S} samples yields ({n_train}, {n_val}, {n_test})")

    def part(lo: int, hi: int) -> WindowedDataset:
        return WindowedDataset(
            dataset.inputs[lo:hi], dataset.targets[lo:hi], dataset.origins[lo:hi],
            dataset.input_channels, dataset.target_channels, dataset.norm_stats,
        )

    return (part(0, n_train),
            part(n_train, n_train + n_val),
            part(n_train + n_val, S))


def fit_normalization(train: WindowedDataset, std_floor: float = 1e-8) -> NormalizationStats:
    """Per-channel mean/std over the training partition's window values.

    A channel whose spread falls below ``std_floor`` (e.g. a constant
    series) gets std 1.0 so z-scoring degenerates to centering.
    """
    mean: dict[Channel, float] = {}
    std: dict[Channel, float] = {}
    for j, ch in enumerate(train.input_channels):
        col = train.inputs[:, :, j]
        mean[ch], std[ch] = float(col.mean()), float(col.std())
    for j, ch in enumerate(train.target_channels):
        if ch in mean:
            continue
        col = train.targets[:, :, j]
        mean[ch], std[ch] = float(col.mean()), float(col.std())
    for ch in std:
        if std[ch] < std_floor:
            std[ch] = 1.0
    return NormalizationStats(mean, std)


def prepare_datasets(frame: TimeSeriesFrame, w_in: int, w_out: int,
                     input_channels: Sequence[Channel],
                     target_channels: Sequence[Channel],
                     spec: SplitSpec, stride: int = 1,
                     ) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset]:
    """Window, split and normalize in one step (stats from train only)."""
    windows = make_windows(frame, w_in, w_out, input_channels, target_channels, stride)
    train, val, test = chronological_split(windows, spec)
    stats = fit_normalization(train)
    return train.normalized(stats), val.normalized(stats), test.normalized(stats)
