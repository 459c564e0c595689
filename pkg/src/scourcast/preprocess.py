"""Raw sensor ingestion: CSV parsing, hourly resampling, despiking, gap fill.

The chain mirrors how field monitoring data gets cleaned before
modelling: bucket arbitrary-time readings onto one shared hourly grid
(median per bucket), mask spikes against a rolling median/MAD test, then
linearly fill only short gaps. All steps are pure and deterministic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyFile, SpanTooShort
from .frames import HOUR, Channel, TimeSeriesFrame, channel_from_name

DESPIKE_WINDOW = 24        # hours each side contributes window//2 points
DESPIKE_K_MAD = 6.0
MAD_FLOOR = 1e-6
MAX_FILL_GAP = 3


@dataclass(frozen=True)
class RawReading:
    """One sensor observation at an arbitrary (not yet gridded) time."""

    timestamp: int            # epoch seconds UTC
    channel: Channel
    value: float


@dataclass
class ParseReport:
    """Per-file parse outcome: valid rows kept, bad rows recorded."""

    n_rows: int = 0
    n_valid: int = 0
    bad_rows: list[tuple[int, str]] = field(default_factory=list)   # (line_no, reason)

    @property
    def n_malformed(self) -> int:
        return len(self.bad_rows)


def _parse_iso8601(text: str) -> int:
    # Python 3.10 fromisoformat rejects a trailing Z
    t = text.strip()
    if t.endswith("Z") or t.endswith("z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def parse_sensor_csv(source: str | Path | bytes) -> tuple[list[RawReading], ParseReport]:
    """Read a ``timestamp,channel,value`` CSV into readings.

    Malformed rows are collected in the report and skipped; valid rows
    are kept in file order. Raises EmptyFile when no data rows exist.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = [(i + 1, row) for i, row in enumerate(reader) if row and any(c.strip() for c in row)]
    if rows and [c.strip().lower() for c in rows[0][1][:1]] == ["timestamp"]:
        rows = rows[1:]
    if not rows:
        raise EmptyFile("sensor CSV holds no data rows")

    readings: list[RawReading] = []
    report = ParseReport()
    for line_no, row in rows:
        report.n_rows += 1
        if len(row) != 3:
            report.bad_rows.append((line_no, f"expected 3 fields, got {len(row)}"))
            continue
        ts_text, ch_text, val_text = (c.strip() for c in row)
        try:
            ts = _parse_iso8601(ts_text)
        except ValueError:
            report.bad_rows.append((line_no, f"unparsable timestamp {ts_text!r}"))
            continue
        try:
            ch = channel_from_name(ch_text)
        except KeyError:
            report.bad_rows.append((line_no, f"unknown channel {ch_text!r}"))
            continue
        try:
            val = float(val_text)
        except ValueError:
            report.bad_rows.append((line_no, f"non-numeric value {val_text!r}"))
            continue
        if not np.isfinite(val):
            report.bad_rows.append((line_no, f"non-finite value {val_text!r}"))
            continue
        readings.append(RawReading(ts, ch, val))
        report.n_valid += 1
    return readings, report


def resample_hourly(readings: Sequence[RawReading]) -> TimeSeriesFrame:
    """Bucket readings onto a shared hourly grid, median per bucket.

    The grid runs from the first reading's hour to the last's; buckets
    with no readings for a channel are masked missing.
    """
    if not readings:
        raise SpanTooShort("no readings to resample")
    times = np.array([r.timestamp for r in readings], dtype=np.int64)
    first_hour = (times.min() // HOUR) * HOUR
    last_hour = (times.max() // HOUR) * HOUR
    n = int((last_hour - first_hour) // HOUR) + 1
    if n < 2:
        raise SpanTooShort("readings span less than two hours")
    grid = first_hour + HOUR * np.arange(n, dtype=np.int64)

    by_channel: dict[Channel, dict[int, list[float]]] = {}
    for r in readings:
        bucket = int((r.timestamp - first_hour) // HOUR)
        by_channel.setdefault(r.channel, {}).setdefault(bucket, []).append(r.value)

    channels: dict[Channel, np.ndarray] = {}
    missing: dict[Channel, np.ndarray] = {}
    for ch, buckets in by_channel.items():
        vals = np.full(n, np.nan)
        mask = np.ones(n, dtype=bool)
        for b, xs in buckets.items():
            vals[b] = float(np.median(xs))
            mask[b] = False
        channels[ch] = vals
        missing[ch] = mask
    return TimeSeriesFrame(grid, channels, missing)


def _rolling_median_mad(values: np.ndarray, missing: np.ndarray,
                        window: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered rolling median and MAD, masked values excluded.

    The window covers ``window // 2`` points each side of the centre,
    truncated at the series edges.
    """
    half = window // 2
    x = np.where(missing, np.nan, values)
    padded = np.concatenate([np.full(half, np.nan), x, np.full(half, np.nan)])
    W = np.lib.stride_tricks.sliding_window_view(padded, 2 * half + 1)
    with np.errstate(all="ignore"):
        med = np.nanmedian(W, axis=1)
        mad = np.nanmedian(np.abs(W - med[:, None]), axis=1)
    return med, mad


def despike(frame: TimeSeriesFrame, window: int = DESPIKE_WINDOW,
            k_mad: float = DESPIKE_K_MAD) -> tuple[TimeSeriesFrame, int]:
    """Mask points far from their rolling median; values never change.

    A point is a spike when |x - median| > k_mad * max(MAD, floor) over
    the centered window. Sweeps repeat until no new point masks, which
    makes the operation idempotent on its own output. Returns the
    despiked frame and the count of newly masked points.
    """
    channels = {ch: v.copy() for ch, v in frame.channels.items()}
    missing = {ch: m.copy() for ch, m in frame.missing.items()}
    total_masked = 0
    for ch in frame.channel_list:
        vals, mask = channels[ch], missing[ch]
        while True:
            med, mad = _rolling_median_mad(vals, mask, window)
            mad = np.maximum(mad, MAD_FLOOR)
            with np.errstate(invalid="ignore"):
                spike = (~mask) & (np.abs(vals - med) > k_mad * mad)
            if not spike.any():
                break
            mask |= spike
            vals[spike] = np.nan
            total_masked += int(spike.sum())
    return TimeSeriesFrame(frame.timestamps, channels, missing), total_masked


def fill_short_gaps(frame: TimeSeriesFrame,
                    max_gap: int = MAX_FILL_GAP) -> tuple[TimeSeriesFrame, int]:
    """Linearly interpolate masked runs of length <= max_gap.

    Only runs with valid values on both flanks are filled; gaps touching
    the series edge stay masked. Returns the frame and filled count.
    """
    channels = {ch: v.copy() for ch, v in frame.channels.items()}
    missing = {ch: m.copy() for ch, m in frame.missing.items()}
    n_filled = 0
    L = len(frame)
    for ch in frame.channel_list:
        vals, mask = channels[ch], missing[ch]
        i = 0
        while i < L:
            if not mask[i]:
                i += 1
                continue
            j = i
            while j < L and mask[j]:
                j += 1
            run = j - i
            if run <= max_gap and i > 0 and j < L:
                left, right = vals[i - 1], vals[j]
                for k in range(run):
                    vals[i + k] = left + (right - left) * (k + 1) / (run + 1)
                mask[i:j] = False
                n_filled += run
            i = j
    return TimeSeriesFrame(frame.timestamps, channels, missing), n_filled


@dataclass
class PreprocessReport:
    """Counts emitted by the full ingest chain, JSON-ready."""

    n_rows: int
    n_malformed: int
    n_grid_steps: int
    n_masked_spikes: int
    n_filled_gaps: int

    def to_dict(self) -> dict:
        return {
            "schema": "scourcast.preprocess-report.v1",
            "rows_parsed": self.n_rows,
            "rows_malformed": self.n_malformed,
            "grid_steps": self.n_grid_steps,
            "masked_spikes": self.n_masked_spikes,
            "filled_gaps": self.n_filled_gaps,
        }


def preprocess_readings(readings: Sequence[RawReading], parse_report: ParseReport,
                        despike_window: int = DESPIKE_WINDOW,
                        despike_k: float = DESPIKE_K_MAD,
                        max_fill_gap: int = MAX_FILL_GAP,
                        ) -> tuple[TimeSeriesFrame, PreprocessReport]:
    """Run resample -> despike -> fill and assemble the report."""
    frame = resample_hourly(readings)
    frame, n_spikes = despike(frame, despike_window, despike_k)
    frame, n_filled = fill_short_gaps(frame, max_fill_gap)
    report = PreprocessReport(
        n_rows=parse_report.n_rows,
        n_malformed=parse_report.n_malformed,
        n_grid_steps=len(frame),
        n_masked_spikes=n_spikes,
        n_filled_gaps=n_filled,
    )
    return frame, report
