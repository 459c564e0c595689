"""Deterministic synthetic sensor frames for end-to-end testing.

Two scenario kinds mimic the qualitative behavior of the real
deployments without any proprietary data. ``seasonal`` frames carry an
annual stage cycle with episodic flood pulses and a bed elevation that
scours (drops) with a short lag as stage rises, giving the strong
negative stage-sonar correlation of riverine sites. ``tidal`` frames add
a 12.42 h semidiurnal component and couple the bed weakly and
positively to stage, as seen at coastal sites with moving bedforms.

The construction year is 8760 hours so noise-free frames are exactly
periodic on the hourly grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import BadSpec
from .frames import HOUR, Channel, TimeSeriesFrame
from .rng import seed_stream

YEAR_HOURS = 8760                  # 365-day construction year
TIDE_HOURS = 12.42                 # lunar semidiurnal period
EPOCH_START = 1420070400           # 2015-01-01T00:00:00Z

STAGE_BASE_FT = 40.0
STAGE_ANNUAL_AMP_FT = 3.0
SONAR_BASE_FT = 25.0
RESPONSE_GAIN = 0.8                # bed response per ft of smoothed stage anomaly
RESPONSE_LAG_HOURS = 24
RESPONSE_TAU_HOURS = 48.0
TIDE_AMP_FT = 1.5
TIDAL_COUPLING = 0.3               # weak positive bed-stage coupling


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic monitoring record."""

    kind: str                       # seasonal | tidal
    years: float = 3.0
    noise_std: float = 0.3          # ft, both stage and sonar
    flood_count: int = 2            # pulses per year
    rho: float = 0.8                # stage->bed coupling strength
    seed: int = 0
    flood_season: tuple[float, float] = (0.50, 0.80)   # fraction of year

    def __post_init__(self) -> None:
        if self.kind not in ("seasonal", "tidal"):
            raise BadSpec(f"unknown scenario kind {self.kind!r}")
        if not self.years > 0:
            raise BadSpec("years must be positive")
        if self.noise_std < 0:
            raise BadSpec("noise_std must be non-negative")
        if self.flood_count < 0:
            raise BadSpec("flood_count must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise BadSpec("rho must lie in [-1, 1]")
        lo, hi = self.flood_season
        if not 0.0 <= lo < hi <= 1.0:
            raise BadSpec("flood_season must be an increasing pair in [0, 1]")


def _flood_pulses(spec: ScenarioSpec, hours: np.ndarray) -> np.ndarray:
    """Asymmetric (fast rise, slow recession) pulses inside the season."""
    pulses = np.zeros(len(hours), dtype=np.float64)
    n_years = int(np.ceil(spec.years))
    lo, hi = spec.flood_season
    rise = 24.0
    for year in range(n_years):
        rng = seed_stream(spec.seed, "floods", year)
        for _ in range(spec.flood_count):
            onset = (year + lo + (hi - lo) * rng.random()) * YEAR_HOURS
            amp = rng.uniform(2.0, 6.0)
            dt = hours - onset
            active = dt >= 0
            x = dt[active] / rise
            pulses[active] += amp * x * np.exp(1.0 - x)
    return pulses


def _lagged_smooth(signal: np.ndarray, tau: float, lag: int) -> np.ndarray:
    """Exponential moving average shifted ``lag`` steps into the past."""
    alpha = 1.0 / tau
    smooth = np.empty_like(signal)
    acc = signal[0]
    for i, v in enumerate(signal):
        acc += alpha * (v - acc)
        smooth[i] = acc
    if lag > 0:
        smooth = np.concatenate([np.full(lag, smooth[0]), smooth[:-lag]])
    return smooth


def generate(spec: ScenarioSpec) -> TimeSeriesFrame:
    """Build the hourly frame a scenario describes; same spec, same frame."""
    n = int(round(spec.years * YEAR_HOURS))
    if n < 2:
        raise BadSpec("scenario spans less than two hours")
    hours = np.arange(n, dtype=np.float64)
    timestamps = EPOCH_START + HOUR * np.arange(n, dtype=np.int64)

    # annual cycle peaking mid flood season; the mod keeps noise-free
    # frames bitwise periodic on the hourly grid
    season_mid = 0.5 * (spec.flood_season[0] + spec.flood_season[1])
    year_frac = np.mod(hours, YEAR_HOURS) / YEAR_HOURS
    stage = STAGE_BASE_FT + STAGE_ANNUAL_AMP_FT * np.cos(
        2.0 * np.pi * (year_frac - season_mid))
    stage = stage + _flood_pulses(spec, hours)
    if spec.kind == "tidal":
        stage = stage + TIDE_AMP_FT * np.sin(2.0 * np.pi * hours / TIDE_HOURS)

    anomaly = stage - STAGE_BASE_FT
    response = _lagged_smooth(anomaly, RESPONSE_TAU_HOURS, RESPONSE_LAG_HOURS)
    if spec.kind == "seasonal":
        sonar = SONAR_BASE_FT - spec.rho * RESPONSE_GAIN * response
    else:
        tide_response = _lagged_smooth(anomaly, TIDE_HOURS / 4.0, 2)
        sonar = SONAR_BASE_FT + spec.rho * TIDAL_COUPLING * tide_response

    if spec.noise_std > 0:
        stage = stage + spec.noise_std * seed_stream(
            spec.seed, "noise", "stage").standard_normal(n)
        sonar = sonar + spec.noise_std * seed_stream(
            spec.seed, "noise", "sonar").standard_normal(n)

    # positive, monotone-in-stage discharge (stage never nears 20 ft)
    discharge = 50.0 * np.power(np.maximum(stage - 20.0, 1.0), 1.5)

    return TimeSeriesFrame(
        timestamps,
        {Channel.SONAR: sonar, Channel.STAGE: stage, Channel.DISCHARGE: discharge},
        {},
    )


def sonar_annual_amplitude(spec: ScenarioSpec) -> float:
    """Half the bed elevation's peak-to-peak swing, measured noise-free."""
    quiet = ScenarioSpec(kind=spec.kind, years=spec.years, noise_std=0.0,
                         flood_count=spec.flood_count, rho=spec.rho,
                         seed=spec.seed, flood_season=spec.flood_season)
    sonar = generate(quiet).values(Channel.SONAR)
    return float(sonar.max() - sonar.min()) / 2.0


def frame_to_sensor_csv(frame: TimeSeriesFrame) -> str:
    """Long-form ``timestamp,channel,value`` CSV the ingest chain reads."""
    names = {Channel.SONAR: "sonar", Channel.STAGE: "stage",
             Channel.DISCHARGE: "discharge", Channel.EVELOCITY: "evelocity",
             Channel.YEAR_SIN: "year_sin", Channel.YEAR_COS: "year_cos"}
    lines = ["timestamp,channel,value"]
    for i, ts in enumerate(frame.timestamps):
        iso = datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ")
        for ch in frame.channel_list:
            if frame.mask(ch)[i]:
                continue
            lines.append(f"{iso},{names[ch]},{float(frame.values(ch)[i])!r}")
    return "\n".join(lines) + "\n"
