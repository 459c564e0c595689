"""Derived channels and feature-set codes.

The equivalent-velocity channel is discharge divided by the sonar-stage
difference (the bed-minus-surface form is kept as-is; ``flip_depth_sign``
switches to the conventional surface-minus-bed depth). Year-phase sine
and cosine channels encode annual periodicity. Feature-set codes such as
"sNsT" or "sNdVy" name which channels feed a model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DuplicateToken, InvalidCode, MissingChannel
from .frames import Channel, TimeSeriesFrame

# mean Gregorian year, in seconds
YEAR_SECONDS = 365.2425 * 24 * 3600

DEPTH_EPS = 1e-6

_TOKEN_CHANNELS: dict[str, tuple[Channel, ...]] = {
    "sN": (Channel.SONAR,),
    "sT": (Channel.STAGE,),
    "dC": (Channel.DISCHARGE,),
    "dV": (Channel.EVELOCITY,),
    "y": (Channel.YEAR_SIN, Channel.YEAR_COS),
}


def equivalent_velocity(frame: TimeSeriesFrame,
                        flip_depth_sign: bool = False) -> TimeSeriesFrame:
    """Add the equivalent-velocity channel: discharge / (sonar - stage).

    Positions where |sonar - stage| < 1e-6 (or where any source channel
    is missing) are masked. ``flip_depth_sign`` divides by stage - sonar
    instead.
    """
    for ch in (Channel.SONAR, Channel.STAGE, Channel.DISCHARGE):
        if ch not in frame.channels:
            raise MissingChannel(f"equivalent velocity needs {ch.name}")
    sonar = frame.values(Channel.SONAR)
    stage = frame.values(Channel.STAGE)
    discharge = frame.values(Channel.DISCHARGE)
    depth = (stage - sonar) if flip_depth_sign else (sonar - stage)
    bad = (np.abs(depth) < DEPTH_EPS)
    bad |= frame.mask(Channel.SONAR) | frame.mask(Channel.STAGE) | frame.mask(Channel.DISCHARGE)
    ev = np.zeros(len(frame))
    np.divide(discharge, depth, out=ev, where=~bad)
    ev[bad] = np.nan
    return frame.with_channel(Channel.EVELOCITY, ev, bad)


def time_features(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Add year-phase channels sin(TS*2pi/Y) and cos(TS*2pi/Y)."""
    phase = frame.timestamps.astype(np.float64) * (2.0 * np.pi / YEAR_SECONDS)
    out = frame.with_channel(Channel.YEAR_SIN, np.sin(phase))
    return out.with_channel(Channel.YEAR_COS, np.cos(phase))


def tokenize_feature_code(code: str) -> list[str]:
    """Split a code like "sNsTdVy" into its tokens, validating as we go."""
    if not code:
        raise InvalidCode("empty feature-set code")
    tokens: list[str] = []
    i = 0
    while i < len(code):
        two = code[i:i + 2]
        if two in ("sN", "sT", "dC", "dV"):
            tokens.append(two)
            i += 2
        elif code[i] == "y":
            tokens.append("y")
            i += 1
        else:
            raise InvalidCode(f"cannot read token at {code[i:]!r} in {code!r}")
    if len(set(tokens)) != len(tokens):
        raise DuplicateToken(f"feature-set code {code!r} repeats a token")
    if "dC" in tokens and "dV" in tokens:
        raise InvalidCode("dC and dV cannot co-occur (dV is derived from dC)")
    return tokens


@dataclass(frozen=True)
class FeatureSet:
    """Resolved channel lists for one feature-set code."""

    code: str
    inputs: tuple[Channel, ...]
    targets: tuple[Channel, ...]
    metric: Channel

    @property
    def sonar_metric(self) -> bool:
        return self.metric is Channel.SONAR


def resolve_feature_set(code: str) -> FeatureSet:
    """Expand a feature-set code into input/target channels.

    Targets are the Sonar/Stage channels present among the inputs; codes
    with neither (pure flow features) fall back to the first input so a
    forecast target always exists. The reporting metric channel is Sonar
    when available, else the first target.
    """
    tokens = tokenize_feature_code(code)
    inputs: list[Channel] = []
    for tok in tokens:
        inputs.extend(_TOKEN_CHANNELS[tok])
    targets = [ch for ch in inputs if ch in (Channel.SONAR, Channel.STAGE)]
    if not targets:
        targets = [inputs[0]]
    metric = Channel.SONAR if Channel.SONAR in targets else targets[0]
    return FeatureSet(code, tuple(inputs), tuple(targets), metric)


def apply_feature_channels(frame: TimeSeriesFrame, fset: FeatureSet,
                           flip_depth_sign: bool = False) -> TimeSeriesFrame:
    """Materialize any derived channels the feature set needs."""
    out = frame
    if Channel.EVELOCITY in fset.inputs and Channel.EVELOCITY not in out.channels:
        out = equivalent_velocity(out, flip_depth_sign)
    if Channel.YEAR_SIN in fset.inputs and Channel.YEAR_SIN not in out.channels:
        out = time_features(out)
    return out
