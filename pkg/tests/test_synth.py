import numpy as np
import pytest

from scourcast.errors import BadSpec
from scourcast.frames import Channel
from scourcast.preprocess import parse_sensor_csv, resample_hourly
from scourcast.synth import (
    TIDE_AMP_FT,
    ScenarioSpec,
    TIDE_HOURS,
    YEAR_HOURS,
    frame_to_sensor_csv,
    generate,
    sonar_annual_amplitude,
)


class TestScenarioSpec:
    def test_rejects_bad_fields(self):
        with pytest.raises(BadSpec):
            ScenarioSpec(kind="lunar")
        with pytest.raises(BadSpec):
            ScenarioSpec(kind="seasonal", years=0)
        with pytest.raises(BadSpec):
            ScenarioSpec(kind="seasonal", noise_std=-1)
        with pytest.raises(BadSpec):
            ScenarioSpec(kind="seasonal", rho=1.5)


class TestSeasonal:
    def test_deterministic_per_seed(self):
        spec = ScenarioSpec(kind="seasonal", years=1, seed=42)
        a, b = generate(spec), generate(spec)
        for ch in a.channel_list:
            assert np.array_equal(a.values(ch), b.values(ch))

    def test_different_seeds_differ(self):
        a = generate(ScenarioSpec(kind="seasonal", years=1, seed=1))
        b = generate(ScenarioSpec(kind="seasonal", years=1, seed=2))
        assert not np.array_equal(a.values(Channel.STAGE), b.values(Channel.STAGE))

    def test_noise_free_stage_exactly_periodic(self):
        spec = ScenarioSpec(kind="seasonal", years=2, noise_std=0.0, flood_count=0)
        stage = generate(spec).values(Channel.STAGE)
        assert np.array_equal(stage[:YEAR_HOURS], stage[YEAR_HOURS:2 * YEAR_HOURS])

    def test_negative_stage_sonar_correlation(self):
        spec = ScenarioSpec(kind="seasonal", years=3, rho=0.8, seed=5)
        frame = generate(spec)
        r = np.corrcoef(frame.values(Channel.STAGE), frame.values(Channel.SONAR))[0, 1]
        assert r < -0.5

    def test_annual_minimum_falls_in_flood_season(self):
        spec = ScenarioSpec(kind="seasonal", years=3, flood_count=2, seed=7)
        sonar = generate(spec).values(Channel.SONAR)
        lo, hi = spec.flood_season
        for year in range(3):
            chunk = sonar[year * YEAR_HOURS:(year + 1) * YEAR_HOURS]
            at = np.argmin(chunk) / YEAR_HOURS
            assert lo <= at <= hi

    def test_frame_is_hourly_and_valid(self):
        frame = generate(ScenarioSpec(kind="seasonal", years=1, seed=3))
        assert frame.is_hourly()
        for ch in frame.channel_list:
            assert not frame.mask(ch).any()
            assert np.all(np.isfinite(frame.values(ch)))

    def test_discharge_positive_and_monotone_in_stage(self):
        frame = generate(ScenarioSpec(kind="seasonal", years=1, seed=9))
        stage = frame.values(Channel.STAGE)
        q = frame.values(Channel.DISCHARGE)
        assert np.all(q > 0)
        order = np.argsort(stage)
        assert np.all(np.diff(q[order]) >= 0)

    def test_amplitude_helper_ignores_noise(self):
        spec = ScenarioSpec(kind="seasonal", years=2, noise_std=5.0, seed=11)
        amp = sonar_annual_amplitude(spec)
        quiet = generate(ScenarioSpec(kind="seasonal", years=2, noise_std=0.0,
                                      seed=11))
        sonar = quiet.values(Channel.SONAR)
        assert abs(amp - (sonar.max() - sonar.min()) / 2) < 1e-12


class TestTidal:
    def test_semidiurnal_component_present(self):
        base = ScenarioSpec(kind="seasonal", years=1, noise_std=0.0, flood_count=0)
        tide = ScenarioSpec(kind="tidal", years=1, noise_std=0.0, flood_count=0)
        diff = (generate(tide).values(Channel.STAGE)
                - generate(base).values(Channel.STAGE))
        t = np.arange(YEAR_HOURS, dtype=float)
        expected = TIDE_AMP_FT * np.sin(2.0 * np.pi * t / TIDE_HOURS)
        np.testing.assert_allclose(diff, expected, atol=1e-9)

    def test_weak_positive_stage_sonar_coupling(self):
        spec = ScenarioSpec(kind="tidal", years=2, rho=0.8, seed=13)
        frame = generate(spec)
        r = np.corrcoef(frame.values(Channel.STAGE), frame.values(Channel.SONAR))[0, 1]
        assert r > 0.2


class TestCsvEmission:
    def test_round_trip_through_ingest(self):
        frame = generate(ScenarioSpec(kind="seasonal", years=0.01, seed=15))
        readings, report = parse_sensor_csv(frame_to_sensor_csv(frame).encode())
        assert report.n_malformed == 0
        back = resample_hourly(readings)
        assert len(back) == len(frame)
        for ch in frame.channel_list:
            np.testing.assert_allclose(back.values(ch), frame.values(ch),
                                       atol=1e-12)
