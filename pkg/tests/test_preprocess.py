import numpy as np
import pytest

from scourcast.errors import EmptyFile, SpanTooShort
from scourcast.frames import HOUR, Channel, TimeSeriesFrame
from scourcast.preprocess import (
    RawReading,
    despike,
    fill_short_gaps,
    parse_sensor_csv,
    preprocess_readings,
    resample_hourly,
)


def frame_of(values, missing=None, channel=Channel.SONAR):
    values = np.asarray(values, dtype=float)
    ts = HOUR * np.arange(len(values), dtype=np.int64)
    miss = {channel: np.asarray(missing, dtype=bool)} if missing is not None else {}
    return TimeSeriesFrame(ts, {channel: values}, miss)


class TestParseSensorCsv:
    def test_single_row(self):
        readings, report = parse_sensor_csv(
            b"timestamp,channel,value\n2021-07-01T00:00:00Z,sonar,32.5\n")
        assert len(readings) == 1
        r = readings[0]
        assert r.channel is Channel.SONAR
        assert r.value == 32.5
        assert r.timestamp % HOUR == 0
        assert report.n_malformed == 0

    def test_malformed_rows_reported_not_fatal(self):
        csv = (b"timestamp,channel,value\n"
               b"2021-07-01T00:00:00Z,sonar,1\n"
               b"2021-07-01T01:00:00Z,sonar,2\n"
               b"not-a-time,sonar,3\n"
               b"2021-07-01T02:00:00Z,sonar,4\n")
        readings, report = parse_sensor_csv(csv)
        assert len(readings) == 3
        assert report.n_malformed == 1
        assert "not-a-time" in report.bad_rows[0][1]

    def test_unknown_channel_reported(self):
        readings, report = parse_sensor_csv(
            b"timestamp,channel,value\n2021-07-01T00:00:00Z,salinity,1\n")
        assert readings == []
        assert report.n_malformed == 1

    def test_empty_raises(self):
        with pytest.raises(EmptyFile):
            parse_sensor_csv(b"timestamp,channel,value\n")

    def test_rows_stay_in_file_order(self):
        csv = (b"2021-07-01T03:00:00Z,sonar,3\n"
               b"2021-07-01T01:00:00Z,sonar,1\n")
        readings, _ = parse_sensor_csv(csv)
        assert [r.value for r in readings] == [3.0, 1.0]


def reading(hour_offset, value, channel=Channel.SONAR, minutes=0):
    return RawReading(hour_offset * HOUR + minutes * 60, channel, value)


class TestResampleHourly:
    def test_median_within_bucket(self):
        rs = [reading(0, 1.0), reading(0, 2.0, minutes=20),
              reading(0, 9.0, minutes=40), reading(1, 5.0)]
        frame = resample_hourly(rs)
        assert frame.values(Channel.SONAR)[0] == 2.0

    def test_one_reading_per_hour_passes_through(self):
        rs = [reading(i, float(i)) for i in range(5)]
        frame = resample_hourly(rs)
        np.testing.assert_array_equal(frame.values(Channel.SONAR), np.arange(5.0))
        assert not frame.mask(Channel.SONAR).any()

    def test_two_hour_hole_masks_two_positions(self):
        rs = [reading(0, 1.0), reading(3, 4.0)]
        frame = resample_hourly(rs)
        # grid hours 0..3; buckets 1 and 2 are empty
        assert len(frame) == 4
        np.testing.assert_array_equal(frame.mask(Channel.SONAR),
                                      [False, True, True, False])

    def test_grid_spacing_exact(self):
        rs = [reading(0, 1.0, minutes=17), reading(5, 2.0, minutes=42)]
        frame = resample_hourly(rs)
        assert np.all(np.diff(frame.timestamps) == HOUR)
        assert np.all(frame.timestamps % HOUR == 0)

    def test_span_too_short(self):
        with pytest.raises(SpanTooShort):
            resample_hourly([reading(0, 1.0), reading(0, 2.0, minutes=30)])


class TestDespike:
    def test_single_spike_on_constant(self):
        values = np.full(100, 10.0)
        values[40] = 110.0
        out, n = despike(frame_of(values))
        assert n == 1
        mask = out.mask(Channel.SONAR)
        assert mask[40]
        assert mask.sum() == 1

    def test_pure_sine_unmasked(self):
        t = np.arange(400)
        out, n = despike(frame_of(np.sin(2 * np.pi * t / 200)))
        assert n == 0

    def test_constant_series_unmasked(self):
        out, n = despike(frame_of(np.full(50, 3.0)))
        assert n == 0

    def test_never_alters_surviving_values(self):
        rng = np.random.default_rng(3)
        values = 10 + rng.normal(size=200)
        values[50] = 60.0
        frame = frame_of(values)
        out, _ = despike(frame)
        keep = ~out.mask(Channel.SONAR)
        np.testing.assert_array_equal(out.values(Channel.SONAR)[keep],
                                      frame.values(Channel.SONAR)[keep])

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=300)
        values[[30, 120, 200]] += 40
        once, n1 = despike(frame_of(values))
        twice, n2 = despike(once)
        assert n2 == 0
        np.testing.assert_array_equal(once.mask(Channel.SONAR),
                                      twice.mask(Channel.SONAR))


class TestFillShortGaps:
    def test_linear_midpoint(self):
        out, n = fill_short_gaps(frame_of([1.0, 0.0, 3.0],
                                          missing=[False, True, False]))
        assert n == 1
        np.testing.assert_allclose(out.values(Channel.SONAR), [1.0, 2.0, 3.0])
        assert not out.mask(Channel.SONAR).any()

    def test_long_gap_untouched(self):
        miss = [False, True, True, True, True, False]
        out, n = fill_short_gaps(frame_of([1, 0, 0, 0, 0, 6], missing=miss),
                                 max_gap=3)
        assert n == 0
        np.testing.assert_array_equal(out.mask(Channel.SONAR), miss)

    def test_edge_gap_stays_masked(self):
        out, n = fill_short_gaps(frame_of([0.0, 2.0, 3.0],
                                          missing=[True, False, False]))
        assert n == 0
        assert out.mask(Channel.SONAR)[0]

    def test_does_not_touch_observed_values(self):
        values = [1.0, 0.0, 5.0, 7.0]
        out, _ = fill_short_gaps(frame_of(values, missing=[False, True, False, False]))
        np.testing.assert_array_equal(out.values(Channel.SONAR)[[0, 2, 3]],
                                      [1.0, 5.0, 7.0])


class TestFullChain:
    def test_report_counts(self):
        rows = ["timestamp,channel,value"]
        for h in range(48):
            if h in (20, 21):
                continue   # a 2-hour hole, fillable
            v = 10.0 if h != 30 else 500.0   # one spike
            rows.append(f"2021-07-{1 + h // 24:02d}T{h % 24:02d}:00:00Z,sonar,{v}")
        rows.append("garbage,sonar,1")
        readings, parse_report = parse_sensor_csv("\n".join(rows).encode())
        frame, report = preprocess_readings(readings, parse_report)
        assert report.n_malformed == 1
        assert report.n_masked_spikes == 1
        # the 2-hour hole plus the hole left by the masked spike
        assert report.n_filled_gaps == 3
        assert report.n_grid_steps == 48
        assert not frame.mask(Channel.SONAR)[30]
        assert frame.values(Channel.SONAR)[30] == 10.0
        assert not frame.mask(Channel.SONAR)[20]
