import math

import pytest

from skymark.analysis import (
    AccuracyRecord,
    MissingTruth,
    emit_csv,
    emit_perf_csv,
    emit_summary,
    euclidean_px,
    overlap_distance,
    run_geolocation_accuracy,
    run_marker_accuracy,
)
from skymark.simkit import NoiseModel, ScenarioConfig, generate_grid


@pytest.fixture(scope="module")
def zero_noise_grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid_zero")
    cfg = ScenarioConfig(rng_seed=5)
    generate_grid(cfg, NoiseModel.zero(), out)
    return out


@pytest.fixture(scope="module")
def noisy_grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid_noisy")
    cfg = ScenarioConfig(rng_seed=5)
    generate_grid(cfg, NoiseModel.default(), out)
    return out


class TestGeolocationAccuracy:
    def test_zero_noise_grid_zero_error(self, zero_noise_grid):
        records, summaries = run_geolocation_accuracy(zero_noise_grid)
        assert len(records) == 360
        assert all(r.horiz_err_m < 1e-6 for r in records)

    def test_summary_grouping(self, noisy_grid):
        records, summaries = run_geolocation_accuracy(noisy_grid)
        alt_rows = [s for s in summaries if s.group == "altitude"]
        pitch_rows = [s for s in summaries if s.group == "pitch"]
        assert [s.value for s in alt_rows] == [10.0, 20.0, 30.0]
        assert [s.value for s in pitch_rows] == [45.0, 60.0, 75.0, 90.0]
        # velocity never becomes a grouping
        assert {s.group for s in summaries} == {"altitude", "pitch"}
        for s in summaries:
            assert s.min <= s.mean <= s.max
            assert s.n == (120 if s.group == "altitude" else 90)

    def test_noisy_errors_positive(self, noisy_grid):
        records, _ = run_geolocation_accuracy(noisy_grid)
        assert all(r.horiz_err_m >= 0 for r in records)
        assert sum(r.horiz_err_m for r in records) > 0

    def test_missing_truth(self, tmp_path):
        with pytest.raises(MissingTruth):
            run_geolocation_accuracy(tmp_path / "nope")


class TestMarkerAccuracy:
    def test_zero_noise_marker_distance_is_zero(self, zero_noise_grid):
        records, _ = run_marker_accuracy(zero_noise_grid, marker_at="truth")
        assert len(records) == 360
        assert all(r.pixel_dist_px == 0.0 for r in records)

    def test_zero_noise_computed_marker_also_zero(self, zero_noise_grid):
        records, _ = run_marker_accuracy(zero_noise_grid, marker_at="computed")
        assert all(r.pixel_dist_px == 0.0 for r in records)

    def test_three_four_five(self):
        assert euclidean_px((0.0, 0.0), (3.0, 4.0)) == 5.0
        assert overlap_distance(5.0, 1.0, 1.0) == 5.0

    def test_overlap_rule_zeroes_distance(self):
        # Distinct centers, touching extents: distance becomes zero.
        assert overlap_distance(5.0, 3.0, 2.0) == 0.0
        assert overlap_distance(5.0, 10.0, 73.0) == 0.0

    def test_marker_at_validated(self, zero_noise_grid):
        with pytest.raises(ValueError):
            run_marker_accuracy(zero_noise_grid, marker_at="elsewhere")

    def test_noisy_marker_distances_nonnegative(self, noisy_grid):
        records, summaries = run_marker_accuracy(noisy_grid)
        assert all(r.pixel_dist_px >= 0 for r in records)
        assert len(records) == 360


class TestCsvEmit:
    RECORDS = [
        AccuracyRecord(10.0, 45.0, 5.0, 0, 1.25, 0.0),
        AccuracyRecord(20.0, 90.0, 15.0, 3, 0.5, 12.5),
    ]

    def test_header_only_when_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        assert path.read_text() == \
            "altitude_m,pitch_deg,velocity_mps,frame_seq,horiz_err_m,pixel_dist_px\n"

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(self.RECORDS, a)
        emit_csv(self.RECORDS, b)
        assert a.read_bytes() == b.read_bytes()

    def test_summary_rows_for_default_grid(self, noisy_grid, tmp_path):
        _, summaries = run_geolocation_accuracy(noisy_grid)
        path = tmp_path / "summary.csv"
        emit_summary(summaries, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,group,value,n,mean,median,std,min,max"
        assert len(lines) == 1 + 3 + 4  # header + 3 altitude + 4 pitch rows

    def test_perf_csv_shape(self, tmp_path):
        from skymark.analysis import PerfRecord

        path = tmp_path / "perf.csv"
        emit_perf_csv([PerfRecord(1, 9.97, 1.5, 3.25, 64.2, 1.75, False)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == \
            "n_uavs,records_per_s,latency_p50_ms,latency_p99_ms,peak_rss_mb,cpu_time_s,overload"
        assert lines[1].startswith("1,9.97,")


class TestScalingSmoke:
    def test_single_uav_short_run(self):
        from skymark.analysis import run_scaling

        records = run_scaling([1], fps=10.0, duration_s=3.0)
        assert len(records) == 1
        rec = records[0]
        assert rec.n_uavs == 1
        assert rec.records_per_s >= 0.95 * 10.0
        assert not rec.overload
        assert rec.latency_p99_ms >= rec.latency_p50_ms
        assert rec.peak_rss_mb > 0.0
