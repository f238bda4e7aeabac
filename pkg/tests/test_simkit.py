import math
from pathlib import Path

import pytest

from skymark.geodesy import enu_from, geodesic_distance, to_enu
from skymark.projection import GroundModel, geolocate, project
from skymark.simkit import (
    InfeasibleScenario,
    NoiseModel,
    ScenarioConfig,
    decode_truth,
    encode_truth,
    generate_cell,
    generate_grid,
    iter_truth_frames,
    load_manifest,
)

CFG = ScenarioConfig(rng_seed=42)


class TestGenerateCell:
    def test_nadir_closest_approach_is_principal_point(self):
        frames = generate_cell(CFG, NoiseModel.zero(), 10.0, 90.0, 5.0)
        intr = CFG.intrinsics
        best = min(frames, key=lambda f: math.hypot(f.truth_pixel.u - intr.cx,
                                                    f.truth_pixel.v - intr.cy))
        assert math.hypot(best.truth_pixel.u - intr.cx,
                          best.truth_pixel.v - intr.cy) < 0.5

    def test_noiseless_closure(self):
        for alt, pitch, vel in ((10.0, 90.0, 5.0), (30.0, 45.0, 15.0), (20.0, 60.0, 10.0)):
            frames = generate_cell(CFG, NoiseModel.zero(), alt, pitch, vel)
            for tf in frames:
                hit = geolocate(tf.meta.pose, tf.meta.intr, tf.truth_pixel,
                                GroundModel.plane(CFG.ground_alt_m), CFG.mission_origin)
                assert geodesic_distance(hit, tf.truth_poi) < 1e-6

    def test_deterministic(self):
        a = generate_cell(CFG, NoiseModel.default(), 20.0, 60.0, 10.0, cell_index=7)
        b = generate_cell(CFG, NoiseModel.default(), 20.0, 60.0, 10.0, cell_index=7)
        assert [encode_truth(x) for x in a] == [encode_truth(x) for x in b]

    def test_zero_noise_is_bitwise_noiseless(self):
        frames = generate_cell(CFG, NoiseModel.zero(), 10.0, 75.0, 5.0)
        for tf in frames:
            assert tf.meta.pose.position == tf.truth_pose.position
            assert tf.meta.pose.orientation == tf.truth_pose.orientation
            assert tf.click_pixel == tf.truth_pixel

    def test_pixel_spread(self):
        frames = generate_cell(CFG, NoiseModel.zero(), 30.0, 45.0, 15.0)
        pts = [(f.truth_pixel.u, f.truth_pixel.v) for f in frames]
        min_spread = min(math.dist(a, b)
                         for i, a in enumerate(pts) for b in pts[i + 1:])
        assert min_spread >= 0.05 * CFG.width_px

    def test_spread_fallback_when_impossible(self):
        cfg = ScenarioConfig(rng_seed=1, frames_per_cell=200)
        frames = generate_cell(cfg, NoiseModel.zero(), 10.0, 90.0, 5.0)
        assert len(frames) == 200
        assert all(f.truth_pixel is not None for f in frames)

    def test_frames_in_chronological_order(self):
        frames = generate_cell(CFG, NoiseModel.default(), 20.0, 75.0, 15.0)
        assert all(a.meta.t_ms < b.meta.t_ms for a, b in zip(frames, frames[1:]))
        assert [f.meta.seq for f in frames] == list(range(len(frames)))

    def test_velocity_scales_timestamps_only(self):
        slow = generate_cell(CFG, NoiseModel.zero(), 20.0, 60.0, 5.0)
        fast = generate_cell(CFG, NoiseModel.zero(), 20.0, 60.0, 15.0)
        assert [f.truth_pixel for f in slow] == [f.truth_pixel for f in fast]
        slow_span = slow[-1].meta.t_ms - slow[0].meta.t_ms
        fast_span = fast[-1].meta.t_ms - fast[0].meta.t_ms
        assert abs(slow_span / fast_span - 3.0) < 0.01

    def test_noise_unbiased(self):
        cfg = ScenarioConfig(rng_seed=77, frames_per_cell=100)
        noise = NoiseModel(gps_sigma_m=1.0, alt_sigma_m=0.5,
                           orient_sigma_deg=0.5, pixel_sigma_px=2.0)
        frame = enu_from(cfg.mission_origin)
        offsets_e, offsets_n = [], []
        for idx in range(100):  # 10^4 frames total
            for tf in generate_cell(cfg, noise, 20.0, 60.0, 10.0, cell_index=idx):
                te, tn, _ = to_enu(frame, tf.truth_pose.position)
                ne, nn, _ = to_enu(frame, tf.meta.pose.position)
                offsets_e.append(ne - te)
                offsets_n.append(nn - tn)
        n = len(offsets_e)
        bound = 3.0 * 1.0 / math.sqrt(n)
        assert abs(sum(offsets_e) / n) < bound
        assert abs(sum(offsets_n) / n) < bound


class TestTruthCodec:
    def test_roundtrip(self):
        frames = generate_cell(CFG, NoiseModel.default(), 10.0, 45.0, 5.0)
        for tf in frames:
            assert decode_truth(encode_truth(tf)) == tf

    def test_truth_line_is_valid_telemetry(self):
        from skymark.telemetry import decode

        tf = generate_cell(CFG, NoiseModel.default(), 10.0, 45.0, 5.0)[0]
        assert decode(encode_truth(tf)) == tf.meta


class TestGenerateGrid:
    def test_default_grid_counts(self, tmp_path):
        out = generate_grid(CFG, NoiseModel.zero(), tmp_path / "grid")
        assert len(out.cells) == 36
        manifest = load_manifest(out.out_dir)
        frames = list(iter_truth_frames(out.out_dir, manifest))
        assert len(frames) == 360

    def test_single_cell_grid(self, tmp_path):
        cfg = ScenarioConfig(altitudes_m=(10.0,), pitches_deg=(90.0,),
                             velocities_mps=(5.0,), rng_seed=0)
        out = generate_grid(cfg, NoiseModel.zero(), tmp_path / "grid")
        assert len(out.cells) == 1

    def test_frames_per_cell_zero_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(frames_per_cell=0)

    def test_byte_identical_reruns(self, tmp_path):
        a = generate_grid(CFG, NoiseModel.default(), tmp_path / "a")
        b = generate_grid(CFG, NoiseModel.default(), tmp_path / "b")
        files_a = sorted(p.relative_to(a.out_dir) for p in a.out_dir.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b.out_dir) for p in b.out_dir.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a.out_dir / rel).read_bytes() == (b.out_dir / rel).read_bytes()

    def test_per_uav_stream_is_well_formed(self, tmp_path):
        from skymark.telemetry import stream_reader

        out = generate_grid(CFG, NoiseModel.default(), tmp_path / "grid")
        telem = (out.out_dir / out.cells[0].telemetry_path).read_text().splitlines()
        reader = stream_reader(telem)
        assert len(list(reader)) == CFG.frames_per_cell
        assert not reader.errors


class TestValidation:
    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(altitudes_m=())

    def test_altitude_must_clear_ground(self):
        with pytest.raises(ValueError):
            ScenarioConfig(altitudes_m=(0.0,))

    def test_pitch_range(self):
        with pytest.raises(ValueError):
            ScenarioConfig(pitches_deg=(0.0,))
        with pytest.raises(ValueError):
            ScenarioConfig(pitches_deg=(95.0,))

    def test_infeasible_row_count(self):
        cfg = ScenarioConfig(rng_seed=0, frames_per_cell=2_000_000)
        with pytest.raises(InfeasibleScenario):
            generate_cell(cfg, NoiseModel.zero(), 10.0, 90.0, 5.0)
