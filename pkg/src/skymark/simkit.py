"""Synthetic flight and scene generator.

Each grid cell (altitude, pitch, velocity) produces one straight-line,
constant-altitude pass flown due north directly over the target point, so
the boresight sweeps through the target and the target's image walks down
the vertical centerline of the frame.  Frame times are chosen by inverting
the projection for a spread of target pixel rows, which guarantees exactly
frames_per_cell frames with the target visible, one of them at closest
approach.

Noise is injected into the delivered metadata and click pixel only; the
truth fields stay noiseless.  All randomness derives from (rng_seed, cell
index), so cells can be generated in any order or in parallel without
changing the output bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .geodesy import GeodeticCoord, enu_from, from_enu, to_enu
from .projection import (
    CameraIntrinsics,
    CameraPose,
    PixelCoord,
    Quaternion,
    pose_from_gimbal,
    project,
)
from .telemetry import FrameMeta, decode, encode

DEFAULT_SITE_LAT = 38.6367
DEFAULT_SITE_LON = -90.2342

# 3 ft x 4 ft target board modeled as a ground rectangle, meters.
WHITEBOARD_EAST_M = 0.91
WHITEBOARD_NORTH_M = 1.22

_EPOCH_BASE_MS = 1_726_000_000_000
_MIN_PIXEL_SPREAD_FRACTION = 0.05  # of frame width, between any two truth pixels
_EDGE_MARGIN_FRACTION = 0.03       # of frame height, kept clear at top/bottom


class InfeasibleScenario(Exception):
    """The requested cell geometry cannot put the target in view."""


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian sensor imperfections, all standard deviations.

    gps_sigma_m applies per horizontal ENU axis, alt_sigma_m to altitude,
    orient_sigma_deg per camera axis as a small-angle rotation, and
    pixel_sigma_px per image axis on the operator's click.  A model with
    every sigma zero is exactly noiseless: delivered metadata reuses the
    truth values bit for bit.
    """

    gps_sigma_m: float = 0.0
    alt_sigma_m: float = 0.0
    orient_sigma_deg: float = 0.0
    pixel_sigma_px: float = 0.0

    def __post_init__(self) -> None:
        for name in ("gps_sigma_m", "alt_sigma_m", "orient_sigma_deg", "pixel_sigma_px"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @staticmethod
    def zero() -> "NoiseModel":
        return NoiseModel()

    @staticmethod
    def default() -> "NoiseModel":
        # Calibrated so grid error means land in the low meters and the
        # altitude/pitch trends separate cleanly from sampling noise.
        return NoiseModel(gps_sigma_m=0.6, alt_sigma_m=1.0,
                          orient_sigma_deg=1.0, pixel_sigma_px=2.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """The experiment grid and world layout."""

    altitudes_m: tuple[float, ...] = (10.0, 20.0, 30.0)
    pitches_deg: tuple[float, ...] = (45.0, 60.0, 75.0, 90.0)
    velocities_mps: tuple[float, ...] = (5.0, 10.0, 15.0)
    fps: float = 5.0
    frames_per_cell: int = 10
    ground_alt_m: float = 0.0
    poi_truth: GeodeticCoord | None = None
    mission_origin: GeodeticCoord | None = None
    rng_seed: int = 0
    width_px: int = 1920
    height_px: int = 1080
    hfov_deg: float = 90.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "altitudes_m", tuple(float(a) for a in self.altitudes_m))
        object.__setattr__(self, "pitches_deg", tuple(float(p) for p in self.pitches_deg))
        object.__setattr__(self, "velocities_mps", tuple(float(v) for v in self.velocities_mps))
        if not self.altitudes_m or not self.pitches_deg or not self.velocities_mps:
            raise ValueError("altitude/pitch/velocity lists must be non-empty")
        if any(a <= 0.0 for a in self.altitudes_m):
            raise ValueError("altitudes must be above the ground")
        if any(not 0.0 < p <= 90.0 for p in self.pitches_deg):
            raise ValueError("pitches must lie in (0, 90]")
        if any(v <= 0.0 for v in self.velocities_mps):
            raise ValueError("velocities must be positive")
        if self.fps <= 0.0:
            raise ValueError("fps must be positive")
        if self.frames_per_cell < 1:
            raise ValueError("frames_per_cell must be >= 1")
        if self.poi_truth is None:
            object.__setattr__(self, "poi_truth", GeodeticCoord(
                DEFAULT_SITE_LAT, DEFAULT_SITE_LON, self.ground_alt_m))
        if self.mission_origin is None:
            object.__setattr__(self, "mission_origin", GeodeticCoord(
                self.poi_truth.lat_deg, self.poi_truth.lon_deg, self.ground_alt_m))

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.width_px, self.height_px, self.hfov_deg)

    def cells(self) -> list[tuple[float, float, float]]:
        return [(a, p, v)
                for a in self.altitudes_m
                for p in self.pitches_deg
                for v in self.velocities_mps]


@dataclass(frozen=True)
class TruthFrame:
    """One generated frame: delivered (possibly noisy) metadata plus the
    noiseless ground truth used to score it."""

    meta: FrameMeta
    truth_pose: CameraPose
    truth_pixel: PixelCoord | None
    truth_poi: GeodeticCoord
    click_pixel: PixelCoord | None


def _cell_rng(seed: int, cell_index: int) -> random.Random:
    digest = hashlib.sha256(f"{seed}/{cell_index}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _pixel_row_targets(intr: CameraIntrinsics, pitch_deg: float, n: int) -> list[float]:
    """Pick n pixel rows on the centerline, one exactly at the principal
    point, the rest alternating outward.  Spacing starts at 5% of frame
    width and shrinks only when that many rows cannot fit.
    """
    cy = intr.cy
    lo = _EDGE_MARGIN_FRACTION * intr.height_px
    hi = (1.0 - _EDGE_MARGIN_FRACTION) * intr.height_px
    # Rows above cy - fy*tan(pitch) map to rays at or above the horizon.
    tan_pitch = math.tan(math.radians(pitch_deg))
    lo = max(lo, cy - 0.98 * intr.fy * tan_pitch)
    if not lo < cy < hi:
        raise InfeasibleScenario(
            f"pitch {pitch_deg} leaves no usable rows below the horizon")
    if n == 1:
        return [cy]

    # A centipixel over the minimum so projection roundoff cannot drag
    # measured spacing below the 5% floor.
    step = _MIN_PIXEL_SPREAD_FRACTION * intr.width_px + 0.01
    cap_up = int((cy - lo) / step)
    cap_dn = int((hi - cy) / step)
    if cap_up + cap_dn + 1 < n:
        step = (hi - lo) / (n + 1)
        if step < 1e-3:
            raise InfeasibleScenario(f"cannot fit {n} distinct rows in frame")
        cap_up = int((cy - lo) / step)
        cap_dn = int((hi - cy) / step)
        if cap_up + cap_dn + 1 < n:
            raise InfeasibleScenario(f"cannot fit {n} distinct rows in frame")

    rows = [cy]
    k_up = k_dn = 0
    while len(rows) < n:
        if k_dn < cap_dn and (k_dn <= k_up or k_up >= cap_up):
            k_dn += 1
            rows.append(cy + k_dn * step)
        else:
            k_up += 1
            rows.append(cy - k_up * step)
    rows.sort()
    return rows


def _along_track_offset(altitude_m: float, pitch_deg: float,
                        intr: CameraIntrinsics, row_px: float) -> float:
    """North distance from camera to target that images the target at the
    given pixel row (camera heading north, target on the centerline).

    Derived from the camera-frame coordinates of the target at relative
    position (0, dn, -altitude): beta = (row-cy)/fy = y/z, solved for dn.
    """
    theta = math.radians(pitch_deg)
    beta = (row_px - intr.cy) / intr.fy
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    denom = beta * cos_t + sin_t
    if denom <= 0.0:
        raise InfeasibleScenario(f"row {row_px} lies at or above the horizon")
    return altitude_m * (cos_t - beta * sin_t) / denom


def generate_cell(
    cfg: ScenarioConfig,
    noise: NoiseModel,
    altitude_m: float,
    pitch_deg: float,
    velocity_mps: float,
    uav_id: str = "sim-000",
    cell_index: int = 0,
) -> list[TruthFrame]:
    """Generate one cell's pass: exactly cfg.frames_per_cell frames with
    the target in view, in chronological order."""
    origin = cfg.mission_origin
    intr = cfg.intrinsics
    frame = enu_from(origin)
    poi_e, poi_n, poi_up = to_enu(frame, cfg.poi_truth)
    cam_up = poi_up + altitude_m
    orientation = pose_from_gimbal(0.0, pitch_deg)
    rng = _cell_rng(cfg.rng_seed, cell_index)

    rows = _pixel_row_targets(intr, pitch_deg, cfg.frames_per_cell)
    offsets = [_along_track_offset(altitude_m, pitch_deg, intr, row) for row in rows]
    # Larger along-track offset = earlier in the pass (camera flies north).
    start_offset = offsets[0]

    frames: list[TruthFrame] = []
    prev_t_ms: int | None = None
    for seq, (row, offset) in enumerate(zip(rows, offsets)):
        cam_enu = (poi_e, poi_n - offset, cam_up)
        position = from_enu(frame, cam_enu)
        truth_pose = CameraPose(position, orientation)
        proj = project(truth_pose, intr, cfg.poi_truth, origin)
        if not proj.in_frame:
            raise InfeasibleScenario(
                f"target left the frame at row {row:.1f} "
                f"(alt {altitude_m}, pitch {pitch_deg})")
        truth_pixel = proj.pixel

        t_ms = _EPOCH_BASE_MS + round(1000.0 * (start_offset - offset) / velocity_mps)
        if prev_t_ms is not None and t_ms <= prev_t_ms:
            t_ms = prev_t_ms + 1
        prev_t_ms = t_ms

        # Fixed draw order keeps streams aligned across noise settings.
        g_e = rng.gauss(0.0, noise.gps_sigma_m)
        g_n = rng.gauss(0.0, noise.gps_sigma_m)
        g_u = rng.gauss(0.0, noise.alt_sigma_m)
        sigma_rad = math.radians(noise.orient_sigma_deg)
        r_x = rng.gauss(0.0, sigma_rad)
        r_y = rng.gauss(0.0, sigma_rad)
        r_z = rng.gauss(0.0, sigma_rad)
        p_u = rng.gauss(0.0, noise.pixel_sigma_px)
        p_v = rng.gauss(0.0, noise.pixel_sigma_px)

        if g_e == 0.0 and g_n == 0.0 and g_u == 0.0:
            noisy_position = position
        else:
            noisy_position = from_enu(
                frame, (cam_enu[0] + g_e, cam_enu[1] + g_n, cam_enu[2] + g_u))
        if r_x == 0.0 and r_y == 0.0 and r_z == 0.0:
            noisy_orientation = orientation
        else:
            noisy_orientation = orientation * Quaternion.from_rotvec(r_x, r_y, r_z)
        if p_u == 0.0 and p_v == 0.0:
            click_pixel = truth_pixel
        else:
            click_pixel = PixelCoord(truth_pixel.u + p_u, truth_pixel.v + p_v)

        meta = FrameMeta(
            uav_id=uav_id,
            seq=seq,
            t_ms=t_ms,
            pose=CameraPose(noisy_position, noisy_orientation),
            intr=intr,
        )
        frames.append(TruthFrame(
            meta=meta,
            truth_pose=truth_pose,
            truth_pixel=truth_pixel,
            truth_poi=cfg.poi_truth,
            click_pixel=click_pixel,
        ))
    return frames


def encode_truth(tf: TruthFrame) -> str:
    """Truth-file line: the delivered telemetry record plus truth fields.

    The line stays decodable as plain telemetry; the extra keys ride along.
    """
    rec = json.loads(encode(tf.meta))
    rec["truth_lat_deg"] = tf.truth_poi.lat_deg
    rec["truth_lon_deg"] = tf.truth_poi.lon_deg
    rec["truth_alt_m"] = tf.truth_poi.alt_m
    if tf.truth_pixel is not None:
        rec["truth_u_px"] = tf.truth_pixel.u
        rec["truth_v_px"] = tf.truth_pixel.v
    if tf.click_pixel is not None:
        rec["click_u_px"] = tf.click_pixel.u
        rec["click_v_px"] = tf.click_pixel.v
    rec["truth_cam_lat_deg"] = tf.truth_pose.position.lat_deg
    rec["truth_cam_lon_deg"] = tf.truth_pose.position.lon_deg
    rec["truth_cam_alt_m"] = tf.truth_pose.position.alt_m
    rec["truth_qw"] = tf.truth_pose.orientation.w
    rec["truth_qx"] = tf.truth_pose.orientation.x
    rec["truth_qy"] = tf.truth_pose.orientation.y
    rec["truth_qz"] = tf.truth_pose.orientation.z
    return json.dumps(rec, separators=(",", ":"))


def decode_truth(line: str) -> TruthFrame:
    meta = decode(line)
    rec = json.loads(line)
    truth_poi = GeodeticCoord(rec["truth_lat_deg"], rec["truth_lon_deg"], rec["truth_alt_m"])
    truth_pose = CameraPose(
        GeodeticCoord(rec["truth_cam_lat_deg"], rec["truth_cam_lon_deg"], rec["truth_cam_alt_m"]),
        Quaternion(rec["truth_qw"], rec["truth_qx"], rec["truth_qy"], rec["truth_qz"]),
    )
    truth_pixel = None
    if "truth_u_px" in rec:
        truth_pixel = PixelCoord(rec["truth_u_px"], rec["truth_v_px"])
    click_pixel = None
    if "click_u_px" in rec:
        click_pixel = PixelCoord(rec["click_u_px"], rec["click_v_px"])
    return TruthFrame(meta, truth_pose, truth_pixel, truth_poi, click_pixel)


@dataclass(frozen=True)
class GridCell:
    cell_index: int
    uav_id: str
    altitude_m: float
    pitch_deg: float
    velocity_mps: float
    telemetry_path: str
    truth_path: str
    frames: int


@dataclass(frozen=True)
class GridOutput:
    out_dir: Path
    manifest_path: Path
    cells: list[GridCell] = field(default_factory=list)


def _coord_dict(p: GeodeticCoord) -> dict:
    return {"lat_deg": p.lat_deg, "lon_deg": p.lon_deg, "alt_m": p.alt_m}


def scene_geometry(cfg: ScenarioConfig, grid_half_extent_m: float = 60.0,
                   grid_spacing_m: float = 10.0) -> dict:
    """Ground-referenced scene geometry for consoles: the target board's
    corners and a reference grid, all as geodetic points so clients never
    do coordinate math (straight ground lines stay straight under the
    pinhole model, so endpoints suffice)."""
    frame = enu_from(cfg.mission_origin)
    poi_e, poi_n, poi_up = to_enu(frame, cfg.poi_truth)
    half_e, half_n = WHITEBOARD_EAST_M / 2.0, WHITEBOARD_NORTH_M / 2.0
    corners = [
        _coord_dict(from_enu(frame, (poi_e + de, poi_n + dn, poi_up)))
        for de, dn in ((-half_e, -half_n), (half_e, -half_n),
                       (half_e, half_n), (-half_e, half_n))
    ]
    lines = []
    k = int(grid_half_extent_m / grid_spacing_m)
    for i in range(-k, k + 1):
        offset = i * grid_spacing_m
        lines.append([  # east-west line
            _coord_dict(from_enu(frame, (-grid_half_extent_m, offset, 0.0))),
            _coord_dict(from_enu(frame, (grid_half_extent_m, offset, 0.0))),
        ])
        lines.append([  # north-south line
            _coord_dict(from_enu(frame, (offset, -grid_half_extent_m, 0.0))),
            _coord_dict(from_enu(frame, (offset, grid_half_extent_m, 0.0))),
        ])
    return {"whiteboard_corners": corners, "grid_lines": lines}


def generate_grid(cfg: ScenarioConfig, noise: NoiseModel, out_dir: str | Path) -> GridOutput:
    """Generate every cell of the grid under out_dir.

    Writes cells/cell_NNN.telem (delivered telemetry) and .truth files plus
    a manifest.json tying cell parameters to file paths.
    """
    out = Path(out_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    cells: list[GridCell] = []
    for index, (altitude, pitch, velocity) in enumerate(cfg.cells()):
        uav_id = f"sim-{index:03d}"
        try:
            frames = generate_cell(cfg, noise, altitude, pitch, velocity,
                                   uav_id=uav_id, cell_index=index)
        except InfeasibleScenario as exc:
            raise InfeasibleScenario(
                f"cell {index} (alt {altitude}, pitch {pitch}, vel {velocity}): {exc}"
            ) from exc
        telem_path = cells_dir / f"cell_{index:03d}.telem"
        truth_path = cells_dir / f"cell_{index:03d}.truth"
        with open(telem_path, "w", encoding="utf-8", newline="\n") as telem_f:
            for tf in frames:
                telem_f.write(encode(tf.meta))
                telem_f.write("\n")
        with open(truth_path, "w", encoding="utf-8", newline="\n") as truth_f:
            for tf in frames:
                truth_f.write(encode_truth(tf))
                truth_f.write("\n")
        cells.append(GridCell(
            cell_index=index,
            uav_id=uav_id,
            altitude_m=altitude,
            pitch_deg=pitch,
            velocity_mps=velocity,
            telemetry_path=str(telem_path.relative_to(out)),
            truth_path=str(truth_path.relative_to(out)),
            frames=len(frames),
        ))

    manifest = {
        "config": {
            "altitudes_m": list(cfg.altitudes_m),
            "pitches_deg": list(cfg.pitches_deg),
            "velocities_mps": list(cfg.velocities_mps),
            "fps": cfg.fps,
            "frames_per_cell": cfg.frames_per_cell,
            "ground_alt_m": cfg.ground_alt_m,
            "rng_seed": cfg.rng_seed,
            "width_px": cfg.width_px,
            "height_px": cfg.height_px,
            "hfov_deg": cfg.hfov_deg,
        },
        "noise": {
            "gps_sigma_m": noise.gps_sigma_m,
            "alt_sigma_m": noise.alt_sigma_m,
            "orient_sigma_deg": noise.orient_sigma_deg,
            "pixel_sigma_px": noise.pixel_sigma_px,
        },
        "scene": {
            "mission_origin": _coord_dict(cfg.mission_origin),
            "poi_truth": _coord_dict(cfg.poi_truth),
            "ground_alt_m": cfg.ground_alt_m,
            "whiteboard_size_m": [WHITEBOARD_EAST_M, WHITEBOARD_NORTH_M],
            "intrinsics": {
                "width_px": cfg.width_px,
                "height_px": cfg.height_px,
                "hfov_deg": cfg.hfov_deg,
            },
            **scene_geometry(cfg),
        },
        "cells": [
            {
                "cell_index": c.cell_index,
                "uav_id": c.uav_id,
                "altitude_m": c.altitude_m,
                "pitch_deg": c.pitch_deg,
                "velocity_mps": c.velocity_mps,
                "telemetry": c.telemetry_path,
                "truth": c.truth_path,
                "frames": c.frames,
            }
            for c in cells
        ],
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return GridOutput(out_dir=out, manifest_path=manifest_path, cells=cells)


def load_manifest(grid_dir: str | Path) -> dict:
    path = Path(grid_dir)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def iter_truth_frames(grid_dir: str | Path, manifest: dict) -> Iterator[tuple[dict, TruthFrame]]:
    """Yield (cell manifest entry, TruthFrame) pairs across the whole grid."""
    base = Path(grid_dir)
    if base.is_file():
        base = base.parent
    for cell in manifest["cells"]:
        truth_path = base / cell["truth"]
        with open(truth_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield cell, decode_truth(line)
