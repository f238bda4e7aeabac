"""Experiment harnesses: geolocation accuracy, marker pixel distance, and
multi-UAV scaling, all emitting deterministic CSV tables.

Accuracy metrics follow the field methodology: horizontal error is the
ellipsoidal geodesic distance between the computed and true target
positions, and marker error is the Euclidean pixel distance between the
reprojected marker and the target's image, forced to zero when the marker
disc and the target's projected extent overlap.  Velocity appears in the
per-frame records but not in the summaries; it has no effect on a single
frame's geolocation.
"""

from __future__ import annotations

import math
import socket
import statistics
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import psutil

from .geodesy import GeodeticCoord, geodesic_distance
from .projection import (
    BehindCamera,
    GroundModel,
    PixelCoord,
    RayMissesGround,
    geolocate,
    project,
)
from .simkit import (
    WHITEBOARD_EAST_M,
    WHITEBOARD_NORTH_M,
    TruthFrame,
    iter_truth_frames,
    load_manifest,
)
from .telemetry import FrameMeta, encode

DEFAULT_MARKER_RADIUS_PX = 10.0

# Reported field means, for side-by-side comparison only (real-sensor noise
# is not reproducible): by altitude 10/20/30 m and by pitch 45/60/75/90 deg.
REFERENCE_MEAN_BY_ALTITUDE_M = {10.0: 1.3, 20.0: 2.5, 30.0: 2.9}
REFERENCE_MEAN_BY_PITCH_M = {45.0: 3.6, 60.0: 2.2, 75.0: 1.8, 90.0: 1.5}


class MissingTruth(Exception):
    """The grid directory lacks the manifest or truth files."""


class ServerUnavailable(Exception):
    """The scaling harness could not reach (or start) the server."""


@dataclass(frozen=True)
class AccuracyRecord:
    altitude_m: float
    pitch_deg: float
    velocity_mps: float
    frame_seq: int
    horiz_err_m: float
    pixel_dist_px: float


@dataclass(frozen=True)
class CellSummary:
    metric: str      # "horiz_err_m" | "pixel_dist_px"
    group: str       # "altitude" | "pitch"
    value: float
    n: int
    mean: float
    median: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class PerfRecord:
    n_uavs: int
    records_per_s: float
    latency_p50_ms: float
    latency_p99_ms: float
    peak_rss_mb: float
    cpu_time_s: float
    overload: bool


def euclidean_px(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def overlap_distance(dist_px: float, marker_radius_px: float, poi_radius_px: float) -> float:
    """The marker/target pixel distance with the overlap rule applied:
    zero whenever the two extents touch."""
    if dist_px <= marker_radius_px + poi_radius_px:
        return 0.0
    return dist_px


def _summarize(records: list[AccuracyRecord], metric: str) -> list[CellSummary]:
    summaries: list[CellSummary] = []
    for group, key in (("altitude", lambda r: r.altitude_m), ("pitch", lambda r: r.pitch_deg)):
        buckets: dict[float, list[float]] = {}
        for rec in records:
            buckets.setdefault(key(rec), []).append(getattr(rec, metric))
        for value in sorted(buckets):
            xs = buckets[value]
            summaries.append(CellSummary(
                metric=metric,
                group=group,
                value=value,
                n=len(xs),
                mean=statistics.fmean(xs),
                median=statistics.median(xs),
                std=statistics.pstdev(xs) if len(xs) > 1 else 0.0,
                min=min(xs),
                max=max(xs),
            ))
    return summaries


def _load_grid(grid_dir: str | Path) -> tuple[dict, list[tuple[dict, TruthFrame]]]:
    try:
        manifest = load_manifest(grid_dir)
    except FileNotFoundError as exc:
        raise MissingTruth(str(exc)) from None
    try:
        frames = list(iter_truth_frames(grid_dir, manifest))
    except FileNotFoundError as exc:
        raise MissingTruth(str(exc)) from None
    return manifest, frames


def _scene_origin(manifest: dict) -> tuple[GeodeticCoord, float]:
    scene = manifest["scene"]
    o = scene["mission_origin"]
    return (
        GeodeticCoord(o["lat_deg"], o["lon_deg"], o["alt_m"]),
        scene["ground_alt_m"],
    )


def run_geolocation_accuracy(
    grid_dir: str | Path,
) -> tuple[list[AccuracyRecord], list[CellSummary]]:
    """Geolocate every truth frame from its delivered metadata and click
    pixel, scored against the true target position."""
    manifest, frames = _load_grid(grid_dir)
    origin, ground_alt = _scene_origin(manifest)
    ground = GroundModel.plane(ground_alt)

    records: list[AccuracyRecord] = []
    for cell, tf in frames:
        if tf.click_pixel is None:
            continue
        try:
            computed = geolocate(tf.meta.pose, tf.meta.intr, tf.click_pixel, ground, origin)
        except RayMissesGround:
            continue
        records.append(AccuracyRecord(
            altitude_m=cell["altitude_m"],
            pitch_deg=cell["pitch_deg"],
            velocity_mps=cell["velocity_mps"],
            frame_seq=tf.meta.seq,
            horiz_err_m=geodesic_distance(computed, tf.truth_poi),
            pixel_dist_px=0.0,
        ))
    return records, _summarize(records, "horiz_err_m")


def _poi_extent_px(tf: TruthFrame, origin: GeodeticCoord) -> float:
    """Projected half-extent of the target board around its image center,
    from the noiseless pose (the board's appearance is physical truth)."""
    from .geodesy import enu_from, from_enu, to_enu

    frame = enu_from(origin)
    e, n, u = to_enu(frame, tf.truth_poi)
    half_e = WHITEBOARD_EAST_M / 2.0
    half_n = WHITEBOARD_NORTH_M / 2.0
    radius = 0.0
    for de, dn in ((half_e, half_n), (half_e, -half_n), (-half_e, half_n), (-half_e, -half_n)):
        corner = from_enu(frame, (e + de, n + dn, u))
        try:
            proj = project(tf.truth_pose, tf.meta.intr, corner, origin)
        except BehindCamera:
            continue
        radius = max(radius, euclidean_px(
            (proj.pixel.u, proj.pixel.v), (tf.truth_pixel.u, tf.truth_pixel.v)))
    return radius


def run_marker_accuracy(
    grid_dir: str | Path,
    marker_at: str = "truth",
    marker_radius_px: float = DEFAULT_MARKER_RADIUS_PX,
) -> tuple[list[AccuracyRecord], list[CellSummary]]:
    """Reproject the marker into each frame and measure its pixel distance
    to the target's image.

    marker_at="truth" pins the marker at the true target position (the
    field method); marker_at="computed" places it at the geolocation
    computed from the delivered metadata and click, exercising the whole
    annotate-then-augment loop.
    """
    if marker_at not in ("truth", "computed"):
        raise ValueError("marker_at must be 'truth' or 'computed'")
    manifest, frames = _load_grid(grid_dir)
    origin, ground_alt = _scene_origin(manifest)
    ground = GroundModel.plane(ground_alt)

    records: list[AccuracyRecord] = []
    for cell, tf in frames:
        if tf.truth_pixel is None:
            continue
        horiz_err = 0.0
        if marker_at == "truth":
            marker_poi = tf.truth_poi
        else:
            if tf.click_pixel is None:
                continue
            try:
                marker_poi = geolocate(tf.meta.pose, tf.meta.intr, tf.click_pixel, ground, origin)
            except RayMissesGround:
                continue
            horiz_err = geodesic_distance(marker_poi, tf.truth_poi)
        try:
            marker = project(tf.meta.pose, tf.meta.intr, marker_poi, origin)
        except BehindCamera:
            continue
        raw = euclidean_px((marker.pixel.u, marker.pixel.v),
                           (tf.truth_pixel.u, tf.truth_pixel.v))
        dist = overlap_distance(raw, marker_radius_px, _poi_extent_px(tf, origin))
        records.append(AccuracyRecord(
            altitude_m=cell["altitude_m"],
            pitch_deg=cell["pitch_deg"],
            velocity_mps=cell["velocity_mps"],
            frame_seq=tf.meta.seq,
            horiz_err_m=horiz_err,
            pixel_dist_px=dist,
        ))
    return records, _summarize(records, "pixel_dist_px")


# -- CSV output ---------------------------------------------------------------

RECORDS_HEADER = "altitude_m,pitch_deg,velocity_mps,frame_seq,horiz_err_m,pixel_dist_px"
SUMMARY_HEADER = "metric,group,value,n,mean,median,std,min,max"
PERF_HEADER = "n_uavs,records_per_s,latency_p50_ms,latency_p99_ms,peak_rss_mb,cpu_time_s,overload"


def emit_csv(records: list[AccuracyRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(RECORDS_HEADER + "\n")
        for r in records:
            f.write(f"{r.altitude_m!r},{r.pitch_deg!r},{r.velocity_mps!r},"
                    f"{r.frame_seq},{r.horiz_err_m!r},{r.pixel_dist_px!r}\n")


def emit_summary(summaries: list[CellSummary], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(SUMMARY_HEADER + "\n")
        for s in summaries:
            f.write(f"{s.metric},{s.group},{s.value!r},{s.n},{s.mean!r},"
                    f"{s.median!r},{s.std!r},{s.min!r},{s.max!r}\n")


def emit_perf_csv(records: list[PerfRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(PERF_HEADER + "\n")
        for r in records:
            f.write(f"{r.n_uavs},{r.records_per_s!r},{r.latency_p50_ms!r},"
                    f"{r.latency_p99_ms!r},{r.peak_rss_mb!r},{r.cpu_time_s!r},"
                    f"{int(r.overload)}\n")


# -- scaling harness ----------------------------------------------------------

def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_ready(client: httpx.Client, base_url: str, timeout_s: float = 15.0) -> None:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            if client.get(base_url + "/healthz", timeout=1.0).status_code == 200:
                return
        except httpx.HTTPError:
            time.sleep(0.05)
    raise ServerUnavailable(f"server at {base_url} never became ready")


def _scaling_frame(uav_id: str, seq: int) -> FrameMeta:
    from .projection import CameraIntrinsics, CameraPose, pose_from_gimbal
    from .simkit import DEFAULT_SITE_LAT, DEFAULT_SITE_LON

    return FrameMeta(
        uav_id=uav_id,
        seq=seq,
        t_ms=time.time_ns() // 1_000_000,
        pose=CameraPose(
            GeodeticCoord(DEFAULT_SITE_LAT, DEFAULT_SITE_LON, 30.0),
            pose_from_gimbal(0.0, 90.0),
        ),
        intr=CameraIntrinsics(1920, 1080, 90.0),
    )


class _LoadWorker(threading.Thread):
    """One UAV: paced publishing plus one projection request per frame."""

    def __init__(self, base_url: str, uav_id: str, fps: float, total: int):
        super().__init__(daemon=True)
        self.base_url = base_url
        self.uav_id = uav_id
        self.fps = fps
        self.total = total
        self.latencies_ms: list[float] = []
        self.published = 0
        self.projected = 0
        self.error: Exception | None = None

    def run(self) -> None:
        try:
            with httpx.Client(base_url=self.base_url, timeout=10.0) as client:
                start = time.monotonic()
                for seq in range(self.total):
                    target = start + seq / self.fps
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                    frame = _scaling_frame(self.uav_id, seq)
                    line = encode(frame)
                    client.post(f"/v1/streams/{self.uav_id}", content=line + "\n")
                    self.published += 1
                    body = dict(
                        lat_deg=frame.pose.position.lat_deg,
                        lon_deg=frame.pose.position.lon_deg,
                        alt_m=frame.pose.position.alt_m,
                        qw=frame.pose.orientation.w, qx=frame.pose.orientation.x,
                        qy=frame.pose.orientation.y, qz=frame.pose.orientation.z,
                        hfov_deg=frame.intr.hfov_deg,
                        width_px=frame.intr.width_px, height_px=frame.intr.height_px,
                        poi_lat_deg=frame.pose.position.lat_deg,
                        poi_lon_deg=frame.pose.position.lon_deg,
                        poi_alt_m=0.0,
                        origin_lat_deg=frame.pose.position.lat_deg,
                        origin_lon_deg=frame.pose.position.lon_deg,
                        origin_alt_m=0.0,
                    )
                    t0 = time.perf_counter()
                    resp = client.post("/v1/project", json=body)
                    self.latencies_ms.append((time.perf_counter() - t0) * 1000.0)
                    if resp.status_code == 200:
                        self.projected += 1
        except Exception as exc:  # collected by the harness, not raised here
            self.error = exc


class _SubscriberWorker(threading.Thread):
    """Tails one UAV stream, verifying per-UAV order."""

    def __init__(self, base_url: str, uav_id: str, expected: int):
        super().__init__(daemon=True)
        self.base_url = base_url
        self.uav_id = uav_id
        self.expected = expected
        self.received = 0
        self.in_order = True
        self.stop = threading.Event()

    def run(self) -> None:
        import json as _json

        last_seq = -1
        try:
            with httpx.Client(base_url=self.base_url, timeout=httpx.Timeout(10.0, read=2.0)) as client:
                with client.stream("GET", f"/v1/streams/{self.uav_id}") as resp:
                    for line in resp.iter_lines():
                        if not line:
                            continue
                        rec = _json.loads(line)
                        if "error" in rec:
                            break
                        if rec.get("seq", -1) <= last_seq:
                            self.in_order = False
                        last_seq = rec.get("seq", last_seq)
                        self.received += 1
                        if self.received >= self.expected or self.stop.is_set():
                            break
        except httpx.HTTPError:
            pass  # read timeout after publishers finish is the normal exit


class _MemoryMonitor(threading.Thread):
    def __init__(self, pid: int):
        super().__init__(daemon=True)
        self.proc = psutil.Process(pid)
        self.peak_rss = 0
        self.stop = threading.Event()

    def run(self) -> None:
        while not self.stop.is_set():
            try:
                self.peak_rss = max(self.peak_rss, self.proc.memory_info().rss)
            except psutil.Error:
                return
            self.stop.wait(0.2)


def _drive_load(base_url: str, n_uavs: int, fps: float, duration_s: float,
                server_pid: int | None) -> PerfRecord:
    total_per_uav = max(1, round(fps * duration_s))
    workers = [_LoadWorker(base_url, f"load-{i:02d}", fps, total_per_uav)
               for i in range(n_uavs)]
    # Register topics so subscribers can attach before the first frame.
    with httpx.Client(base_url=base_url, timeout=10.0) as client:
        for w in workers:
            client.post(f"/v1/streams/{w.uav_id}", content="")
    subscribers = [_SubscriberWorker(base_url, w.uav_id, total_per_uav) for w in workers]

    monitor = _MemoryMonitor(server_pid) if server_pid is not None else None
    cpu0 = psutil.Process(server_pid).cpu_times() if server_pid is not None else None
    if monitor:
        monitor.start()
    for s in subscribers:
        s.start()
    started = time.monotonic()
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    elapsed = time.monotonic() - started
    for s in subscribers:
        s.stop.set()
    for s in subscribers:
        s.join(timeout=5.0)

    peak_rss_mb = 0.0
    cpu_time_s = 0.0
    if monitor:
        monitor.stop.set()
        monitor.join(timeout=2.0)
        peak_rss_mb = monitor.peak_rss / (1024.0 * 1024.0)
    if cpu0 is not None:
        try:
            cpu1 = psutil.Process(server_pid).cpu_times()
            cpu_time_s = (cpu1.user - cpu0.user) + (cpu1.system - cpu0.system)
        except psutil.Error:
            pass

    for w in workers:
        if w.error is not None:
            raise ServerUnavailable(f"load worker {w.uav_id} failed: {w.error}")
    if not all(s.in_order for s in subscribers):
        raise ServerUnavailable("stream fan-out delivered records out of order")

    latencies = sorted(x for w in workers for x in w.latencies_ms)
    total = sum(w.projected for w in workers)
    rate = total / elapsed if elapsed > 0 else 0.0
    if latencies:
        grid = statistics.quantiles(latencies, n=100, method="inclusive")
        p50, p99 = grid[49], grid[98]
    else:
        p50 = p99 = 0.0
    return PerfRecord(
        n_uavs=n_uavs,
        records_per_s=rate,
        latency_p50_ms=p50,
        latency_p99_ms=p99,
        peak_rss_mb=peak_rss_mb,
        cpu_time_s=cpu_time_s,
        overload=rate < 0.95 * n_uavs * fps,
    )


def run_scaling(
    n_uavs_list: list[int] | None = None,
    fps: float = 10.0,
    duration_s: float = 60.0,
    server_url: str | None = None,
) -> list[PerfRecord]:
    """Drive n simulated UAV streams through the server, one projection per
    frame, and record throughput, latency percentiles, and peak memory.

    With no server_url the harness runs its own server subprocess per
    n-value, which is also what makes the memory/CPU numbers attributable.
    Against a remote server_url those two columns are reported as zero.
    """
    if n_uavs_list is None:
        n_uavs_list = [1, 2, 4, 8, 12]
    if any(n < 1 for n in n_uavs_list):
        raise ValueError("n_uavs must be >= 1")

    records: list[PerfRecord] = []
    for n in n_uavs_list:
        if server_url is not None:
            with httpx.Client() as client:
                _wait_ready(client, server_url.rstrip("/"), timeout_s=5.0)
            records.append(_drive_load(server_url.rstrip("/"), n, fps, duration_s, None))
            continue
        port = _free_port()
        base_url = f"http://127.0.0.1:{port}"
        proc = subprocess.Popen(
            [sys.executable, "-m", "skymark.cli", "serve",
             "--host", "127.0.0.1", "--port", str(port)],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            with httpx.Client() as client:
                _wait_ready(client, base_url)
            records.append(_drive_load(base_url, n, fps, duration_s, proc.pid))
        finally:
            proc.terminate()
            try:
                proc.wait(timeout=10.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
    return records
