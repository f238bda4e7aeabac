"""Command-line entry point: generate / serve / geolocate / project /
accuracy / scale.

Usage errors exit 2 (argparse's convention); runtime failures print one
machine-parsable "error: ..." line to stderr and exit 1.  All randomness
flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .geodesy import GeodeticCoord
from .projection import (
    BehindCamera,
    CameraIntrinsics,
    CameraPose,
    GroundModel,
    PixelCoord,
    Quaternion,
    RayMissesGround,
    geolocate,
    pose_from_gimbal,
    project,
)

SERVER_ENV_VAR = "SKYMARK_SERVER"


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _parse_pixel(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"pixel must be 'u,v': {text!r}")
    return float(parts[0]), float(parts[1])


def _add_frame_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lat", type=float, required=True, help="camera latitude, degrees")
    p.add_argument("--lon", type=float, required=True, help="camera longitude, degrees")
    p.add_argument("--alt", type=float, required=True, help="camera altitude, meters above the ellipsoid")
    p.add_argument("--heading", type=float, default=0.0, help="gimbal heading, degrees clockwise from north")
    p.add_argument("--pitch", type=float, default=90.0, help="gimbal pitch, degrees down from horizontal")
    p.add_argument("--quat", type=_parse_floats, default=None,
                   help="explicit orientation quaternion 'w,x,y,z' (overrides --heading/--pitch)")
    p.add_argument("--width", type=int, default=1920, help="frame width, pixels")
    p.add_argument("--height", type=int, default=1080, help="frame height, pixels")
    p.add_argument("--hfov", type=float, default=90.0, help="horizontal field of view, degrees")
    p.add_argument("--origin", type=_parse_floats, default=None,
                   help="mission origin 'lat,lon[,alt]' (default: camera lat,lon at ground altitude)")
    p.add_argument("--json", action="store_true", help="emit a single JSON line instead of text")


def _pose_from_args(args: argparse.Namespace) -> tuple[CameraPose, CameraIntrinsics, GeodeticCoord]:
    if args.quat is not None:
        if len(args.quat) != 4:
            raise ValueError("--quat needs four components w,x,y,z")
        orientation = Quaternion(*args.quat)
    else:
        orientation = pose_from_gimbal(args.heading, args.pitch)
    pose = CameraPose(GeodeticCoord(args.lat, args.lon, args.alt), orientation)
    intr = CameraIntrinsics(args.width, args.height, args.hfov)
    if args.origin is not None:
        if len(args.origin) == 2:
            origin = GeodeticCoord(args.origin[0], args.origin[1], 0.0)
        elif len(args.origin) == 3:
            origin = GeodeticCoord(*args.origin)
        else:
            raise ValueError("--origin needs 'lat,lon' or 'lat,lon,alt'")
    else:
        ground = getattr(args, "ground_alt", 0.0)
        origin = GeodeticCoord(args.lat, args.lon, ground)
    return pose, intr, origin


def _noise_from_args(args: argparse.Namespace):
    from .simkit import NoiseModel

    if args.noise == "none":
        return NoiseModel.zero()
    base = NoiseModel.default()
    return NoiseModel(
        gps_sigma_m=base.gps_sigma_m if args.gps_sigma is None else args.gps_sigma,
        alt_sigma_m=base.alt_sigma_m if args.alt_sigma is None else args.alt_sigma,
        orient_sigma_deg=base.orient_sigma_deg if args.orient_sigma is None else args.orient_sigma,
        pixel_sigma_px=base.pixel_sigma_px if args.pixel_sigma is None else args.pixel_sigma,
    )


def _config_from_args(args: argparse.Namespace):
    from .simkit import ScenarioConfig

    kwargs: dict = {"rng_seed": args.seed}
    if args.altitudes is not None:
        kwargs["altitudes_m"] = args.altitudes
    if args.pitches is not None:
        kwargs["pitches_deg"] = args.pitches
    if args.velocities is not None:
        kwargs["velocities_mps"] = args.velocities
    if args.frames_per_cell is not None:
        kwargs["frames_per_cell"] = args.frames_per_cell
    if args.fps is not None:
        kwargs["fps"] = args.fps
    kwargs["ground_alt_m"] = args.ground_alt
    if args.poi is not None:
        kwargs["poi_truth"] = GeodeticCoord(args.poi[0], args.poi[1], args.ground_alt)
    return ScenarioConfig(**kwargs)


def _add_grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for all scenario randomness")
    p.add_argument("--altitudes", type=_parse_floats, default=None, help="flight altitudes, meters above ground")
    p.add_argument("--pitches", type=_parse_floats, default=None, help="gimbal pitch angles, degrees")
    p.add_argument("--velocities", type=_parse_floats, default=None, help="flight velocities, m/s")
    p.add_argument("--frames-per-cell", type=int, default=None, help="truth frames per grid cell")
    p.add_argument("--fps", type=float, default=None, help="telemetry frame rate, Hz")
    p.add_argument("--ground-alt", type=float, default=0.0, help="ground altitude, meters above the ellipsoid")
    p.add_argument("--poi", type=_parse_floats, default=None, help="target position 'lat,lon' (at ground altitude)")
    p.add_argument("--noise", choices=["default", "none"], default="default", help="noise model preset")
    p.add_argument("--gps-sigma", type=float, default=None, help="horizontal GPS noise sigma, meters per axis")
    p.add_argument("--alt-sigma", type=float, default=None, help="altitude noise sigma, meters")
    p.add_argument("--orient-sigma", type=float, default=None, help="orientation noise sigma, degrees per axis")
    p.add_argument("--pixel-sigma", type=float, default=None, help="click noise sigma, pixels per axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skymark",
        description="Aerial POI geolocation engine, sync service, and experiment harnesses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic flight grid")
    p_gen.add_argument("--out", required=True, help="output directory")
    _add_grid_args(p_gen)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1", help="listen address")
    p_serve.add_argument("--port", type=int, default=8763, help="listen port (0 picks a free one)")
    p_serve.add_argument("--store", default=None, help="POI store file (default: in-memory)")
    p_serve.add_argument("--buffer-size", type=int, default=1000, help="per-subscriber stream buffer, records")
    p_serve.add_argument("--scene", default=None, help="grid manifest.json to serve at /v1/scene")
    p_serve.add_argument("--static", default=None, help="directory of console assets to serve at /")

    p_geo = sub.add_parser("geolocate", help="one-shot pixel -> ground query")
    _add_frame_args(p_geo)
    p_geo.add_argument("--pixel", type=_parse_pixel, required=True, help="pixel 'u,v'")
    p_geo.add_argument("--ground-alt", type=float, default=0.0, help="ground plane altitude, meters")
    p_geo.add_argument("--ellipsoid", action="store_true", help="intersect the ellipsoid instead of a local plane")

    p_proj = sub.add_parser("project", help="one-shot ground -> pixel query")
    _add_frame_args(p_proj)
    p_proj.add_argument("--poi", type=_parse_floats, required=True, help="POI 'lat,lon[,alt]'")
    p_proj.add_argument("--ground-alt", type=float, default=0.0, help="default POI altitude when omitted")

    p_acc = sub.add_parser("accuracy", help="run both accuracy harnesses")
    p_acc.add_argument("--out", required=True, help="output directory for CSVs (and the grid when generated)")
    p_acc.add_argument("--grid", choices=["default"], default=None,
                       help="generate this preset grid under --out before analyzing")
    p_acc.add_argument("--grid-dir", default=None, help="analyze an existing grid directory")
    p_acc.add_argument("--marker-at", choices=["truth", "computed"], default="truth",
                       help="where the reprojected marker is pinned")
    p_acc.add_argument("--marker-radius", type=float, default=10.0, help="marker disc radius, pixels")
    _add_grid_args(p_acc)

    p_scale = sub.add_parser("scale", help="run the multi-UAV scaling harness")
    p_scale.add_argument("--out", required=True, help="output directory for the perf CSV")
    p_scale.add_argument("--n-uavs", type=_parse_ints, default=[1, 2, 4, 8, 12],
                         help="comma-separated UAV counts")
    p_scale.add_argument("--fps", type=float, default=10.0, help="frames per second per UAV")
    p_scale.add_argument("--duration", type=float, default=60.0, help="seconds per UAV count")
    p_scale.add_argument("--server", default=None,
                         help=f"target server URL (default: self-hosted; falls back to ${SERVER_ENV_VAR})")
    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    from .simkit import generate_grid

    cfg = _config_from_args(args)
    noise = _noise_from_args(args)
    out = generate_grid(cfg, noise, args.out)
    print(f"wrote {len(out.cells)} cells to {out.manifest_path}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import socket

    import uvicorn

    from .server import create_app

    scene = None
    if args.scene is not None:
        with open(args.scene, encoding="utf-8") as f:
            scene = json.load(f).get("scene")
    app = create_app(
        store_path=args.store,
        stream_buffer=args.buffer_size,
        scene=scene,
        static_dir=args.static,
    )
    port = args.port
    if port == 0:
        with socket.socket() as s:
            s.bind((args.host, 0))
            port = s.getsockname()[1]
    print(f"listening on http://{args.host}:{port}", flush=True)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _cmd_geolocate(args: argparse.Namespace) -> int:
    pose, intr, origin = _pose_from_args(args)
    ground = GroundModel.ellipsoid(args.ground_alt) if args.ellipsoid \
        else GroundModel.plane(args.ground_alt)
    try:
        hit = geolocate(pose, intr, PixelCoord(*args.pixel), ground, origin)
    except RayMissesGround as exc:
        raise RuntimeError(f"ray_misses_ground: {exc}") from None
    if args.json:
        print(json.dumps({"lat_deg": hit.lat_deg, "lon_deg": hit.lon_deg, "alt_m": hit.alt_m}))
    else:
        print(f"lat {hit.lat_deg:.8f} lon {hit.lon_deg:.8f} alt {hit.alt_m:.3f}")
    return 0


def _cmd_project(args: argparse.Namespace) -> int:
    pose, intr, origin = _pose_from_args(args)
    poi = args.poi
    if len(poi) == 2:
        target = GeodeticCoord(poi[0], poi[1], args.ground_alt)
    elif len(poi) == 3:
        target = GeodeticCoord(*poi)
    else:
        raise ValueError("--poi needs 'lat,lon' or 'lat,lon,alt'")
    try:
        result = project(pose, intr, target, origin)
    except BehindCamera as exc:
        raise RuntimeError(f"behind_camera: {exc}") from None
    if args.json:
        print(json.dumps({"u_px": result.pixel.u, "v_px": result.pixel.v,
                          "in_frame": result.in_frame}))
    else:
        print(f"u {result.pixel.u:.3f} v {result.pixel.v:.3f} in_frame {result.in_frame}")
    return 0


def _cmd_accuracy(args: argparse.Namespace) -> int:
    from .analysis import (
        REFERENCE_MEAN_BY_ALTITUDE_M,
        REFERENCE_MEAN_BY_PITCH_M,
        emit_csv,
        emit_summary,
        run_geolocation_accuracy,
        run_marker_accuracy,
    )
    from .simkit import generate_grid

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.grid_dir is not None:
        grid_dir = Path(args.grid_dir)
    else:
        cfg = _config_from_args(args)
        noise = _noise_from_args(args)
        grid_dir = out / "grid"
        generate_grid(cfg, noise, grid_dir)
    geo_records, geo_summary = run_geolocation_accuracy(grid_dir)
    marker_records, marker_summary = run_marker_accuracy(
        grid_dir, marker_at=args.marker_at, marker_radius_px=args.marker_radius)
    emit_csv(geo_records, out / "geolocation_records.csv")
    emit_summary(geo_summary, out / "geolocation_summary.csv")
    emit_csv(marker_records, out / "marker_records.csv")
    emit_summary(marker_summary, out / "marker_summary.csv")
    print(f"geolocation: {len(geo_records)} frames; marker: {len(marker_records)} frames; "
          f"CSVs in {out}")
    # Field-study means shown for comparison; real-sensor noise is not
    # reproducible, so these are context, not targets.
    refs = {"altitude": REFERENCE_MEAN_BY_ALTITUDE_M, "pitch": REFERENCE_MEAN_BY_PITCH_M}
    for s in geo_summary:
        ref = refs[s.group].get(s.value)
        ref_txt = f" (field study: {ref} m)" if ref is not None else ""
        print(f"  {s.group} {s.value:g}: mean horizontal error {s.mean:.2f} m{ref_txt}")
    return 0


def _cmd_scale(args: argparse.Namespace) -> int:
    from .analysis import emit_perf_csv, run_scaling

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    server = args.server or os.environ.get(SERVER_ENV_VAR)
    records = run_scaling(args.n_uavs, fps=args.fps, duration_s=args.duration,
                          server_url=server)
    emit_perf_csv(records, out / "scaling.csv")
    for r in records:
        status = "OVERLOAD" if r.overload else "ok"
        print(f"n={r.n_uavs}: {r.records_per_s:.1f} rec/s p50={r.latency_p50_ms:.2f}ms "
              f"p99={r.latency_p99_ms:.2f}ms rss={r.peak_rss_mb:.1f}MB [{status}]")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "serve": _cmd_serve,
    "geolocate": _cmd_geolocate,
    "project": _cmd_project,
    "accuracy": _cmd_accuracy,
    "scale": _cmd_scale,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
