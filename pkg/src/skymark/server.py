"""HTTP service exposing geolocation, reprojection, POI sync, operator
state, and live telemetry streams.

All geometry runs server-side through the library, so every endpoint result
is bit-identical to the equivalent direct call; consoles never re-implement
geodesy.  Telemetry fan-out keeps no history: subscribers get records
published after they join, and a subscriber that stops reading is cut off
once its buffer fills rather than stalling the publisher.
"""

from __future__ import annotations

import asyncio
import math
from pathlib import Path
from typing import AsyncIterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .geodesy import GeodeticCoord, geodesic_distance
from .poi_store import (
    OperatorState,
    Poi,
    PoiStore,
    StorageFailure,
    UnknownPoi,
    UnknownTarget,
)
from .projection import (
    BehindCamera,
    CameraIntrinsics,
    CameraPose,
    GroundModel,
    PixelCoord,
    Quaternion,
    RayMissesGround,
    geolocate,
    marker_height,
    project,
)

DEFAULT_STREAM_BUFFER = 1000

SLOW_CONSUMER_LINE = '{"error":{"code":"slow_consumer","message":"subscriber fell behind and was disconnected"}}'


class ApiError(Exception):
    """Error carrying the wire code and HTTP status."""

    def __init__(self, code: str, message: str, status: int, detail: str | None = None):
        self.code = code
        self.message = message
        self.status = status
        self.detail = detail
        super().__init__(message)

    def response(self) -> JSONResponse:
        body = {"error": {"code": self.code, "message": self.message}}
        if self.detail is not None:
            body["error"]["detail"] = self.detail
        return JSONResponse(status_code=self.status, content=body)


def _bad_request(message: str) -> ApiError:
    return ApiError("bad_request", message, 400)


class _Subscriber:
    def __init__(self, buffer_size: int):
        self.queue: asyncio.Queue[str | None] = asyncio.Queue(maxsize=buffer_size)
        self.dropped = False


class StreamHub:
    """Per-UAV fan-out of telemetry lines, no replay, bounded buffers."""

    def __init__(self, buffer_size: int = DEFAULT_STREAM_BUFFER):
        self.buffer_size = buffer_size
        self._topics: dict[str, set[_Subscriber]] = {}

    def register(self, uav_id: str) -> None:
        self._topics.setdefault(uav_id, set())

    def known(self, uav_id: str) -> bool:
        return uav_id in self._topics

    def publish(self, uav_id: str, line: str) -> None:
        self.register(uav_id)
        for sub in list(self._topics[uav_id]):
            if sub.dropped:
                continue
            try:
                sub.queue.put_nowait(line)
            except asyncio.QueueFull:
                # Make room for the farewell line, then cut the subscriber off.
                sub.dropped = True
                self._topics[uav_id].discard(sub)
                try:
                    sub.queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass
                sub.queue.put_nowait(None)

    async def subscribe(self, uav_id: str) -> AsyncIterator[str]:
        if uav_id not in self._topics:
            raise ApiError("not_found", f"no stream for uav {uav_id!r}", 404)
        sub = _Subscriber(self.buffer_size)
        self._topics[uav_id].add(sub)
        try:
            while True:
                line = await sub.queue.get()
                if line is None:
                    yield SLOW_CONSUMER_LINE + "\n"
                    return
                yield line + "\n"
        finally:
            self._topics.get(uav_id, set()).discard(sub)


# -- request parsing ---------------------------------------------------------

def _get_float(body: dict, key: str) -> float:
    if key not in body:
        raise _bad_request(f"missing field {key!r}")
    value = body[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _bad_request(f"field {key!r} is not numeric")
    value = float(value)
    if not math.isfinite(value):
        raise _bad_request(f"field {key!r} is not finite")
    return value


def _get_int(body: dict, key: str) -> int:
    if key not in body:
        raise _bad_request(f"missing field {key!r}")
    value = body[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise _bad_request(f"field {key!r} is not an integer")
    return value


def _opt_float(body: dict, key: str, default: float) -> float:
    return _get_float(body, key) if key in body else default


def _parse_frame(body: dict) -> tuple[CameraPose, CameraIntrinsics]:
    try:
        position = GeodeticCoord(
            _get_float(body, "lat_deg"),
            _get_float(body, "lon_deg"),
            _get_float(body, "alt_m"),
        )
        orientation = Quaternion(
            _get_float(body, "qw"), _get_float(body, "qx"),
            _get_float(body, "qy"), _get_float(body, "qz"),
        )
        intr = CameraIntrinsics(
            _get_int(body, "width_px"),
            _get_int(body, "height_px"),
            _get_float(body, "hfov_deg"),
        )
    except ValueError as exc:
        raise _bad_request(str(exc)) from None
    return CameraPose(position, orientation), intr


def _parse_origin(body: dict) -> GeodeticCoord:
    try:
        return GeodeticCoord(
            _get_float(body, "origin_lat_deg"),
            _get_float(body, "origin_lon_deg"),
            _opt_float(body, "origin_alt_m", 0.0),
        )
    except ValueError as exc:
        raise _bad_request(str(exc)) from None


def _parse_ground(body: dict) -> GroundModel:
    mode = body.get("ground_mode", "plane")
    if mode == "plane":
        return GroundModel.plane(_opt_float(body, "ground_alt_m", 0.0))
    if mode == "ellipsoid":
        return GroundModel.ellipsoid(_opt_float(body, "offset_alt_m", 0.0))
    raise _bad_request(f"unknown ground_mode {mode!r}")


def _coord_json(p: GeodeticCoord) -> dict:
    return {"lat_deg": p.lat_deg, "lon_deg": p.lon_deg, "alt_m": p.alt_m}


def _poi_json(p: Poi) -> dict:
    return {
        "id": p.id,
        "kind": p.kind,
        "label": p.label,
        "lat_deg": p.location.lat_deg,
        "lon_deg": p.location.lon_deg,
        "alt_m": p.location.alt_m,
        "created_by": p.created_by,
        "created_at_ms": p.created_at_ms,
        "revision": p.revision,
        "deleted": p.deleted,
    }


def _operator_json(s: OperatorState) -> dict:
    rec = {
        "id": s.id,
        "role": s.role,
        "updated_at_ms": s.updated_at_ms,
        "next_target": s.next_target,
        "location": _coord_json(s.location) if s.location is not None else None,
    }
    return rec


async def _read_json(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise _bad_request("body is not valid JSON") from None
    if not isinstance(body, dict):
        raise _bad_request("body must be a JSON object")
    return body


def create_app(
    store_path: str | Path | None = None,
    stream_buffer: int = DEFAULT_STREAM_BUFFER,
    scene: dict | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="skymark", docs_url=None, redoc_url=None)
    store = PoiStore(store_path)
    hub = StreamHub(stream_buffer)
    app.state.store = store
    app.state.hub = hub
    app.state.scene = scene

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return exc.response()

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"ok": True}

    @app.post("/v1/geolocate")
    async def geolocate_endpoint(request: Request) -> dict:
        body = await _read_json(request)
        pose, intr = _parse_frame(body)
        px = PixelCoord(_get_float(body, "u_px"), _get_float(body, "v_px"))
        ground = _parse_ground(body)
        origin = _parse_origin(body)
        try:
            hit = geolocate(pose, intr, px, ground, origin)
        except RayMissesGround as exc:
            raise ApiError("ray_misses_ground", str(exc), 422) from None
        except ValueError as exc:
            raise _bad_request(str(exc)) from None
        return _coord_json(hit)

    @app.post("/v1/project")
    async def project_endpoint(request: Request) -> dict:
        body = await _read_json(request)
        pose, intr = _parse_frame(body)
        try:
            poi = GeodeticCoord(
                _get_float(body, "poi_lat_deg"),
                _get_float(body, "poi_lon_deg"),
                _opt_float(body, "poi_alt_m", 0.0),
            )
        except ValueError as exc:
            raise _bad_request(str(exc)) from None
        origin = _parse_origin(body)
        try:
            result = project(pose, intr, poi, origin)
        except BehindCamera as exc:
            raise ApiError("behind_camera", str(exc), 422) from None
        return {"u_px": result.pixel.u, "v_px": result.pixel.v, "in_frame": result.in_frame}

    @app.post("/v1/pois")
    def add_poi_endpoint(body: dict) -> dict:
        if not isinstance(body, dict):
            raise _bad_request("body must be a JSON object")
        kind = body.get("kind")
        created_by = body.get("created_by")
        if not isinstance(kind, str):
            raise _bad_request("missing field 'kind'")
        if not isinstance(created_by, str):
            raise _bad_request("missing field 'created_by'")
        label = body.get("label")
        if label is not None and not isinstance(label, str):
            raise _bad_request("field 'label' is not a string")
        try:
            location = GeodeticCoord(
                _get_float(body, "lat_deg"),
                _get_float(body, "lon_deg"),
                _opt_float(body, "alt_m", 0.0),
            )
            poi = store.add_poi(kind, location, created_by, label)
        except ValueError as exc:
            raise _bad_request(str(exc)) from None
        except StorageFailure as exc:
            raise ApiError("storage_failure", str(exc), 500) from None
        return _poi_json(poi)

    @app.get("/v1/pois")
    def get_pois_endpoint(cursor: int = 0, operator: str | None = None) -> dict:
        pois, new_cursor = store.get_pois(cursor)
        items = [_poi_json(p) for p in pois]
        if operator is not None:
            # Annotate with the asking operator's distances so consoles
            # never do their own geodesy.
            ops = {s.id: s for s in store.list_operators()}
            state = ops.get(operator)
            if state is not None and state.location is not None:
                for item in items:
                    dist = geodesic_distance(
                        state.location,
                        GeodeticCoord(item["lat_deg"], item["lon_deg"], item["alt_m"]),
                    )
                    item["dist_m"] = dist
                    item["marker_height_m"] = marker_height(dist)
        return {"pois": items, "cursor": new_cursor}

    @app.post("/v1/operators/{operator_id}")
    def update_operator_endpoint(operator_id: str, body: dict) -> dict:
        if not isinstance(body, dict):
            raise _bad_request("body must be a JSON object")
        role = body.get("role")
        if not isinstance(role, str):
            raise _bad_request("missing field 'role'")
        location = None
        if "lat_deg" in body:
            try:
                location = GeodeticCoord(
                    _get_float(body, "lat_deg"),
                    _get_float(body, "lon_deg"),
                    _opt_float(body, "alt_m", 0.0),
                )
            except ValueError as exc:
                raise _bad_request(str(exc)) from None
        next_target = body.get("next_target")
        if next_target is not None and not isinstance(next_target, str):
            raise _bad_request("field 'next_target' is not a string")
        try:
            state = store.update_operator(operator_id, role, location, next_target)
        except UnknownTarget as exc:
            raise ApiError("not_found", f"next_target {exc} does not exist", 404) from None
        except ValueError as exc:
            raise _bad_request(str(exc)) from None
        except StorageFailure as exc:
            raise ApiError("storage_failure", str(exc), 500) from None
        return _operator_json(state)

    @app.get("/v1/operators")
    def list_operators_endpoint() -> dict:
        return {"operators": [_operator_json(s) for s in store.list_operators()]}

    @app.post("/v1/streams/{uav_id}")
    async def publish_endpoint(uav_id: str, request: Request) -> dict:
        from .telemetry import MalformedRecord, decode

        hub.register(uav_id)
        published = 0
        malformed = 0
        buffer = b""
        async for chunk in request.stream():
            buffer += chunk
            while b"\n" in buffer:
                raw, buffer = buffer.split(b"\n", 1)
                text = raw.decode("utf-8", errors="replace").strip()
                if not text:
                    continue
                try:
                    decode(text)
                except MalformedRecord:
                    malformed += 1
                    continue
                hub.publish(uav_id, text)
                published += 1
        tail = buffer.decode("utf-8", errors="replace").strip()
        if tail:
            try:
                decode(tail)
                hub.publish(uav_id, tail)
                published += 1
            except MalformedRecord:
                malformed += 1
        return {"published": published, "malformed": malformed}

    @app.get("/v1/streams/{uav_id}")
    async def subscribe_endpoint(uav_id: str) -> StreamingResponse:
        if not hub.known(uav_id):
            raise ApiError("not_found", f"no stream for uav {uav_id!r}", 404)
        return StreamingResponse(hub.subscribe(uav_id), media_type="application/x-ndjson")

    @app.get("/v1/scene")
    async def scene_endpoint() -> dict:
        if app.state.scene is None:
            raise ApiError("not_found", "no scene configured", 404)
        return app.state.scene

    @app.get("/v1/pois/{poi_id}")
    def get_poi_endpoint(poi_id: str) -> dict:
        try:
            return _poi_json(store.get_poi(poi_id))
        except UnknownPoi:
            raise ApiError("not_found", f"poi {poi_id!r} does not exist", 404) from None

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
