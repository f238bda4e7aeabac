"""Frame-metadata model and newline-delimited wire format for UAV telemetry.

One record per line, UTF-8 JSON objects with a flat key set.  Floats are
emitted with shortest round-trip precision so decode(encode(f)) reproduces
every bit.  Unknown keys are ignored on decode for forward compatibility.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .geodesy import GeodeticCoord
from .projection import CameraIntrinsics, CameraPose, Quaternion

WIRE_KEYS = (
    "uav_id", "seq", "t_ms",
    "lat_deg", "lon_deg", "alt_m",
    "qw", "qx", "qy", "qz",
    "hfov_deg", "width_px", "height_px",
)

_FLOAT_KEYS = ("lat_deg", "lon_deg", "alt_m", "qw", "qx", "qy", "qz", "hfov_deg")
_INT_KEYS = ("seq", "t_ms", "width_px", "height_px")

_QUAT_NORM_TOL = 1e-6


class MalformedRecord(Exception):
    """A wire line that cannot be decoded into a FrameMeta."""

    def __init__(self, reason: str, line_no: int | None = None):
        self.reason = reason
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{reason}{where}")


class OutOfOrder(Exception):
    """Per-UAV sequence or timestamp monotonicity violation."""

    def __init__(self, reason: str, line_no: int | None = None):
        self.reason = reason
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{reason}{where}")


@dataclass(frozen=True)
class FrameMeta:
    """One telemetry sample: who, when, and the full camera state."""

    uav_id: str
    seq: int
    t_ms: int
    pose: CameraPose
    intr: CameraIntrinsics


def encode(f: FrameMeta) -> str:
    """Serialize a FrameMeta to one wire line (no trailing newline)."""
    record = {
        "uav_id": f.uav_id,
        "seq": f.seq,
        "t_ms": f.t_ms,
        "lat_deg": f.pose.position.lat_deg,
        "lon_deg": f.pose.position.lon_deg,
        "alt_m": f.pose.position.alt_m,
        "qw": f.pose.orientation.w,
        "qx": f.pose.orientation.x,
        "qy": f.pose.orientation.y,
        "qz": f.pose.orientation.z,
        "hfov_deg": f.intr.hfov_deg,
        "width_px": f.intr.width_px,
        "height_px": f.intr.height_px,
    }
    return json.dumps(record, separators=(",", ":"))


def _require_float(rec: dict, key: str, line_no: int | None) -> float:
    value = rec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(f"field {key!r} is not numeric", line_no)
    value = float(value)
    if not math.isfinite(value):
        raise MalformedRecord(f"field {key!r} is not finite", line_no)
    return value


def _require_int(rec: dict, key: str, line_no: int | None) -> int:
    value = rec[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord(f"field {key!r} is not an integer", line_no)
    return value


def decode(line: str, line_no: int | None = None) -> FrameMeta:
    """Parse one wire line into a FrameMeta.

    Raises MalformedRecord for anything that is not a complete record:
    bad JSON, missing keys, non-numeric fields, or a quaternion whose norm
    deviates from 1 by 1e-6 or more.  Smaller deviations are re-normalized.
    """
    try:
        rec = json.loads(line)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise MalformedRecord(f"invalid record syntax: {exc}", line_no) from None
    if not isinstance(rec, dict):
        raise MalformedRecord("record is not a key/value object", line_no)
    missing = [k for k in WIRE_KEYS if k not in rec]
    if missing:
        raise MalformedRecord(f"missing key {missing[0]!r}", line_no)

    uav_id = rec["uav_id"]
    if not isinstance(uav_id, str) or not uav_id:
        raise MalformedRecord("field 'uav_id' is not a non-empty string", line_no)
    ints = {k: _require_int(rec, k, line_no) for k in _INT_KEYS}
    floats = {k: _require_float(rec, k, line_no) for k in _FLOAT_KEYS}

    norm = math.sqrt(floats["qw"]**2 + floats["qx"]**2 + floats["qy"]**2 + floats["qz"]**2)
    if abs(norm - 1.0) >= _QUAT_NORM_TOL:
        raise MalformedRecord(f"quaternion norm {norm!r} deviates by >= {_QUAT_NORM_TOL}", line_no)
    try:
        quat = Quaternion(floats["qw"], floats["qx"], floats["qy"], floats["qz"])
        position = GeodeticCoord(floats["lat_deg"], floats["lon_deg"], floats["alt_m"])
        intr = CameraIntrinsics(ints["width_px"], ints["height_px"], floats["hfov_deg"])
    except ValueError as exc:
        raise MalformedRecord(str(exc), line_no) from None
    return FrameMeta(
        uav_id=uav_id,
        seq=ints["seq"],
        t_ms=ints["t_ms"],
        pose=CameraPose(position, quat),
        intr=intr,
    )


@dataclass(frozen=True)
class StreamError:
    """One skipped line: its number, the offending text, and the reason."""

    line_no: int
    kind: str  # "malformed" | "out_of_order"
    reason: str


class TelemetryReader:
    """Iterates FrameMeta records from newline-delimited lines.

    Malformed lines and per-UAV ordering violations are skipped and
    collected in .errors so a live stream never dies on one bad frame.
    Records from different UAVs may interleave freely; per-UAV order is
    what gets checked.
    """

    def __init__(self, source: Iterable[str] | IO[str]):
        self._source = source
        self.errors: list[StreamError] = []
        self._last: dict[str, tuple[int, int]] = {}  # uav_id -> (seq, t_ms)

    def __iter__(self) -> Iterator[FrameMeta]:
        for line_no, line in enumerate(self._source, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                meta = decode(text, line_no)
            except MalformedRecord as exc:
                self.errors.append(StreamError(line_no, "malformed", exc.reason))
                continue
            last = self._last.get(meta.uav_id)
            if last is not None:
                last_seq, last_t = last
                if meta.seq <= last_seq:
                    self.errors.append(StreamError(
                        line_no, "out_of_order",
                        f"uav {meta.uav_id!r} seq {meta.seq} after {last_seq}"))
                    continue
                if meta.t_ms < last_t:
                    self.errors.append(StreamError(
                        line_no, "out_of_order",
                        f"uav {meta.uav_id!r} t_ms {meta.t_ms} after {last_t}"))
                    continue
            self._last[meta.uav_id] = (meta.seq, meta.t_ms)
            yield meta


def stream_reader(source: Iterable[str] | IO[str]) -> TelemetryReader:
    return TelemetryReader(source)


class TelemetryWriter:
    """Writes FrameMeta records as wire lines to a text sink."""

    def __init__(self, sink: IO[str]):
        self._sink = sink
        self.count = 0

    def write(self, f: FrameMeta) -> None:
        self._sink.write(encode(f))
        self._sink.write("\n")
        self.count += 1


def stream_writer(sink: IO[str]) -> TelemetryWriter:
    return TelemetryWriter(sink)
