"""Persistent POI registry with poll-based bidirectional sync.

POIs carry a global, strictly increasing revision number; clients poll with
the cursor from their previous call and receive exactly the revisions they
have not seen, in order.  Operator state (location, next target) rides in
the same store but is replaced wholesale rather than versioned.

Persistence is a single append-friendly file of JSON lines.  Every mutation
is flushed and fsynced before the call returns; checkpoint() compacts the
log with an atomic replace.  A truncated or corrupt file fails loading with
the byte offset rather than exposing partial state.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .geodesy import GeodeticCoord

POI_KINDS = ("victim", "evidence", "hazard", "other")
OPERATOR_ROLES = ("RO", "OSO")


class StoreError(Exception):
    """Base class for store failures."""


class StorageFailure(StoreError):
    """The backing file could not be written."""


class CorruptStore(StoreError):
    """The backing file could not be parsed."""

    def __init__(self, path: str, byte_offset: int, reason: str):
        self.path = path
        self.byte_offset = byte_offset
        self.reason = reason
        super().__init__(f"{path} corrupt at byte {byte_offset}: {reason}")


class UnknownTarget(StoreError):
    """An operator's next_target references a POI that does not exist."""


class UnknownPoi(StoreError):
    """A mutation references a POI id that does not exist."""


@dataclass(frozen=True)
class Poi:
    id: str
    kind: str
    location: GeodeticCoord
    created_by: str
    created_at_ms: int
    revision: int
    label: str | None = None
    deleted: bool = False

    def __post_init__(self) -> None:
        if self.kind not in POI_KINDS:
            raise ValueError(f"kind must be one of {POI_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class OperatorState:
    id: str
    role: str
    updated_at_ms: int
    location: GeodeticCoord | None = None
    next_target: str | None = None

    def __post_init__(self) -> None:
        if self.role not in OPERATOR_ROLES:
            raise ValueError(f"role must be one of {OPERATOR_ROLES}, got {self.role!r}")


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


def _poi_record(p: Poi) -> dict:
    return {
        "kind": "poi",
        "id": p.id,
        "poi_kind": p.kind,
        "label": p.label,
        "lat_deg": p.location.lat_deg,
        "lon_deg": p.location.lon_deg,
        "alt_m": p.location.alt_m,
        "created_by": p.created_by,
        "created_at_ms": p.created_at_ms,
        "revision": p.revision,
        "deleted": p.deleted,
    }


def _operator_record(s: OperatorState) -> dict:
    rec = {
        "kind": "operator",
        "id": s.id,
        "role": s.role,
        "updated_at_ms": s.updated_at_ms,
        "next_target": s.next_target,
    }
    if s.location is not None:
        rec["lat_deg"] = s.location.lat_deg
        rec["lon_deg"] = s.location.lon_deg
        rec["alt_m"] = s.location.alt_m
    return rec


def _poi_from_record(rec: dict) -> Poi:
    return Poi(
        id=rec["id"],
        kind=rec["poi_kind"],
        location=GeodeticCoord(rec["lat_deg"], rec["lon_deg"], rec["alt_m"]),
        created_by=rec["created_by"],
        created_at_ms=rec["created_at_ms"],
        revision=rec["revision"],
        label=rec.get("label"),
        deleted=rec.get("deleted", False),
    )


def _operator_from_record(rec: dict) -> OperatorState:
    location = None
    if "lat_deg" in rec:
        location = GeodeticCoord(rec["lat_deg"], rec["lon_deg"], rec["alt_m"])
    return OperatorState(
        id=rec["id"],
        role=rec["role"],
        updated_at_ms=rec["updated_at_ms"],
        location=location,
        next_target=rec.get("next_target"),
    )


class PoiStore:
    """Thread-safe POI and operator registry, optionally file-backed.

    All mutations serialize on one lock, so revision order is the single
    source of truth any number of concurrent pollers can follow.
    """

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.RLock()
        self._pois: dict[str, Poi] = {}
        self._operators: dict[str, OperatorState] = {}
        self._revision = 0
        self._next_id = 1
        self._path = Path(path) if path is not None else None
        self._file = None
        if self._path is not None:
            self._load()
            try:
                self._file = open(self._path, "a", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise StorageFailure(f"cannot open {self._path}: {exc}") from exc

    # -- persistence ------------------------------------------------------

    def _load(self) -> None:
        if not self._path.exists():
            return
        pois: dict[str, Poi] = {}
        operators: dict[str, OperatorState] = {}
        revision = 0
        next_id = 1
        offset = 0
        with open(self._path, "rb") as f:
            for raw in f:
                line = raw.strip()
                if line:
                    try:
                        rec = json.loads(line)
                        kind = rec["kind"]
                        if kind == "poi":
                            poi = _poi_from_record(rec)
                            pois[poi.id] = poi
                            revision = max(revision, poi.revision)
                            if poi.id.startswith("poi-"):
                                next_id = max(next_id, int(poi.id[4:]) + 1)
                        elif kind == "operator":
                            op = _operator_from_record(rec)
                            operators[op.id] = op
                        else:
                            raise ValueError(f"unknown record kind {kind!r}")
                    except (ValueError, KeyError, TypeError) as exc:
                        raise CorruptStore(str(self._path), offset, str(exc)) from None
                offset += len(raw)
        self._pois = pois
        self._operators = operators
        self._revision = revision
        self._next_id = next_id

    def _append(self, rec: dict) -> None:
        if self._file is None:
            return
        try:
            self._file.write(json.dumps(rec, separators=(",", ":")))
            self._file.write("\n")
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append to {self._path}: {exc}") from exc

    def checkpoint(self) -> None:
        """Compact the log to current state with an atomic replace."""
        if self._path is None:
            return
        with self._lock:
            tmp = self._path.with_suffix(self._path.suffix + ".tmp")
            try:
                with open(tmp, "w", encoding="utf-8", newline="\n") as f:
                    for poi in sorted(self._pois.values(), key=lambda p: p.revision):
                        f.write(json.dumps(_poi_record(poi), separators=(",", ":")) + "\n")
                    for op in sorted(self._operators.values(), key=lambda o: o.id):
                        f.write(json.dumps(_operator_record(op), separators=(",", ":")) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
                if self._file is not None:
                    self._file.close()
                os.replace(tmp, self._path)
                self._file = open(self._path, "a", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise StorageFailure(f"checkpoint failed: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    # -- POIs ---------------------------------------------------------------

    def add_poi(
        self,
        kind: str,
        location: GeodeticCoord,
        created_by: str,
        label: str | None = None,
    ) -> Poi:
        """Create a POI; durable on disk before this returns."""
        with self._lock:
            self._revision += 1
            poi = Poi(
                id=f"poi-{self._next_id:06d}",
                kind=kind,
                location=location,
                created_by=created_by,
                created_at_ms=_now_ms(),
                revision=self._revision,
                label=label,
            )
            self._next_id += 1
            self._pois[poi.id] = poi
            self._append(_poi_record(poi))
            return poi

    def update_poi(
        self,
        poi_id: str,
        location: GeodeticCoord | None = None,
        kind: str | None = None,
        label: str | None = None,
    ) -> Poi:
        with self._lock:
            poi = self._pois.get(poi_id)
            if poi is None:
                raise UnknownPoi(poi_id)
            self._revision += 1
            poi = replace(
                poi,
                location=location if location is not None else poi.location,
                kind=kind if kind is not None else poi.kind,
                label=label if label is not None else poi.label,
                revision=self._revision,
            )
            self._pois[poi_id] = poi
            self._append(_poi_record(poi))
            return poi

    def delete_poi(self, poi_id: str) -> Poi:
        """Soft-delete: the tombstone is synced like any other revision."""
        with self._lock:
            poi = self._pois.get(poi_id)
            if poi is None:
                raise UnknownPoi(poi_id)
            self._revision += 1
            poi = replace(poi, deleted=True, revision=self._revision)
            self._pois[poi_id] = poi
            self._append(_poi_record(poi))
            return poi

    def get_pois(self, since: int = 0) -> tuple[list[Poi], int]:
        """POIs with revision > since, in revision order, plus the cursor
        to pass next time.  Polling with each returned cursor sees every
        revision exactly once."""
        with self._lock:
            fresh = sorted(
                (p for p in self._pois.values() if p.revision > since),
                key=lambda p: p.revision,
            )
            return fresh, self._revision

    def get_poi(self, poi_id: str) -> Poi:
        with self._lock:
            poi = self._pois.get(poi_id)
            if poi is None:
                raise UnknownPoi(poi_id)
            return poi

    # -- operators ----------------------------------------------------------

    def update_operator(
        self,
        operator_id: str,
        role: str,
        location: GeodeticCoord | None = None,
        next_target: str | None = None,
    ) -> OperatorState:
        with self._lock:
            if next_target is not None and next_target not in self._pois:
                raise UnknownTarget(next_target)
            state = OperatorState(
                id=operator_id,
                role=role,
                updated_at_ms=_now_ms(),
                location=location,
                next_target=next_target,
            )
            self._operators[operator_id] = state
            self._append(_operator_record(state))
            return state

    def list_operators(self) -> list[OperatorState]:
        with self._lock:
            return sorted(self._operators.values(), key=lambda s: s.id)

    @property
    def revision(self) -> int:
        with self._lock:
            return self._revision
