"""Pinhole camera model: pixel -> ray casting, ray/Earth intersection, and
world-point -> pixel reprojection.

Camera frame convention: +Z is the boresight, +X is image-right, +Y is
image-down.  Pixel coordinates have u growing right and v growing down with
the origin at the frame's top-left corner.  A camera pose's quaternion
rotates camera-frame vectors into the ENU frame anchored at the mission
origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geodesy import (
    WGS84_A,
    WGS84_B,
    EcefPoint,
    GeodeticCoord,
    ecef_to_geodetic,
    enu_from,
    enu_vector_to_ecef,
    from_enu,
    geodetic_to_ecef,
    to_enu,
)

_HORIZON_EPS = 1e-12  # plane-mode rays flatter than this count as misses

Vec3 = tuple[float, float, float]


class RayMissesGround(Exception):
    """The cast ray never reaches the ground surface (sky/horizon pixel)."""


class BehindCamera(Exception):
    """The point lies behind the camera's image plane."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics from frame size and horizontal field of view.

    Square pixels and a centered principal point: fx = fy =
    (width/2) / tan(hfov/2), cx = width/2, cy = height/2.
    """

    width_px: int
    height_px: int
    hfov_deg: float

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("frame dimensions must be positive")
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError("hfov_deg must lie in (0, 180)")

    @property
    def fx(self) -> float:
        return (self.width_px / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def fy(self) -> float:
        return self.fx

    @property
    def cx(self) -> float:
        return self.width_px / 2.0

    @property
    def cy(self) -> float:
        return self.height_px / 2.0


@dataclass(frozen=True)
class PixelCoord:
    """Continuous pixel position; may lie outside the frame."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("pixel coordinates must be finite")


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z).

    Normalized on construction unless already unit to ~1 ulp, so encode /
    decode round trips keep their bits.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if norm < 1e-12:
            raise ValueError("zero quaternion has no direction")
        if abs(norm - 1.0) > 1e-15:
            object.__setattr__(self, "w", self.w / norm)
            object.__setattr__(self, "x", self.x / norm)
            object.__setattr__(self, "y", self.y / norm)
            object.__setattr__(self, "z", self.z / norm)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        """Rotate a 3-vector by this quaternion."""
        tx = 2.0 * (self.y * v[2] - self.z * v[1])
        ty = 2.0 * (self.z * v[0] - self.x * v[2])
        tz = 2.0 * (self.x * v[1] - self.y * v[0])
        return (
            v[0] + self.w * tx + (self.y * tz - self.z * ty),
            v[1] + self.w * ty + (self.z * tx - self.x * tz),
            v[2] + self.w * tz + (self.x * ty - self.y * tx),
        )

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    @staticmethod
    def from_rotation_matrix(m: tuple[Vec3, Vec3, Vec3]) -> "Quaternion":
        """Quaternion for a rotation matrix given as three rows."""
        m00, m01, m02 = m[0]
        m10, m11, m12 = m[1]
        m20, m21, m22 = m[2]
        trace = m00 + m11 + m22
        if trace > 0.0:
            s = 2.0 * math.sqrt(trace + 1.0)
            q = (0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        elif m00 >= m11 and m00 >= m22:
            s = 2.0 * math.sqrt(1.0 + m00 - m11 - m22)
            q = ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
        elif m11 >= m22:
            s = 2.0 * math.sqrt(1.0 + m11 - m00 - m22)
            q = ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
        else:
            s = 2.0 * math.sqrt(1.0 + m22 - m00 - m11)
            q = ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
        if q[0] < 0.0:
            q = (-q[0], -q[1], -q[2], -q[3])
        return Quaternion(*q)

    @staticmethod
    def from_rotvec(rx: float, ry: float, rz: float) -> "Quaternion":
        """Quaternion for a rotation-vector (axis * angle, radians)."""
        angle = math.sqrt(rx * rx + ry * ry + rz * rz)
        if angle == 0.0:
            return Quaternion(1.0, 0.0, 0.0, 0.0)
        half = 0.5 * angle
        k = math.sin(half) / angle
        return Quaternion(math.cos(half), rx * k, ry * k, rz * k)


@dataclass(frozen=True)
class CameraPose:
    """Camera position plus orientation (camera frame -> mission ENU)."""

    position: GeodeticCoord
    orientation: Quaternion


@dataclass(frozen=True)
class GroundModel:
    """Ground surface for ray intersection.

    plane(alt) is a horizontal plane at ellipsoidal altitude alt in the
    mission ENU frame; ellipsoid(offset) is the WGS-84 ellipsoid inflated
    by offset meters on each semi-axis.
    """

    kind: str
    alt_m: float

    def __post_init__(self) -> None:
        if self.kind not in ("plane", "ellipsoid"):
            raise ValueError(f"unknown ground model kind {self.kind!r}")

    @staticmethod
    def plane(ground_alt_m: float = 0.0) -> "GroundModel":
        return GroundModel("plane", ground_alt_m)

    @staticmethod
    def ellipsoid(offset_alt_m: float = 0.0) -> "GroundModel":
        return GroundModel("ellipsoid", offset_alt_m)


@dataclass(frozen=True)
class Projection:
    """Result of projecting a world point into the frame."""

    pixel: PixelCoord
    in_frame: bool


def pixel_to_ray(intr: CameraIntrinsics, px: PixelCoord) -> Vec3:
    """Unit ray through a pixel, in the camera frame."""
    x = (px.u - intr.cx) / intr.fx
    y = (px.v - intr.cy) / intr.fy
    norm = math.sqrt(x * x + y * y + 1.0)
    return (x / norm, y / norm, 1.0 / norm)


def pose_from_gimbal(heading_deg: float, pitch_deg: float) -> Quaternion:
    """Orientation for a roll-free gimbal.

    heading_deg is measured clockwise from north, pitch_deg down from
    horizontal (90 = straight down).  The boresight maps to the ENU vector
    (sin h cos p, cos h cos p, -sin p) and image-right stays horizontal.
    """
    if not 0.0 <= pitch_deg <= 90.0:
        raise ValueError("pitch_deg must lie in [0, 90]")
    h = math.radians(heading_deg)
    p = math.radians(pitch_deg)
    sh, ch = math.sin(h), math.cos(h)
    sp, cp = math.sin(p), math.cos(p)
    x_axis = (ch, -sh, 0.0)            # image-right, horizontal
    y_axis = (-sp * sh, -sp * ch, -cp)  # image-down
    z_axis = (sh * cp, ch * cp, -sp)   # boresight
    # Camera->ENU matrix has the camera axes as its columns.
    rows = (
        (x_axis[0], y_axis[0], z_axis[0]),
        (x_axis[1], y_axis[1], z_axis[1]),
        (x_axis[2], y_axis[2], z_axis[2]),
    )
    return Quaternion.from_rotation_matrix(rows)


def _ray_plane_hit(p_enu: Vec3, d_enu: Vec3, plane_up: float) -> Vec3:
    d_up = d_enu[2]
    if abs(d_up) < _HORIZON_EPS:
        raise RayMissesGround("ray is horizontal")
    t = (plane_up - p_enu[2]) / d_up
    if t <= 0.0:
        raise RayMissesGround("ground plane is behind or above the ray")
    return (p_enu[0] + t * d_enu[0], p_enu[1] + t * d_enu[1], plane_up)


def _ray_ellipsoid_hit(p: tuple[float, float, float], d: Vec3, offset: float) -> EcefPoint:
    ae = WGS84_A + offset
    be = WGS84_B + offset
    # Scale z so the ellipsoid becomes the unit-ish sphere of radius ae.
    k = ae / be
    px, py, pz = p[0], p[1], p[2] * k
    dx, dy, dz = d[0], d[1], d[2] * k
    a = dx * dx + dy * dy + dz * dz
    b = 2.0 * (px * dx + py * dy + pz * dz)
    c = px * px + py * py + pz * pz - ae * ae
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise RayMissesGround("ray misses the ellipsoid")
    sqrt_disc = math.sqrt(disc)
    t1 = (-b - sqrt_disc) / (2.0 * a)
    t2 = (-b + sqrt_disc) / (2.0 * a)
    t = t1 if t1 > 0.0 else t2
    if t <= 0.0:
        raise RayMissesGround("ellipsoid intersections are behind the camera")
    return EcefPoint(p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2])


def geolocate(
    pose: CameraPose,
    intr: CameraIntrinsics,
    px: PixelCoord,
    ground: GroundModel,
    mission_origin: GeodeticCoord,
) -> GeodeticCoord:
    """Cast the ray through px and intersect it with the ground model.

    Raises RayMissesGround when the pixel views sky or the horizon, and
    ValueError when the camera is not strictly above the ground surface.
    """
    frame = enu_from(mission_origin)
    ray_cam = pixel_to_ray(intr, px)
    d_enu = pose.orientation.rotate(ray_cam)

    if ground.kind == "plane":
        if pose.position.alt_m <= ground.alt_m:
            raise ValueError("camera must be strictly above the ground plane")
        p_enu = to_enu(frame, pose.position)
        plane_up = ground.alt_m - mission_origin.alt_m
        hit = _ray_plane_hit(p_enu, d_enu, plane_up)
        return from_enu(frame, hit)

    p_ecef = geodetic_to_ecef(pose.position)
    if pose.position.alt_m <= ground.alt_m:
        raise ValueError("camera must be strictly above the ellipsoid surface")
    d_ecef = enu_vector_to_ecef(frame, d_enu)
    hit_ecef = _ray_ellipsoid_hit((p_ecef.x_m, p_ecef.y_m, p_ecef.z_m), d_ecef, ground.alt_m)
    return ecef_to_geodetic(hit_ecef)


def project(
    pose: CameraPose,
    intr: CameraIntrinsics,
    poi: GeodeticCoord,
    mission_origin: GeodeticCoord,
) -> Projection:
    """Project a world point into the frame.

    Raises BehindCamera when the point is on or behind the image plane;
    points in front but outside the frame come back with in_frame=False.
    """
    frame = enu_from(mission_origin)
    p_cam = to_enu(frame, pose.position)
    p_poi = to_enu(frame, poi)
    rel = (p_poi[0] - p_cam[0], p_poi[1] - p_cam[1], p_poi[2] - p_cam[2])
    x, y, z = pose.orientation.conjugate().rotate(rel)
    if z <= 0.0:
        raise BehindCamera(f"point at camera depth {z:.3f} m")
    u = intr.cx + intr.fx * x / z
    v = intr.cy + intr.fy * y / z
    in_frame = 0.0 <= u < intr.width_px and 0.0 <= v < intr.height_px
    return Projection(PixelCoord(u, v), in_frame)


def marker_height(dist_m: float) -> float:
    """AR cylinder height for a POI at the given distance from the viewer:
    5 m up close, growing 0.02 m per meter beyond 10 m.
    """
    if dist_m < 0.0:
        raise ValueError("distance must be non-negative")
    return 5.0 + 0.02 * max(0.0, dist_m - 10.0)
