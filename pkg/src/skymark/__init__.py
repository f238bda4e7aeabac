"""Aerial POI geolocation engine and operator sync service."""

from .geodesy import (
    EcefPoint,
    EnuFrame,
    GeodeticCoord,
    ecef_to_geodetic,
    enu_from,
    from_enu,
    geodesic_distance,
    geodetic_to_ecef,
    to_enu,
)
from .projection import (
    BehindCamera,
    CameraIntrinsics,
    CameraPose,
    GroundModel,
    PixelCoord,
    Projection,
    Quaternion,
    RayMissesGround,
    geolocate,
    marker_height,
    pixel_to_ray,
    pose_from_gimbal,
    project,
)

__all__ = [
    "BehindCamera",
    "CameraIntrinsics",
    "CameraPose",
    "EcefPoint",
    "EnuFrame",
    "GeodeticCoord",
    "GroundModel",
    "PixelCoord",
    "Projection",
    "Quaternion",
    "RayMissesGround",
    "ecef_to_geodetic",
    "enu_from",
    "from_enu",
    "geodesic_distance",
    "geodetic_to_ecef",
    "geolocate",
    "marker_height",
    "pixel_to_ray",
    "pose_from_gimbal",
    "project",
    "to_enu",
]
