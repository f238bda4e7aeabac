"""WGS-84 coordinate systems: geodetic/ECEF conversion, local ENU frames,
and ellipsoidal geodesic distance.

All angles at the public surface are degrees, all lengths meters.  Altitude
is always height above the WGS-84 ellipsoid; nothing in this module knows
about ground level or geoids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# WGS-84 defining constants
WGS84_A = 6378137.0                 # semi-major axis (m)
WGS84_F = 1.0 / 298.257223563       # flattening
WGS84_B = WGS84_A * (1.0 - WGS84_F)  # semi-minor axis (m)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared
_EP2 = (WGS84_A**2 - WGS84_B**2) / WGS84_B**2  # second eccentricity squared

_INVERSION_MAX_ITER = 20
_INVERSION_LAT_TOL = 1e-12   # radians between successive iterates
_INVERSION_ALT_TOL = 1e-6    # meters between successive iterates

_GEODESIC_MAX_ITER = 200
_GEODESIC_TOL = 1e-12


class GeodesyError(Exception):
    """Base class for geodesy failures."""


class InversionError(GeodesyError):
    """ECEF->geodetic iteration failed to converge (degenerate input)."""


class GeodesicConvergenceError(GeodesyError):
    """Geodesic inverse problem failed to converge (near-antipodal pair)."""


def normalize_lon(lon_deg: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    return (lon_deg + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class GeodeticCoord:
    """A position on/above the WGS-84 ellipsoid.

    lat_deg must lie in [-90, 90]; lon_deg is wrapped into [-180, 180) on
    construction; alt_m is meters above the ellipsoid.
    """

    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not math.isfinite(self.lon_deg):
            raise ValueError("longitude must be finite")
        if not math.isfinite(self.alt_m):
            raise ValueError("altitude must be finite")
        object.__setattr__(self, "lon_deg", normalize_lon(self.lon_deg))


@dataclass(frozen=True)
class EcefPoint:
    """Earth-Centered-Earth-Fixed Cartesian position, meters."""

    x_m: float
    y_m: float
    z_m: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x_m, self.y_m, self.z_m)):
            raise ValueError("ECEF components must be finite")


def _prime_vertical_radius(sin_lat: float) -> float:
    return WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)


def geodetic_to_ecef(p: GeodeticCoord) -> EcefPoint:
    """Closed-form geodetic -> ECEF conversion."""
    lat = math.radians(p.lat_deg)
    lon = math.radians(p.lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    n = _prime_vertical_radius(sin_lat)
    x = (n + p.alt_m) * cos_lat * cos_lon
    y = (n + p.alt_m) * cos_lat * sin_lon
    z = (n * (1.0 - WGS84_E2) + p.alt_m) * sin_lat
    return EcefPoint(x, y, z)


def ecef_to_geodetic(p: EcefPoint) -> GeodeticCoord:
    """ECEF -> geodetic via Bowring's starting value plus fixed-point
    refinement of latitude and altitude.

    Converges in a handful of iterations anywhere outside the Earth's core;
    raises InversionError if the iteration cap is hit (inputs near the
    geocenter are numerically degenerate).
    """
    x, y, z = p.x_m, p.y_m, p.z_m
    rho = math.hypot(x, y)
    if rho == 0.0 and z == 0.0:
        raise InversionError("geocenter has no geodetic image")

    lon = math.atan2(y, x)

    # Bowring's parametric-latitude starting approximation.
    theta = math.atan2(z * WGS84_A, rho * WGS84_B)
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    lat = math.atan2(z + _EP2 * WGS84_B * sin_t**3,
                     rho - WGS84_E2 * WGS84_A * cos_t**3)

    alt = 0.0
    for _ in range(_INVERSION_MAX_ITER):
        sin_lat = math.sin(lat)
        cos_lat = math.cos(lat)
        n = _prime_vertical_radius(sin_lat)
        # The cosine form degrades near the poles; switch to the sine form.
        if abs(cos_lat) > abs(sin_lat):
            new_alt = rho / cos_lat - n
        else:
            new_alt = z / sin_lat - n * (1.0 - WGS84_E2)
        new_lat = math.atan2(z, rho * (1.0 - WGS84_E2 * n / (n + new_alt)))
        done = (abs(new_lat - lat) < _INVERSION_LAT_TOL
                and abs(new_alt - alt) < _INVERSION_ALT_TOL)
        lat, alt = new_lat, new_alt
        if done:
            return GeodeticCoord(math.degrees(lat), math.degrees(lon), alt)
    raise InversionError(f"no convergence after {_INVERSION_MAX_ITER} iterations")


def _ecef_delta(origin: GeodeticCoord, target: GeodeticCoord) -> tuple[float, float, float]:
    """ECEF vector from origin to target, computed difference-of-products
    style so that coordinates sharing latitude/longitude bits cancel exactly
    instead of losing ~1e-9 m to product rounding.
    """
    lat_o, lon_o = math.radians(origin.lat_deg), math.radians(origin.lon_deg)
    lat_t, lon_t = math.radians(target.lat_deg), math.radians(target.lon_deg)
    slo, clo = math.sin(lat_o), math.cos(lat_o)
    slt, clt = math.sin(lat_t), math.cos(lat_t)
    sho, cho = math.sin(lon_o), math.cos(lon_o)
    sht, cht = math.sin(lon_t), math.cos(lon_t)

    n_o = _prime_vertical_radius(slo)
    n_t = _prime_vertical_radius(slt)
    s_o = n_o + origin.alt_m
    s_t = n_t + target.alt_m
    sz_o = n_o * (1.0 - WGS84_E2) + origin.alt_m
    sz_t = n_t * (1.0 - WGS84_E2) + target.alt_m

    bx_o, bx_t = clo * cho, clt * cht
    by_o, by_t = clo * sho, clt * sht

    dx = (s_t - s_o) * bx_t + s_o * (bx_t - bx_o)
    dy = (s_t - s_o) * by_t + s_o * (by_t - by_o)
    dz = (sz_t - sz_o) * slt + sz_o * (slt - slo)
    return dx, dy, dz


@dataclass(frozen=True)
class EnuFrame:
    """Local East-North-Up tangent frame anchored at a geodetic origin.

    The origin's altitude is part of the frame: to_enu(origin) is the zero
    vector and the up axis measures displacement from the origin point, not
    from the ellipsoid surface.
    """

    origin: GeodeticCoord

    @property
    def origin_ecef(self) -> EcefPoint:
        return geodetic_to_ecef(self.origin)

    @property
    def rotation(self) -> tuple[tuple[float, float, float], ...]:
        """Rows of the ECEF->ENU rotation matrix (east, north, up)."""
        lat = math.radians(self.origin.lat_deg)
        lon = math.radians(self.origin.lon_deg)
        sl, cl = math.sin(lat), math.cos(lat)
        so, co = math.sin(lon), math.cos(lon)
        return (
            (-so, co, 0.0),
            (-sl * co, -sl * so, cl),
            (cl * co, cl * so, sl),
        )


def enu_from(origin: GeodeticCoord) -> EnuFrame:
    """Build the ENU tangent frame at origin."""
    return EnuFrame(origin)


def to_enu(frame: EnuFrame, p: GeodeticCoord) -> tuple[float, float, float]:
    """Geodetic -> local ENU coordinates (meters) in the given frame."""
    dx, dy, dz = _ecef_delta(frame.origin, p)
    (ex, ey, ez), (nx, ny, nz), (ux, uy, uz) = frame.rotation
    return (
        ex * dx + ey * dy + ez * dz,
        nx * dx + ny * dy + nz * dz,
        ux * dx + uy * dy + uz * dz,
    )


def from_enu(frame: EnuFrame, v: tuple[float, float, float]) -> GeodeticCoord:
    """Local ENU coordinates -> geodetic in the given frame."""
    e, n, u = v
    (ex, ey, ez), (nx, ny, nz), (ux, uy, uz) = frame.rotation
    o = frame.origin_ecef
    return ecef_to_geodetic(EcefPoint(
        o.x_m + ex * e + nx * n + ux * u,
        o.y_m + ey * e + ny * n + uy * u,
        o.z_m + ez * e + nz * n + uz * u,
    ))


def enu_vector_to_ecef(frame: EnuFrame, v: tuple[float, float, float]) -> tuple[float, float, float]:
    """Rotate a direction vector from the frame's ENU axes into ECEF axes."""
    e, n, u = v
    (ex, ey, ez), (nx, ny, nz), (ux, uy, uz) = frame.rotation
    return (
        ex * e + nx * n + ux * u,
        ey * e + ny * n + uy * u,
        ez * e + nz * n + uz * u,
    )


def _vincenty_distance(p1: GeodeticCoord, p2: GeodeticCoord) -> float:
    """Vincenty's inverse solution on the WGS-84 ellipsoid, distance only."""
    u1 = math.atan((1.0 - WGS84_F) * math.tan(math.radians(p1.lat_deg)))
    u2 = math.atan((1.0 - WGS84_F) * math.tan(math.radians(p2.lat_deg)))
    big_l = math.radians(p2.lon_deg - p1.lon_deg)
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = big_l
    for _ in range(_GEODESIC_MAX_ITER):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(cos_u2 * sin_lam,
                               cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam)
        if sin_sigma == 0.0:
            return 0.0  # coincident points
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos2_alpha = 1.0 - sin_alpha * sin_alpha
        if cos2_alpha == 0.0:
            cos_2sm = 0.0  # equatorial line
        else:
            cos_2sm = cos_sigma - 2.0 * sin_u1 * sin_u2 / cos2_alpha
        c = WGS84_F / 16.0 * cos2_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos2_alpha))
        lam_prev = lam
        lam = big_l + (1.0 - c) * WGS84_F * sin_alpha * (
            sigma + c * sin_sigma * (
                cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)))
        if abs(lam - lam_prev) < _GEODESIC_TOL:
            break
    else:
        raise GeodesicConvergenceError(
            "geodesic inverse did not converge (near-antipodal pair)")

    u_sq = cos2_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    a_coef = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)))
    b_coef = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
    delta_sigma = b_coef * sin_sigma * (
        cos_2sm + b_coef / 4.0 * (
            cos_sigma * (-1.0 + 2.0 * cos_2sm**2)
            - b_coef / 6.0 * cos_2sm * (-3.0 + 4.0 * sin_sigma**2) * (-3.0 + 4.0 * cos_2sm**2)))
    return WGS84_B * a_coef * (sigma - delta_sigma)


def geodesic_distance(p1: GeodeticCoord, p2: GeodeticCoord) -> float:
    """Ellipsoidal surface distance between two points, ignoring altitude.

    Endpoints are put in a canonical order first so d(a, b) and d(b, a) run
    the identical code path and return identical bits.  Raises
    GeodesicConvergenceError for near-antipodal pairs rather than returning
    a wrong number.
    """
    if (p1.lat_deg, p1.lon_deg) == (p2.lat_deg, p2.lon_deg):
        return 0.0
    if (p1.lat_deg, p1.lon_deg) > (p2.lat_deg, p2.lon_deg):
        p1, p2 = p2, p1
    return _vincenty_distance(p1, p2)


def small_displacement_m(p1: GeodeticCoord, p2: GeodeticCoord) -> float:
    """Horizontal separation of two nearby points from the local radii of
    curvature.  Intended for sub-meter scales where the full geodesic
    solution would be dominated by trigonometric cancellation noise;
    agrees with geodesic_distance to first order in the separation.
    """
    lat = math.radians(0.5 * (p1.lat_deg + p2.lat_deg))
    sin_lat = math.sin(lat)
    w2 = 1.0 - WGS84_E2 * sin_lat * sin_lat
    m_radius = WGS84_A * (1.0 - WGS84_E2) / w2**1.5
    n_radius = WGS84_A / math.sqrt(w2)
    dlat = math.radians(p2.lat_deg - p1.lat_deg)
    dlon = math.radians(normalize_lon(p2.lon_deg - p1.lon_deg))
    return math.hypot(dlat * m_radius, dlon * n_radius * math.cos(lat))
