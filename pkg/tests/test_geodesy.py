import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skymark.geodesy import (
    WGS84_A,
    WGS84_B,
    EcefPoint,
    GeodesicConvergenceError,
    GeodeticCoord,
    InversionError,
    ecef_to_geodetic,
    enu_from,
    from_enu,
    geodesic_distance,
    geodetic_to_ecef,
    small_displacement_m,
    to_enu,
)

SITE = GeodeticCoord(38.6367, -90.2342, 0.0)

# Frozen from an independent quadrature of the meridian-arc integrand
# a(1-e^2)(1-e^2 sin^2 phi)^(-3/2) over [0, 0.001 deg].
MERIDIAN_ARC_0_001_DEG = 110.5742758217071
# Equatorial geodesic is the exact arc a * dlon.
EQUATORIAL_ARC_0_001_DEG = WGS84_A * math.radians(0.001)
# 0.001 deg of latitude at the site, from the meridian radius of curvature.
DLAT_FOR_100M_NORTH_AT_SITE = 0.0009008314431116425


def roundtrip_error_m(p: GeodeticCoord) -> float:
    q = ecef_to_geodetic(geodetic_to_ecef(p))
    return math.hypot(small_displacement_m(p, q), q.alt_m - p.alt_m)


class TestGeodeticToEcef:
    def test_equator_is_semi_major_axis(self):
        e = geodetic_to_ecef(GeodeticCoord(0.0, 0.0, 0.0))
        assert (e.x_m, e.y_m, e.z_m) == (WGS84_A, 0.0, 0.0)

    def test_pole_is_semi_minor_axis(self):
        e = geodetic_to_ecef(GeodeticCoord(90.0, 0.0, 0.0))
        assert abs(e.z_m - 6356752.3142) < 1e-4
        assert math.hypot(e.x_m, e.y_m) < 1e-6

    def test_site_roundtrips(self):
        assert roundtrip_error_m(GeodeticCoord(38.6367, -90.2342, 150.0)) < 1e-6


class TestEcefToGeodetic:
    def test_equatorial_inverse(self):
        g = ecef_to_geodetic(EcefPoint(WGS84_A, 0.0, 0.0))
        assert (g.lat_deg, g.lon_deg, g.alt_m) == (0.0, 0.0, 0.0)

    def test_polar_inverse(self):
        g = ecef_to_geodetic(EcefPoint(0.0, 0.0, 6356752.3142))
        assert abs(g.lat_deg - 90.0) < 1e-9
        assert abs(g.alt_m) < 1e-4

    def test_bulk_roundtrip(self):
        rng = random.Random(1234)
        for _ in range(10_000):
            p = GeodeticCoord(rng.uniform(-89, 89), rng.uniform(-180, 180),
                              rng.uniform(-100, 9000))
            assert roundtrip_error_m(p) < 1e-6

    def test_geocenter_is_degenerate(self):
        with pytest.raises(InversionError):
            ecef_to_geodetic(EcefPoint(0.0, 0.0, 0.0))


class TestEnuFrame:
    def test_origin_maps_to_zero(self):
        frame = enu_from(SITE)
        assert to_enu(frame, SITE) == (0.0, 0.0, 0.0)

    def test_vertical_offset(self):
        frame = enu_from(SITE)
        p = from_enu(frame, (0.0, 0.0, 10.0))
        assert abs(p.alt_m - 10.0) < 1e-6
        assert small_displacement_m(SITE, p) < 1e-6

    def test_100m_north_chord_oracle(self):
        frame = enu_from(SITE)
        north = GeodeticCoord(SITE.lat_deg + DLAT_FOR_100M_NORTH_AT_SITE,
                              SITE.lon_deg, 0.0)
        e, n, u = to_enu(frame, north)
        assert abs(e) < 1e-3
        assert abs(n - 100.0) < 1e-3
        assert abs(u) < 1e-3  # curvature drop is ~0.8 mm at 100 m

    def test_rotation_orthonormal(self):
        frame = enu_from(GeodeticCoord(12.3, 45.6, 789.0))
        r = frame.rotation
        for i in range(3):
            for j in range(3):
                dot = sum(r[i][k] * r[j][k] for k in range(3))
                assert abs(dot - (1.0 if i == j else 0.0)) < 1e-12

    @given(
        e=st.floats(-7000, 7000),
        n=st.floats(-7000, 7000),
        u=st.floats(-100, 1000),
    )
    @settings(max_examples=200, deadline=None)
    def test_enu_roundtrip_within_10km(self, e, n, u):
        frame = enu_from(SITE)
        p = from_enu(frame, (e, n, u))
        e2, n2, u2 = to_enu(frame, p)
        assert math.dist((e, n, u), (e2, n2, u2)) < 1e-6


class TestGeodesicDistance:
    def test_coincident_points(self):
        assert geodesic_distance(SITE, SITE) == 0.0

    def test_equatorial_arc(self):
        d = geodesic_distance(GeodeticCoord(0, 0), GeodeticCoord(0, 0.001))
        assert abs(d - EQUATORIAL_ARC_0_001_DEG) < 1e-3

    def test_meridian_arc(self):
        d = geodesic_distance(GeodeticCoord(0, 0), GeodeticCoord(0.001, 0))
        assert abs(d - MERIDIAN_ARC_0_001_DEG) < 2e-3

    def test_symmetric_exactly(self):
        a = GeodeticCoord(38.64, -90.23, 0.0)
        b = GeodeticCoord(38.71, -90.11, 0.0)
        assert geodesic_distance(a, b) == geodesic_distance(b, a)

    def test_altitude_ignored(self):
        a = GeodeticCoord(38.64, -90.23, 0.0)
        b = GeodeticCoord(38.71, -90.11, 500.0)
        assert geodesic_distance(a, b) == geodesic_distance(
            a, GeodeticCoord(b.lat_deg, b.lon_deg, 0.0))

    def test_near_antipodal_raises(self):
        with pytest.raises(GeodesicConvergenceError):
            geodesic_distance(GeodeticCoord(0.0, 0.0), GeodeticCoord(0.5, 179.7))

    def test_chord_agreement_under_100m(self):
        # Construct nearby pairs from the local curvature radii, then check
        # the geodesic against the ENU-projected chord.
        rng = random.Random(3)
        e2 = 1.0 - (WGS84_B / WGS84_A) ** 2
        for _ in range(300):
            lat = rng.uniform(-60, 60)
            lon = rng.uniform(-179, 179)
            dist = rng.uniform(0.1, 99.0)
            bearing = rng.uniform(0, 2 * math.pi)
            sin_lat = math.sin(math.radians(lat))
            w2 = 1.0 - e2 * sin_lat**2
            m_radius = WGS84_A * (1.0 - e2) / w2**1.5
            n_radius = WGS84_A / math.sqrt(w2)
            lat2 = lat + math.degrees(dist * math.cos(bearing) / m_radius)
            lon2 = lon + math.degrees(
                dist * math.sin(bearing) / (n_radius * math.cos(math.radians(lat))))
            p1 = GeodeticCoord(lat, lon, 0.0)
            p2 = GeodeticCoord(lat2, lon2, 0.0)
            e, n, _u = to_enu(enu_from(p1), p2)
            assert abs(geodesic_distance(p1, p2) - math.hypot(e, n)) < 1e-3


class TestCoordinateInvariants:
    def test_longitude_normalized(self):
        assert GeodeticCoord(0.0, 200.0).lon_deg == -160.0
        assert GeodeticCoord(0.0, 180.0).lon_deg == -180.0
        assert GeodeticCoord(0.0, -180.0).lon_deg == -180.0

    def test_latitude_bounds(self):
        with pytest.raises(ValueError):
            GeodeticCoord(90.5, 0.0)

    def test_altitude_finite(self):
        with pytest.raises(ValueError):
            GeodeticCoord(0.0, 0.0, math.inf)
