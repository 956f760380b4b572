//! Geodesic primitives: WGS-like points, Haversine distance, and a local
//! planar frame used by the grid and tracking math.
//!
//! A spherical earth with radius 6,371,000 m is assumed throughout; at
//! building scale the difference from an ellipsoid is far below the noise
//! floor of WiFi ranging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius in meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Distance beyond which the local planar frame starts to accumulate
/// noticeable projection error; callers are warned, not failed.
const LOCAL_FRAME_SOFT_LIMIT_M: f64 = 2_000.0;

/// A geographic point in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Build a point, enforcing finite values and the usual degree ranges.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite lat/lon ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate(format!(
                "longitude {lon} outside [-180, 180]"
            )));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// A point in a local east/north tangent frame, in meters relative to an
/// anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    /// Meters east of the anchor.
    pub x: f64,
    /// Meters north of the anchor.
    pub y: f64,
    /// The geographic origin of this frame.
    pub anchor: GeoPoint,
}

/// Great-circle distance between two points in meters (Haversine formula).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Project `p` into the equirectangular local frame anchored at `anchor`.
///
/// The projection is exactly invertible by [`unproject_local`]; round-trip
/// error is pure floating point. Beyond ~2 km from the anchor the planar
/// approximation degrades, which is logged but not treated as an error.
pub fn project_local(anchor: GeoPoint, p: GeoPoint) -> LocalPoint {
    let cos_lat = anchor.lat.to_radians().cos();
    let x = (p.lon - anchor.lon).to_radians() * EARTH_RADIUS_M * cos_lat;
    let y = (p.lat - anchor.lat).to_radians() * EARTH_RADIUS_M;
    if x.hypot(y) > LOCAL_FRAME_SOFT_LIMIT_M {
        log::warn!(
            "local projection of point {:.1} m from anchor; planar error grows beyond {} m",
            x.hypot(y),
            LOCAL_FRAME_SOFT_LIMIT_M
        );
    }
    LocalPoint { x, y, anchor }
}

/// Invert [`project_local`].
pub fn unproject_local(p: LocalPoint) -> Result<GeoPoint> {
    let cos_lat = p.anchor.lat.to_radians().cos();
    let lat = p.anchor.lat + (p.y / EARTH_RADIUS_M).to_degrees();
    let lon = p.anchor.lon + (p.x / (EARTH_RADIUS_M * cos_lat)).to_degrees();
    GeoPoint::new(lat, lon)
}

/// A closed 2D floor outline given as a lat/lon ring.
///
/// The ring is stored without a repeated closing vertex; membership treats
/// the boundary as inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPolygon {
    ring: Vec<GeoPoint>,
}

impl FloorPolygon {
    pub fn new(mut ring: Vec<GeoPoint>) -> Result<Self> {
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::InvalidCoordinate(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                ring.len()
            )));
        }
        Ok(Self { ring })
    }

    pub fn ring(&self) -> &[GeoPoint] {
        &self.ring
    }

    /// Geographic anchor for this polygon's local frame (vertex centroid).
    pub fn anchor(&self) -> GeoPoint {
        let n = self.ring.len() as f64;
        let lat = self.ring.iter().map(|p| p.lat()).sum::<f64>() / n;
        let lon = self.ring.iter().map(|p| p.lon()).sum::<f64>() / n;
        GeoPoint { lat, lon }
    }

    /// Ring vertices projected into the frame anchored at [`anchor`](Self::anchor).
    pub fn local_ring(&self) -> Vec<LocalPoint> {
        let anchor = self.anchor();
        self.ring.iter().map(|&p| project_local(anchor, p)).collect()
    }

    /// Axis-aligned bounds of the local ring: (min_x, min_y, max_x, max_y).
    pub fn local_bounds(&self) -> (f64, f64, f64, f64) {
        let ring = self.local_ring();
        let mut bounds = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in ring {
            bounds.0 = bounds.0.min(p.x);
            bounds.1 = bounds.1.min(p.y);
            bounds.2 = bounds.2.max(p.x);
            bounds.3 = bounds.3.max(p.y);
        }
        bounds
    }

    /// Even-odd point-in-polygon test; boundary points count as inside
    /// (within a small metric tolerance).
    pub fn contains(&self, p: GeoPoint) -> bool {
        let anchor = self.anchor();
        let q = project_local(anchor, p);
        let ring = self.local_ring();
        contains_local(&ring, q.x, q.y)
    }
}

/// Even-odd test over a local-frame ring, boundary-inclusive.
pub(crate) fn contains_local(ring: &[LocalPoint], x: f64, y: f64) -> bool {
    const EDGE_TOL_M: f64 = 1e-9;
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if point_segment_distance(x, y, a.x, a.y, b.x, b.y) <= EDGE_TOL_M {
            return true;
        }
        if (a.y > y) != (b.y > y) {
            let t = (y - a.y) / (b.y - a.y);
            let xi = a.x + t * (b.x - a.x);
            if x < xi {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from (px, py) to segment (ax, ay)-(bx, by).
pub(crate) fn point_segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (px - ax).hypot(py - ay);
    }
    let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
    (px - (ax + t * dx)).hypot(py - (ay + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn construction_rejects_bad_coordinates() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(45.0, -75.0).is_ok());
    }

    #[test]
    fn haversine_identity_is_zero() {
        let p = gp(38.99, -76.94);
        assert_eq!(haversine_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_one_degree_meridian() {
        // pi * R / 180 with R = 6,371,000 m, computed independently.
        let expected = 111_194.92664455873;
        let d = haversine_distance(gp(0.0, 0.0), gp(0.0, 1.0));
        assert!((d - expected).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn haversine_symmetric() {
        let a = gp(38.99, -76.94);
        let b = gp(39.01, -76.90);
        assert_eq!(haversine_distance(a, b), haversine_distance(b, a));
    }

    #[test]
    fn project_anchor_is_origin() {
        let a = gp(38.99, -76.94);
        let l = project_local(a, a);
        assert_eq!((l.x, l.y), (0.0, 0.0));
    }

    #[test]
    fn project_100m_north() {
        let a = gp(38.99, -76.94);
        // Move 100 m north along the meridian.
        let dlat = (100.0 / EARTH_RADIUS_M).to_degrees();
        let p = gp(38.99 + dlat, -76.94);
        let l = project_local(a, p);
        assert!(l.x.abs() < 1e-9);
        assert!((l.y - 100.0).abs() < 0.01, "y = {}", l.y);
        // Against the haversine oracle.
        assert!((haversine_distance(a, p) - 100.0).abs() < 0.01);
    }

    #[test]
    fn polygon_membership_rectangle() {
        let ring = vec![gp(0.0, 0.0), gp(0.0, 0.001), gp(0.001, 0.001), gp(0.001, 0.0)];
        let poly = FloorPolygon::new(ring).unwrap();
        assert!(poly.contains(gp(0.0005, 0.0005)));
        assert!(!poly.contains(gp(0.002, 0.0005)));
        // Boundary is inside.
        assert!(poly.contains(gp(0.0, 0.0005)));
    }

    #[test]
    fn polygon_rejects_degenerate_rings() {
        assert!(FloorPolygon::new(vec![gp(0.0, 0.0), gp(0.0, 0.001)]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_1km(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            dx in -1000.0f64..1000.0,
            dy in -1000.0f64..1000.0,
        ) {
            let anchor = gp(lat, lon);
            let p = unproject_local(LocalPoint { x: dx, y: dy, anchor }).unwrap();
            let back = project_local(anchor, p);
            let err = (back.x - dx).hypot(back.y - dy);
            prop_assert!(err < 1e-6, "round-trip error {err} m");
        }

        #[test]
        fn projection_consistent_with_haversine(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            dx in -500.0f64..500.0,
            dy in -500.0f64..500.0,
        ) {
            prop_assume!(dx.hypot(dy) > 1.0);
            let anchor = gp(lat, lon);
            let p = unproject_local(LocalPoint { x: dx, y: dy, anchor }).unwrap();
            let hav = haversine_distance(anchor, p);
            let euc = dx.hypot(dy);
            prop_assert!((hav - euc).abs() / hav < 1e-3, "hav {hav}, euclid {euc}");
        }

        #[test]
        fn triangle_inequality(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            ax in -5000.0f64..5000.0, ay in -5000.0f64..5000.0,
            bx in -5000.0f64..5000.0, by in -5000.0f64..5000.0,
            cx in -5000.0f64..5000.0, cy in -5000.0f64..5000.0,
        ) {
            let anchor = gp(lat, lon);
            let mk = |x, y| unproject_local(LocalPoint { x, y, anchor }).unwrap();
            let (a, b, c) = (mk(ax, ay), mk(bx, by), mk(cx, cy));
            let ab = haversine_distance(a, b);
            let bc = haversine_distance(b, c);
            let ac = haversine_distance(a, c);
            prop_assert!(ac <= ab + bc + 1e-6 * ac.max(1.0));
        }

        #[test]
        fn haversine_nonnegative_and_zero_iff_equal(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            dx in -1000.0f64..1000.0,
            dy in -1000.0f64..1000.0,
        ) {
            let anchor = gp(lat, lon);
            let p = unproject_local(LocalPoint { x: dx, y: dy, anchor }).unwrap();
            let d = haversine_distance(anchor, p);
            prop_assert!(d >= 0.0);
            if dx.hypot(dy) > 0.1 {
                prop_assert!(d > 0.0);
            }
        }
    }
}
