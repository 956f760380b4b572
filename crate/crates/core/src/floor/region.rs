//! Proximity region around the visible APs: the convex hull of their 2D
//! locations, buffered outward by a radius δ. Used to decide which installed
//! APs count toward the local-average signal feature.

use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint, LocalPoint};

/// Closed 2D region: all points within `delta` meters of the convex hull of
/// a set of anchor points. Degenerate hulls work naturally (one point → disc,
/// two points → capsule).
#[derive(Debug, Clone)]
pub struct ProximityRegion {
    anchor: GeoPoint,
    /// Hull vertices in counter-clockwise order, local frame. May have 1 or 2
    /// entries for degenerate inputs.
    hull: Vec<LocalPoint>,
    delta: f64,
}

impl ProximityRegion {
    pub fn new(points: &[GeoPoint], delta: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoVisibleAps);
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidCoordinate(format!(
                "proximity radius {delta} must be finite and non-negative"
            )));
        }
        let anchor = *points.first().expect("non-empty");
        let local: Vec<LocalPoint> = points.iter().map(|p| geo::project_local(anchor, *p)).collect();
        let hull = convex_hull(&local);
        Ok(Self { anchor, hull, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Closed membership: distance from `p` to the hull is at most δ.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let lp = geo::project_local(self.anchor, p);
        self.distance_to_hull(lp.x, lp.y) <= self.delta + 1e-9
    }

    /// Euclidean distance from a local-frame point to the hull (0 when inside).
    fn distance_to_hull(&self, x: f64, y: f64) -> f64 {
        match self.hull.len() {
            0 => unreachable!("hull of a non-empty point set"),
            1 => {
                let v = &self.hull[0];
                ((x - v.x).powi(2) + (y - v.y).powi(2)).sqrt()
            }
            2 => {
                let (a, b) = (&self.hull[0], &self.hull[1]);
                geo::point_segment_distance(x, y, a.x, a.y, b.x, b.y)
            }
            _ => {
                if geo::contains_local(&self.hull, x, y) {
                    return 0.0;
                }
                let mut best = f64::INFINITY;
                for i in 0..self.hull.len() {
                    let a = &self.hull[i];
                    let b = &self.hull[(i + 1) % self.hull.len()];
                    best = best.min(geo::point_segment_distance(x, y, a.x, a.y, b.x, b.y));
                }
                best
            }
        }
    }
}

/// Andrew's monotone chain. Returns vertices in CCW order; collinear points
/// on the hull boundary are dropped. Duplicates collapse naturally.
fn convex_hull(points: &[LocalPoint]) -> Vec<LocalPoint> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);

    let anchor = points[0].anchor;
    let mk = |&(x, y): &(f64, f64)| LocalPoint { x, y, anchor };

    if pts.len() < 3 {
        // Distinct-point count 1 or 2: the "hull" is the point or the segment
        // between the extremes.
        return pts.iter().map(mk).collect();
    }

    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };

    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // All input points collinear: fall back to the segment between extremes.
        return vec![mk(pts.first().unwrap()), mk(pts.last().unwrap())];
    }
    lower.iter().map(|p| mk(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Roughly 1 m of latitude in degrees.
    const M: f64 = 1.0 / 111_194.92664455873;

    #[test]
    fn single_point_region_is_a_disc() {
        let center = gp(30.0, 31.0);
        let region = ProximityRegion::new(&[center], 30.0).unwrap();
        assert!(region.contains(center));
        assert!(region.contains(gp(30.0 + 29.0 * M, 31.0)));
        assert!(region.contains(gp(30.0 + 30.0 * M, 31.0))); // boundary is closed
        assert!(!region.contains(gp(30.0 + 31.0 * M, 31.0)));
    }

    #[test]
    fn two_point_region_is_a_capsule() {
        let a = gp(30.0, 31.0);
        let b = gp(30.0 + 100.0 * M, 31.0);
        let region = ProximityRegion::new(&[a, b], 10.0).unwrap();
        // Midpoint of the segment, offset sideways.
        let lon_m = M / (30.0f64.to_radians().cos());
        assert!(region.contains(gp(30.0 + 50.0 * M, 31.0 + 9.0 * lon_m)));
        assert!(!region.contains(gp(30.0 + 50.0 * M, 31.0 + 12.0 * lon_m)));
        // Beyond the cap ends.
        assert!(region.contains(gp(30.0 + 109.0 * M, 31.0)));
        assert!(!region.contains(gp(30.0 + 112.0 * M, 31.0)));
    }

    #[test]
    fn square_region_interior_and_buffer() {
        let pts = vec![
            gp(30.0, 31.0),
            gp(30.0 + 100.0 * M, 31.0),
            gp(30.0 + 100.0 * M, 31.0 + 100.0 * M),
            gp(30.0, 31.0 + 100.0 * M),
        ];
        let region = ProximityRegion::new(&pts, 20.0).unwrap();
        assert!(region.contains(gp(30.0 + 50.0 * M, 31.0 + 50.0 * M)));
        // 15 m below the bottom edge: inside the δ=20 buffer.
        assert!(region.contains(gp(30.0 - 15.0 * M, 31.0 + 50.0 * M)));
        assert!(!region.contains(gp(30.0 - 25.0 * M, 31.0 + 50.0 * M)));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(ProximityRegion::new(&[], 30.0).is_err());
        assert!(ProximityRegion::new(&[gp(0.0, 0.0)], -1.0).is_err());
    }

    /// Independent oracle: distance to hull approximated by densely sampling
    /// hull edges (and the interior test done by a from-scratch winding check
    /// via triangle fan areas).
    fn oracle_distance(points: &[(f64, f64)], q: (f64, f64)) -> f64 {
        // Gift-wrapping hull, written independently of the implementation.
        let hull = gift_wrap(points);
        if hull.len() == 1 {
            let d = ((q.0 - hull[0].0).powi(2) + (q.1 - hull[0].1).powi(2)).sqrt();
            return d;
        }
        let inside = if hull.len() >= 3 { point_in_convex(&hull, q) } else { false };
        if inside {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let n = hull.len();
        let segs: Vec<((f64, f64), (f64, f64))> = if n == 2 {
            vec![(hull[0], hull[1])]
        } else {
            (0..n).map(|i| (hull[i], hull[(i + 1) % n])).collect()
        };
        for (a, b) in segs {
            for k in 0..=400 {
                let t = k as f64 / 400.0;
                let x = a.0 + t * (b.0 - a.0);
                let y = a.1 + t * (b.1 - a.1);
                best = best.min(((q.0 - x).powi(2) + (q.1 - y).powi(2)).sqrt());
            }
        }
        best
    }

    fn gift_wrap(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        if pts.len() <= 2 {
            return pts;
        }
        let start = pts
            .iter()
            .cloned()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap();
        let mut hull = vec![start];
        let mut current = start;
        loop {
            let mut next = pts[0];
            if next == current {
                next = pts[1];
            }
            for &cand in &pts {
                if cand == current {
                    continue;
                }
                let cross = (next.0 - current.0) * (cand.1 - current.1)
                    - (next.1 - current.1) * (cand.0 - current.0);
                let d_next = (next.0 - current.0).hypot(next.1 - current.1);
                let d_cand = (cand.0 - current.0).hypot(cand.1 - current.1);
                if cross < -1e-12 || (cross.abs() <= 1e-12 && d_cand > d_next) {
                    next = cand;
                }
            }
            if next == start {
                break;
            }
            hull.push(next);
            current = next;
            if hull.len() > pts.len() {
                break; // safety net against degenerate loops
            }
        }
        hull
    }

    fn point_in_convex(hull: &[(f64, f64)], q: (f64, f64)) -> bool {
        let n = hull.len();
        let mut sign = 0.0f64;
        for i in 0..n {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
            if cross.abs() < 1e-9 {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn membership_matches_sampled_hull_oracle(
            raw in proptest::collection::vec((-200.0f64..200.0, -200.0f64..200.0), 1..10),
            q in (-400.0f64..400.0, -400.0f64..400.0),
            delta in 1.0f64..80.0,
        ) {
            let base = gp(30.0, 31.0);
            let lon_m = M / (30.0f64.to_radians().cos());
            let to_geo = |(x, y): (f64, f64)| gp(30.0 + y * M, 31.0 + x * lon_m);

            let points: Vec<GeoPoint> = raw.iter().map(|&p| to_geo(p)).collect();
            let region = ProximityRegion::new(&points, delta).unwrap();

            // Re-project into the oracle's own frame (anchor at `base`).
            let local: Vec<(f64, f64)> = points
                .iter()
                .map(|p| {
                    let lp = geo::project_local(base, *p);
                    (lp.x, lp.y)
                })
                .collect();
            let lq = geo::project_local(base, to_geo(q));
            let d = oracle_distance(&local, (lq.x, lq.y));

            // Skip cases too close to the boundary for the sampled oracle and
            // the spherical-vs-planar difference to agree.
            if (d - delta).abs() > 0.5 {
                prop_assert_eq!(region.contains(to_geo(q)), d <= delta);
            }
        }
    }
}
