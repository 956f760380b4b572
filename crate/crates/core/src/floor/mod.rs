//! Floor detection: restrict the candidate floors to a small search range,
//! extract eight per-floor signal features, and classify with a small
//! feedforward network. Single-feature argmax baselines are included for
//! comparison runs.

pub mod region;

pub use region::ProximityRegion;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint};
use crate::nn::Mlp;
use crate::scan::{ApRegistry, Mac, WifiProfile};

/// RSS assumed for a registered AP that should be audible but is absent from
/// the profile.
pub const INVISIBLE_RSS_DBM: f64 = -100.0;

/// Default search-range width in floors.
pub const DEFAULT_RANGE_WIDTH: u32 = 4;

// Input normalization for the classifier. Raw features span wildly different
// scales (counts, dBm, dBm², meters); these map typical values into roughly
// [0, 1.5].
const NUM_SCALE: f64 = 1.0 / 20.0;
const RSS_OFFSET: f64 = 100.0;
const RSS_SCALE: f64 = 1.0 / 70.0;
const VAR_SCALE: f64 = 1.0 / 100.0;
const DIST_SCALE: f64 = 1.0 / 100.0;

/// The number of per-floor features.
pub const FEATURES_PER_FLOOR: usize = 8;

/// How raw per-floor features map into classifier inputs. Persisted model
/// files embed this so a reader can reject models built under a different
/// convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationContract {
    /// Input ordering: features grouped per floor, lowest range floor first.
    pub layout: String,
    pub num_scale: f64,
    pub rss_offset: f64,
    pub rss_scale: f64,
    pub var_scale: f64,
    pub dist_scale: f64,
}

impl NormalizationContract {
    pub fn current() -> Self {
        Self {
            layout: "floor-major".into(),
            num_scale: NUM_SCALE,
            rss_offset: RSS_OFFSET,
            rss_scale: RSS_SCALE,
            var_scale: VAR_SCALE,
            dist_scale: DIST_SCALE,
        }
    }
}

/// A consecutive run of candidate floors `[r1, r1 + w - 1]`, clipped to the
/// building.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloorSearchRange {
    r1: u32,
    w: u32,
    floors: Vec<u32>,
}

impl FloorSearchRange {
    /// An explicit window starting at `r1`, clipped to the building's floors.
    pub fn new(r1: u32, w: u32, floor_count: u32) -> Result<Self> {
        if w == 0 {
            return Err(Error::Pipeline("search-range width must be at least 1".into()));
        }
        if r1 == 0 || r1 > floor_count {
            return Err(Error::Pipeline(format!(
                "range start {r1} outside building with {floor_count} floors"
            )));
        }
        let end = (r1 + w - 1).min(floor_count);
        Ok(Self { r1, w, floors: (r1..=end).collect() })
    }

    /// First floor of the range (1-based).
    pub fn r1(&self) -> u32 {
        self.r1
    }

    /// Configured width; the actual range may be shorter in small buildings.
    pub fn width(&self) -> u32 {
        self.w
    }

    /// Floors in the range, ascending.
    pub fn floors(&self) -> &[u32] {
        &self.floors
    }

    pub fn contains(&self, floor: u32) -> bool {
        floor >= self.r1 && floor < self.r1 + self.floors.len() as u32
    }

    /// Drop profile entries whose AP is unregistered or installed outside the
    /// range.
    pub fn restrict_profile(&self, profile: &WifiProfile, registry: &ApRegistry) -> WifiProfile {
        let obs = profile
            .observations()
            .iter()
            .filter(|(mac, _)| {
                registry
                    .ap(**mac)
                    .map(|ap| self.contains(ap.floor))
                    .unwrap_or(false)
            })
            .map(|(m, r)| (*m, *r))
            .collect();
        WifiProfile::from_observations(profile.end_time, profile.window_secs, obs)
    }
}

/// Pick the `w` consecutive floors carrying the strongest overall signal.
///
/// Each candidate window is scored by the profile's total signal margin above
/// the invisibility sentinel, summed over APs installed in the window;
/// windows seeing nothing score zero. Ties go to the lowest-numbered window.
pub fn compute_search_range(
    profile: &WifiProfile,
    registry: &ApRegistry,
    w: u32,
) -> Result<FloorSearchRange> {
    if w == 0 {
        return Err(Error::Pipeline("search-range width must be at least 1".into()));
    }
    let filtered = profile.filter_registered(registry);
    if filtered.is_empty() {
        return Err(Error::NoVisibleAps);
    }
    let floor_count = registry.floor_count();

    // Per-floor signal margin, indexed by floor - 1.
    let mut margin = vec![0.0f64; floor_count as usize];
    for (mac, rss) in filtered.observations() {
        let ap = registry.ap(*mac).expect("filtered to registered MACs");
        margin[(ap.floor - 1) as usize] += (rss - INVISIBLE_RSS_DBM).max(0.0);
    }

    let last_start = floor_count.saturating_sub(w).max(0) + 1;
    let mut best_r1 = 1u32;
    let mut best_score = f64::NEG_INFINITY;
    for r1 in 1..=last_start {
        let end = (r1 + w - 1).min(floor_count);
        let score: f64 = ((r1 - 1)..end).map(|f| margin[f as usize]).sum();
        if score > best_score {
            best_score = score;
            best_r1 = r1;
        }
    }

    let end = (best_r1 + w - 1).min(floor_count);
    Ok(FloorSearchRange {
        r1: best_r1,
        w,
        floors: (best_r1..=end).collect(),
    })
}

/// The eight features for one floor of the search range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorFeatures {
    /// Visible AP count on this floor.
    pub num: f64,
    /// Strongest visible RSS (dBm).
    pub strongest: f64,
    /// Mean visible RSS (dBm).
    pub avg: f64,
    /// Population variance of visible RSS (dBm²).
    pub var: f64,
    /// Local-average RSS over installed APs within 30 m of the visible hull.
    pub loc_avg_30: f64,
    /// Same with an 80 m buffer.
    pub loc_avg_80: f64,
    /// Same with the buffer set to the farthest visible-AP separation.
    pub loc_avg_alpha: f64,
    /// Farthest pairwise distance between visible APs on this floor (m).
    pub far: f64,
}

impl FloorFeatures {
    /// Values for a floor with no visible APs.
    pub fn empty() -> Self {
        Self {
            num: 0.0,
            strongest: INVISIBLE_RSS_DBM,
            avg: INVISIBLE_RSS_DBM,
            var: 0.0,
            loc_avg_30: INVISIBLE_RSS_DBM,
            loc_avg_80: INVISIBLE_RSS_DBM,
            loc_avg_alpha: INVISIBLE_RSS_DBM,
            far: 0.0,
        }
    }

    fn normalized(&self) -> [f64; FEATURES_PER_FLOOR] {
        let dbm = |v: f64| (v + RSS_OFFSET) * RSS_SCALE;
        [
            self.num * NUM_SCALE,
            dbm(self.strongest),
            dbm(self.avg),
            self.var * VAR_SCALE,
            dbm(self.loc_avg_30),
            dbm(self.loc_avg_80),
            dbm(self.loc_avg_alpha),
            self.far * DIST_SCALE,
        ]
    }

    fn get(&self, name: FeatureName) -> f64 {
        match name {
            FeatureName::Num => self.num,
            FeatureName::Str => self.strongest,
            FeatureName::Avg => self.avg,
            FeatureName::Var => self.var,
            FeatureName::LocAvg30 => self.loc_avg_30,
            FeatureName::LocAvg80 => self.loc_avg_80,
            FeatureName::LocAvgAlpha => self.loc_avg_alpha,
            FeatureName::Far => self.far,
        }
    }
}

/// Identifies one of the eight per-floor features, for baseline comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureName {
    Num,
    Str,
    Avg,
    Var,
    LocAvg30,
    LocAvg80,
    LocAvgAlpha,
    Far,
}

impl FeatureName {
    pub const ALL: [FeatureName; 8] = [
        FeatureName::Num,
        FeatureName::Str,
        FeatureName::Avg,
        FeatureName::Var,
        FeatureName::LocAvg30,
        FeatureName::LocAvg80,
        FeatureName::LocAvgAlpha,
        FeatureName::Far,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FeatureName::Num => "num",
            FeatureName::Str => "str",
            FeatureName::Avg => "avg",
            FeatureName::Var => "var",
            FeatureName::LocAvg30 => "locavg30",
            FeatureName::LocAvg80 => "locavg80",
            FeatureName::LocAvgAlpha => "locavgalpha",
            FeatureName::Far => "far",
        }
    }
}

impl std::str::FromStr for FeatureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureName::ALL
            .into_iter()
            .find(|f| f.label() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Pipeline(format!("unknown feature name {s:?}")))
    }
}

/// Feature vector over the floors of a search range.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorFeatureVector {
    range: FloorSearchRange,
    per_floor: Vec<FloorFeatures>,
}

impl FloorFeatureVector {
    pub fn range(&self) -> &FloorSearchRange {
        &self.range
    }

    pub fn per_floor(&self) -> &[FloorFeatures] {
        &self.per_floor
    }

    /// Normalized classifier input, floor-major then feature-minor, padded
    /// with zeros to `8 * width` when the building is shorter than the range.
    pub fn flatten_normalized(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(FEATURES_PER_FLOOR * self.range.w as usize);
        for f in &self.per_floor {
            out.extend_from_slice(&f.normalized());
        }
        out.resize(FEATURES_PER_FLOOR * self.range.w as usize, 0.0);
        out
    }
}

/// Compute all eight features for each floor of `range`.
///
/// Registered-but-silent APs inside the proximity regions enter the
/// local-average features at the invisibility sentinel of −100 dBm.
pub fn extract_features(
    profile: &WifiProfile,
    registry: &ApRegistry,
    range: &FloorSearchRange,
) -> Result<FloorFeatureVector> {
    let working = range.restrict_profile(profile, registry);
    if working.is_empty() {
        return Err(Error::NoVisibleAps);
    }

    let visible_locations: Vec<GeoPoint> = working
        .observations()
        .keys()
        .map(|mac| registry.ap(*mac).expect("restricted profile").location)
        .collect();
    let alpha = max_pairwise_distance(&visible_locations);
    let region_30 = ProximityRegion::new(&visible_locations, 30.0)?;
    let region_80 = ProximityRegion::new(&visible_locations, 80.0)?;
    let region_alpha = ProximityRegion::new(&visible_locations, alpha)?;

    let mut per_floor = Vec::with_capacity(range.floors.len());
    for &floor in &range.floors {
        let visible: Vec<(Mac, f64, GeoPoint)> = working
            .observations()
            .iter()
            .filter_map(|(mac, rss)| {
                let ap = registry.ap(*mac).expect("restricted profile");
                (ap.floor == floor).then_some((*mac, *rss, ap.location))
            })
            .collect();

        let mut features = if visible.is_empty() {
            FloorFeatures::empty()
        } else {
            let n = visible.len() as f64;
            let strongest = visible.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let avg = visible.iter().map(|v| v.1).sum::<f64>() / n;
            let var = visible.iter().map(|v| (v.1 - avg).powi(2)).sum::<f64>() / n;
            let locs: Vec<GeoPoint> = visible.iter().map(|v| v.2).collect();
            FloorFeatures {
                num: n,
                strongest,
                avg,
                var,
                loc_avg_30: 0.0,
                loc_avg_80: 0.0,
                loc_avg_alpha: 0.0,
                far: max_pairwise_distance(&locs),
            }
        };

        features.loc_avg_30 = local_average(registry, floor, &working, &region_30);
        features.loc_avg_80 = local_average(registry, floor, &working, &region_80);
        features.loc_avg_alpha = local_average(registry, floor, &working, &region_alpha);
        per_floor.push(features);
    }

    Ok(FloorFeatureVector {
        range: range.clone(),
        per_floor,
    })
}

/// Mean RSS over the installed APs of `floor` that fall inside `region`,
/// taking −100 dBm for those not present in the profile. −100 when no
/// installed AP is in the region.
fn local_average(
    registry: &ApRegistry,
    floor: u32,
    profile: &WifiProfile,
    region: &ProximityRegion,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for mac in registry.aps_on_floor(floor) {
        let ap = registry.ap(*mac).expect("registry index");
        if !region.contains(ap.location) {
            continue;
        }
        sum += profile.rss(*mac).unwrap_or(INVISIBLE_RSS_DBM);
        count += 1;
    }
    if count == 0 {
        INVISIBLE_RSS_DBM
    } else {
        sum / count as f64
    }
}

fn max_pairwise_distance(points: &[GeoPoint]) -> f64 {
    let mut far = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            far = far.max(haversine_distance(*a, *b));
        }
    }
    far
}

/// Classifier verdict: the absolute floor, its index within the range, and
/// the softmax probabilities over range slots.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorEstimate {
    pub floor: u32,
    pub in_range_index: usize,
    pub probabilities: Vec<f64>,
    pub range: FloorSearchRange,
}

/// Full detection step: search range, features, classifier, and mapping the
/// in-range class back to an absolute floor.
///
/// Padding slots (when the building is shorter than the range width) are
/// excluded from the argmax; ties go to the lowest floor.
pub fn detect_floor(
    profile: &WifiProfile,
    registry: &ApRegistry,
    model: &Mlp,
    w: u32,
) -> Result<FloorEstimate> {
    let range = compute_search_range(profile, registry, w)?;
    let features = extract_features(profile, registry, &range)?;
    let probabilities = model.infer(&features.flatten_normalized())?;
    if probabilities.len() != w as usize {
        return Err(Error::DimensionMismatch {
            expected: w as usize,
            got: probabilities.len(),
        });
    }
    let in_range_index = argmax_first(&probabilities[..range.floors.len()]);
    Ok(FloorEstimate {
        floor: range.r1 + in_range_index as u32,
        in_range_index,
        probabilities,
        range,
    })
}

/// Single-feature baseline: the range floor with the maximum feature value.
pub fn baseline_floor(
    profile: &WifiProfile,
    registry: &ApRegistry,
    range: &FloorSearchRange,
    feature: FeatureName,
) -> Result<u32> {
    let features = extract_features(profile, registry, range)?;
    let values: Vec<f64> = features.per_floor.iter().map(|f| f.get(feature)).collect();
    Ok(range.r1 + argmax_first(&values) as u32)
}

/// Index of the maximum, first occurrence on ties.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::FloorPolygon;
    use crate::scan::AccessPoint;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    const M: f64 = 1.0 / 111_194.92664455873;

    /// Square building at (30°N, 31°E), ~100 m on a side, identical outline
    /// per floor, with `aps[floor_idx]` = AP offsets in meters from the SW
    /// corner.
    fn registry(aps: &[Vec<(f64, f64)>]) -> ApRegistry {
        let lon_m = M / 30.0f64.to_radians().cos();
        let ring = vec![
            GeoPoint::new(30.0, 31.0).unwrap(),
            GeoPoint::new(30.0 + 100.0 * M, 31.0).unwrap(),
            GeoPoint::new(30.0 + 100.0 * M, 31.0 + 100.0 * lon_m).unwrap(),
            GeoPoint::new(30.0, 31.0 + 100.0 * lon_m).unwrap(),
        ];
        let polygons = vec![FloorPolygon::new(ring).unwrap(); aps.len()];
        let mut list = Vec::new();
        for (fi, floor_aps) in aps.iter().enumerate() {
            for (ai, (x, y)) in floor_aps.iter().enumerate() {
                list.push(AccessPoint {
                    mac: Mac::from_u64(((fi as u64 + 1) << 16 | (ai as u64 + 1)) << 4).unwrap(),
                    floor: fi as u32 + 1,
                    location: GeoPoint::new(30.0 + y * M, 31.0 + x * lon_m).unwrap(),
                });
            }
        }
        ApRegistry::new("test", polygons, list).unwrap()
    }

    fn profile_of(registry: &ApRegistry, rss: &[(u32, usize, f64)]) -> WifiProfile {
        let mut obs = BTreeMap::new();
        for &(floor, idx, r) in rss {
            let mac = registry.aps_on_floor(floor)[idx];
            obs.insert(mac, r);
        }
        WifiProfile::from_observations(0.0, 120.0, obs)
    }

    #[test]
    fn single_window_building() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 4]);
        let p = profile_of(&reg, &[(2, 0, -60.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        assert_eq!(range.r1(), 1);
        assert_eq!(range.floors(), &[1, 2, 3, 4]);
    }

    #[test]
    fn short_building_clips_range() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 3]);
        let p = profile_of(&reg, &[(1, 0, -60.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        assert_eq!(range.r1(), 1);
        assert_eq!(range.floors(), &[1, 2, 3]);
    }

    #[test]
    fn all_aps_on_floor_six_ties_to_lowest_window() {
        let reg = registry(&vec![vec![(10.0, 10.0), (60.0, 60.0)]; 9]);
        let p = profile_of(&reg, &[(6, 0, -55.0), (6, 1, -65.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        // Windows starting at 3, 4, 5, 6 all contain floor 6 with equal
        // score; ties resolve to the lowest start.
        assert_eq!(range.r1(), 3);
        assert!(range.contains(6));
    }

    #[test]
    fn strongest_window_wins() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 9]);
        let mut obs = vec![(7, 0, -50.0), (8, 0, -55.0)];
        let range = compute_search_range(&profile_of(&reg, &obs), &reg, 4).unwrap();
        assert!(range.contains(7) && range.contains(8));
        obs.push((1, 0, -95.0));
        let range = compute_search_range(&profile_of(&reg, &obs), &reg, 4).unwrap();
        assert!(range.contains(7) && range.contains(8));
    }

    #[test]
    fn empty_profile_rejected() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 4]);
        let p = WifiProfile::from_observations(0.0, 120.0, BTreeMap::new());
        assert!(matches!(
            compute_search_range(&p, &reg, 4),
            Err(Error::NoVisibleAps)
        ));
    }

    #[test]
    fn search_range_matches_bruteforce_oracle() {
        let reg = registry(&vec![vec![(10.0, 10.0), (50.0, 20.0), (80.0, 90.0)]; 9]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut spec = Vec::new();
            for floor in 1..=9u32 {
                for idx in 0..3usize {
                    if rng.gen_bool(0.3) {
                        spec.push((floor, idx, rng.gen_range(-95.0..-35.0)));
                    }
                }
            }
            if spec.is_empty() {
                continue;
            }
            let p = profile_of(&reg, &spec);
            let got = compute_search_range(&p, &reg, 4).unwrap();

            // Oracle: enumerate windows, score by summed margin above the
            // sentinel, pick the first maximum.
            let mut best = (f64::NEG_INFINITY, 0u32);
            for r1 in 1..=6u32 {
                let mut score = 0.0;
                for &(floor, _, rss) in &spec {
                    if floor >= r1 && floor <= r1 + 3 {
                        score += (rss - INVISIBLE_RSS_DBM).max(0.0);
                    }
                }
                if score > best.0 {
                    best = (score, r1);
                }
            }
            assert_eq!(got.r1(), best.1);
        }
    }

    #[test]
    fn feature_arithmetic_two_aps() {
        let reg = registry(&vec![vec![(10.0, 10.0), (90.0, 10.0)]; 4]);
        let p = profile_of(&reg, &[(2, 0, -50.0), (2, 1, -70.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        let fv = extract_features(&p, &reg, &range).unwrap();
        let f = &fv.per_floor()[1]; // floor 2
        assert_eq!(f.num, 2.0);
        assert_eq!(f.strongest, -50.0);
        assert_eq!(f.avg, -60.0);
        assert_eq!(f.var, 100.0);
        let a = reg.ap(reg.aps_on_floor(2)[0]).unwrap().location;
        let b = reg.ap(reg.aps_on_floor(2)[1]).unwrap().location;
        assert!((f.far - haversine_distance(a, b)).abs() < 1e-9);
        assert!((f.far - 80.0).abs() < 0.1);
    }

    #[test]
    fn single_ap_floor_has_zero_far() {
        let reg = registry(&vec![vec![(10.0, 10.0), (90.0, 10.0)]; 4]);
        let p = profile_of(&reg, &[(3, 0, -60.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        let fv = extract_features(&p, &reg, &range).unwrap();
        assert_eq!(fv.per_floor()[2].far, 0.0);
        assert_eq!(fv.per_floor()[2].num, 1.0);
    }

    #[test]
    fn empty_floor_gets_defaults() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 4]);
        let p = profile_of(&reg, &[(1, 0, -60.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        let fv = extract_features(&p, &reg, &range).unwrap();
        let empty = &fv.per_floor()[3];
        assert_eq!(empty.num, 0.0);
        assert_eq!(empty.strongest, INVISIBLE_RSS_DBM);
        assert_eq!(empty.avg, INVISIBLE_RSS_DBM);
        assert_eq!(empty.var, 0.0);
        assert_eq!(empty.far, 0.0);
    }

    #[test]
    fn local_average_uses_sentinel_for_silent_aps() {
        // Two APs on floor 1, 20 m apart; only one visible. Both fall in the
        // 30 m region, so LocAvg = (rss + (−100)) / 2.
        let reg = registry(&vec![vec![(40.0, 40.0), (60.0, 40.0)], vec![(40.0, 40.0)]]);
        let p = profile_of(&reg, &[(1, 0, -50.0)]);
        let range = compute_search_range(&p, &reg, 2).unwrap();
        let fv = extract_features(&p, &reg, &range).unwrap();
        let f1 = &fv.per_floor()[0];
        assert!((f1.loc_avg_30 - (-75.0)).abs() < 1e-9);
        // The floor-2 AP sits at the same 2D spot, inside the region but
        // silent: LocAvg_2 = −100.
        assert_eq!(fv.per_floor()[1].loc_avg_30, INVISIBLE_RSS_DBM);
    }

    #[test]
    fn features_match_naive_oracle() {
        let layout: Vec<Vec<(f64, f64)>> = (0..6)
            .map(|f| {
                (0..4)
                    .map(|a| (10.0 + 20.0 * a as f64, 15.0 + 11.0 * f as f64))
                    .collect()
            })
            .collect();
        let reg = registry(&layout);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut spec = Vec::new();
            for floor in 1..=6u32 {
                for idx in 0..4usize {
                    if rng.gen_bool(0.4) {
                        spec.push((floor, idx, rng.gen_range(-95.0..-35.0)));
                    }
                }
            }
            if spec.is_empty() {
                continue;
            }
            let p = profile_of(&reg, &spec);
            let range = compute_search_range(&p, &reg, 4).unwrap();
            let fv = extract_features(&p, &reg, &range).unwrap();

            // Straight-line recomputation of Num/Str/Avg/Var/Far per floor.
            for (i, &floor) in range.floors().iter().enumerate() {
                let vals: Vec<f64> = spec
                    .iter()
                    .filter(|s| s.0 == floor)
                    .map(|s| s.2)
                    .collect();
                let f = &fv.per_floor()[i];
                if vals.is_empty() {
                    assert_eq!(f.num, 0.0);
                    continue;
                }
                assert_eq!(f.num, vals.len() as f64);
                let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                assert!((f.strongest - mx).abs() < 1e-9);
                assert!((f.avg - mean).abs() < 1e-9);
                assert!((f.var - var).abs() < 1e-9);
                assert!(f.strongest >= f.avg - 1e-12);
                assert!(f.var >= 0.0);

                let locs: Vec<GeoPoint> = spec
                    .iter()
                    .filter(|s| s.0 == floor)
                    .map(|s| reg.ap(reg.aps_on_floor(s.0)[s.1]).unwrap().location)
                    .collect();
                let mut far = 0.0f64;
                for (ii, a) in locs.iter().enumerate() {
                    for b in &locs[ii + 1..] {
                        far = far.max(haversine_distance(*a, *b));
                    }
                }
                assert!((f.far - far).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flatten_pads_short_buildings_with_zeros() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 2]);
        let p = profile_of(&reg, &[(1, 0, -60.0)]);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        let fv = extract_features(&p, &reg, &range).unwrap();
        let flat = fv.flatten_normalized();
        assert_eq!(flat.len(), 32);
        assert!(flat[16..].iter().all(|v| *v == 0.0));
        assert!(flat.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn detect_floor_uniform_model_picks_lowest() {
        let reg = registry(&vec![vec![(10.0, 10.0)]; 6]);
        let p = profile_of(&reg, &[(4, 0, -50.0)]);
        let model = Mlp::zeroed(32, &[100, 100, 100, 100], 4);
        let est = detect_floor(&p, &reg, &model, 4).unwrap();
        let sum: f64 = est.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        // Zero weights → uniform probabilities → argmax falls on the first
        // range floor.
        assert_eq!(est.in_range_index, 0);
        assert_eq!(est.floor, est.range.r1());
        assert!(est.range.contains(est.floor));
    }

    #[test]
    fn baseline_argmax_and_ties() {
        let reg = registry(&vec![vec![(10.0, 10.0), (30.0, 10.0), (50.0, 10.0), (70.0, 10.0)]; 4]);
        // Counts per floor: 3, 4, 2, 1.
        let mut spec = Vec::new();
        for idx in 0..3 {
            spec.push((1u32, idx, -70.0));
        }
        for idx in 0..4 {
            spec.push((2u32, idx, -70.0));
        }
        for idx in 0..2 {
            spec.push((3u32, idx, -70.0));
        }
        spec.push((4u32, 0, -70.0));
        let p = profile_of(&reg, &spec);
        let range = compute_search_range(&p, &reg, 4).unwrap();
        assert_eq!(baseline_floor(&p, &reg, &range, FeatureName::Num).unwrap(), 2);
        // All-equal RSS → Str ties → first floor of the range.
        assert_eq!(baseline_floor(&p, &reg, &range, FeatureName::Str).unwrap(), 1);
    }

    #[test]
    fn features_ignore_observation_insertion_order() {
        let reg = registry(&vec![vec![(10.0, 10.0), (90.0, 90.0)]; 4]);
        let fwd = profile_of(&reg, &[(1, 0, -50.0), (2, 1, -60.0), (3, 0, -70.0)]);
        let rev = profile_of(&reg, &[(3, 0, -70.0), (2, 1, -60.0), (1, 0, -50.0)]);
        let range = compute_search_range(&fwd, &reg, 4).unwrap();
        assert_eq!(
            extract_features(&fwd, &reg, &range).unwrap(),
            extract_features(&rev, &reg, &range).unwrap()
        );
    }
}
