//! Synthetic multistory building + radio propagation simulator. Generates
//! AP registries, walking trajectories, and scan traces with attached ground
//! truth — the data source for classifier training and for end-to-end
//! evaluation against known positions.
//!
//! Propagation is log-distance path loss with per-floor attenuation and
//! Gaussian shadowing; detection near the threshold rolls off smoothly.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, FloorPolygon, GeoPoint, LocalPoint};
use crate::scan::{AccessPoint, ApRegistry, Mac, WifiObservation, WifiScan};

pub const DEFAULT_FLOOR_HEIGHT_M: f64 = 3.5;
/// Height of wall/ceiling-mounted APs above their floor slab.
pub const AP_MOUNT_HEIGHT_M: f64 = 2.8;
/// Height of the scanning device above the user's floor slab.
pub const USER_DEVICE_HEIGHT_M: f64 = 1.2;

fn default_floor_height() -> f64 {
    DEFAULT_FLOOR_HEIGHT_M
}
fn default_origin_lat() -> f64 {
    30.05
}
fn default_origin_lon() -> f64 {
    31.25
}
fn default_id() -> String {
    "sim-building".into()
}

/// AP layout for one floor: an automatic jittered grid of `count` APs, or
/// explicit local positions in meters from the south-west corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorAps {
    Count(u32),
    Explicit(Vec<(f64, f64)>),
}

/// Rectangular multistory building description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_origin_lat")]
    pub origin_lat: f64,
    #[serde(default = "default_origin_lon")]
    pub origin_lon: f64,
    /// Footprint extent along x, meters.
    pub width_m: f64,
    /// Footprint extent along y, meters.
    pub depth_m: f64,
    #[serde(default = "default_floor_height")]
    pub floor_height_m: f64,
    /// Per-floor AP layout, ground floor first.
    pub floors: Vec<FloorAps>,
    /// Optional interior walls as local segments, for the per-wall loss hook.
    #[serde(default)]
    pub walls: Vec<((f64, f64), (f64, f64))>,
    #[serde(default)]
    pub seed: u64,
}

fn default_p0() -> f64 {
    -40.0
}
fn default_exponent() -> f64 {
    3.0
}
fn default_floor_loss() -> f64 {
    15.0
}
fn default_sigma_sh() -> f64 {
    4.0
}
fn default_threshold() -> f64 {
    -90.0
}
fn default_rolloff() -> f64 {
    3.0
}

/// Log-distance propagation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Reference power at 1 m, dBm.
    #[serde(default = "default_p0")]
    pub p0: f64,
    /// Path-loss exponent.
    #[serde(default = "default_exponent")]
    pub n: f64,
    /// Attenuation per floor of separation, dB.
    #[serde(default = "default_floor_loss")]
    pub floor_loss: f64,
    /// Shadow-fading standard deviation, dB.
    #[serde(default = "default_sigma_sh")]
    pub sigma_sh: f64,
    /// Detection threshold, dBm.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Width of the detection-probability rolloff around the threshold, dB
    /// (10%→90% span). Ignored when shadowing is disabled.
    #[serde(default = "default_rolloff")]
    pub rolloff: f64,
    /// Loss per crossed interior wall, dB (same-floor paths only).
    #[serde(default)]
    pub wall_loss: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            p0: default_p0(),
            n: default_exponent(),
            floor_loss: default_floor_loss(),
            sigma_sh: default_sigma_sh(),
            threshold: default_threshold(),
            rolloff: default_rolloff(),
            wall_loss: 0.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n > 0.0
            && self.sigma_sh >= 0.0
            && self.threshold < self.p0
            && self.floor_loss >= 0.0
            && self.rolloff >= 0.0
            && self.wall_loss >= 0.0
            && [self.p0, self.n, self.floor_loss, self.sigma_sh, self.threshold]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::SimConfigInvalid(format!("bad propagation params: {self:?}")))
        }
    }
}

fn default_speed() -> f64 {
    1.2
}
fn default_interval() -> f64 {
    2.0
}

/// One constant-floor leg of a walk: a polyline, optionally holding the last
/// waypoint for `dwell_secs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub floor: u32,
    /// Local coordinates in meters from the south-west corner.
    pub waypoints: Vec<(f64, f64)>,
    #[serde(default)]
    pub dwell_secs: f64,
}

/// A user walk through the building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<TrajectorySegment>,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    #[serde(default = "default_interval")]
    pub scan_interval_secs: f64,
    /// Constant receiver gain offset, dB — crude device heterogeneity.
    #[serde(default)]
    pub device_offset_db: f64,
}

/// A building realized from its spec: the registry plus cached local AP
/// positions (x, y east/north meters, z height above ground).
#[derive(Debug, Clone)]
pub struct GeneratedBuilding {
    pub registry: ApRegistry,
    pub spec: BuildingSpec,
    ap_local: BTreeMap<Mac, ([f64; 3], u32)>,
}

impl GeneratedBuilding {
    pub fn origin(&self) -> GeoPoint {
        GeoPoint::new(self.spec.origin_lat, self.spec.origin_lon).expect("validated")
    }

    pub fn to_geo(&self, x: f64, y: f64) -> Result<GeoPoint> {
        geo::unproject_local(LocalPoint { x, y, anchor: self.origin() })
    }

    /// Device height when standing on `floor` (1-based).
    pub fn user_z(&self, floor: u32) -> f64 {
        (floor - 1) as f64 * self.spec.floor_height_m + USER_DEVICE_HEIGHT_M
    }

    pub fn ap_position(&self, mac: Mac) -> Option<([f64; 3], u32)> {
        self.ap_local.get(&mac).copied()
    }

    fn contains_local(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && x <= self.spec.width_m && y >= 0.0 && y <= self.spec.depth_m
    }
}

/// Materialize a building: floor outlines, AP placement, registry.
pub fn generate_building(spec: &BuildingSpec) -> Result<GeneratedBuilding> {
    if spec.floors.is_empty() {
        return Err(Error::SimConfigInvalid("building needs at least one floor".into()));
    }
    if !(spec.width_m > 0.0 && spec.depth_m > 0.0 && spec.floor_height_m > 0.0) {
        return Err(Error::SimConfigInvalid(format!(
            "non-positive dimensions {} × {} × {}",
            spec.width_m, spec.depth_m, spec.floor_height_m
        )));
    }
    let origin = GeoPoint::new(spec.origin_lat, spec.origin_lon)
        .map_err(|e| Error::SimConfigInvalid(format!("origin: {e}")))?;
    let at = |x: f64, y: f64| geo::unproject_local(LocalPoint { x, y, anchor: origin });
    let ring = vec![
        at(0.0, 0.0)?,
        at(spec.width_m, 0.0)?,
        at(spec.width_m, spec.depth_m)?,
        at(0.0, spec.depth_m)?,
    ];
    let polygon = FloorPolygon::new(ring)?;
    let polygons = vec![polygon; spec.floors.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut aps = Vec::new();
    let mut ap_local = BTreeMap::new();
    let mut next_index = 1u64;
    for (fi, layout) in spec.floors.iter().enumerate() {
        let floor = fi as u32 + 1;
        let positions = match layout {
            FloorAps::Count(n) => auto_layout(*n, spec.width_m, spec.depth_m, &mut rng),
            FloorAps::Explicit(list) => list.clone(),
        };
        for (x, y) in positions {
            if !(x >= 0.0 && x <= spec.width_m && y >= 0.0 && y <= spec.depth_m) {
                return Err(Error::SimConfigInvalid(format!(
                    "AP at ({x}, {y}) outside the {} × {} footprint",
                    spec.width_m, spec.depth_m
                )));
            }
            let mac = Mac::from_u64(0x0200_0000_0000 | (next_index << 4))
                .expect("synthesized MAC fits 48 bits");
            next_index += 1;
            let z = fi as f64 * spec.floor_height_m + AP_MOUNT_HEIGHT_M;
            aps.push(AccessPoint { mac, floor, location: at(x, y)? });
            ap_local.insert(mac, ([x, y, z], floor));
        }
    }
    let registry = ApRegistry::new(spec.id.clone(), polygons, aps)?;
    Ok(GeneratedBuilding { registry, spec: spec.clone(), ap_local })
}

/// Near-uniform jittered grid of `count` points inside w × d meters.
fn auto_layout(count: u32, w: f64, d: f64, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    if count == 0 {
        return Vec::new();
    }
    let nx = ((count as f64 * w / d).sqrt().ceil() as u32).max(1);
    let ny = ((count as f64) / nx as f64).ceil() as u32;
    let (cw, ch) = (w / nx as f64, d / ny as f64);
    let mut out = Vec::with_capacity(count as usize);
    'outer: for j in 0..ny {
        for i in 0..nx {
            if out.len() == count as usize {
                break 'outer;
            }
            let jx = rng.gen_range(-0.25..0.25) * cw;
            let jy = rng.gen_range(-0.25..0.25) * ch;
            let x = ((i as f64 + 0.5) * cw + jx).clamp(0.3, w - 0.3);
            let y = ((j as f64 + 0.5) * ch + jy).clamp(0.3, d - 0.3);
            out.push((x, y));
        }
    }
    out
}

/// One propagation draw from an AP to a user position.
///
/// `floors_apart` drives the per-floor attenuation, `wall_crossings` the
/// per-wall hook. With shadowing disabled, visibility is a hard threshold
/// cut (and therefore monotone in distance); with shadowing, detection near
/// the threshold is Bernoulli with a logistic rolloff over `rolloff` dB.
/// Visible results are clamped to ≥ −100 dBm.
pub fn simulate_rss(
    ap: [f64; 3],
    user: [f64; 3],
    floors_apart: u32,
    wall_crossings: u32,
    params: &PropagationParams,
    rng: &mut impl Rng,
) -> Option<f64> {
    let d3 = ((ap[0] - user[0]).powi(2) + (ap[1] - user[1]).powi(2) + (ap[2] - user[2]).powi(2))
        .sqrt()
        .max(1.0);
    let mean = params.p0
        - 10.0 * params.n * d3.log10()
        - params.floor_loss * floors_apart as f64
        - params.wall_loss * wall_crossings as f64;
    let rss = if params.sigma_sh > 0.0 {
        let noise = Normal::new(0.0, params.sigma_sh).expect("validated sigma");
        mean + noise.sample(rng)
    } else {
        mean
    };
    let visible = if params.sigma_sh == 0.0 || params.rolloff == 0.0 {
        rss >= params.threshold
    } else {
        // Logistic detection probability spanning 10%→90% over `rolloff` dB.
        let s = params.rolloff / 81.0f64.ln();
        let p = 1.0 / (1.0 + (-(rss - params.threshold) / s).exp());
        rng.gen::<f64>() < p
    };
    visible.then(|| rss.max(-100.0))
}

/// True position attached to a generated scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub t: f64,
    pub floor: u32,
    pub point: GeoPoint,
}

/// A generated scan trace with per-scan ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scans: Vec<WifiScan>,
    pub truth: Vec<GroundTruth>,
}

/// Piecewise-linear position timeline entry.
struct Leg {
    t0: f64,
    t1: f64,
    floor: u32,
    from: (f64, f64),
    to: (f64, f64),
}

fn build_timeline(b: &GeneratedBuilding, traj: &Trajectory) -> Result<Vec<Leg>> {
    if traj.segments.is_empty() {
        return Err(Error::SimConfigInvalid("trajectory has no segments".into()));
    }
    if !(traj.speed_mps > 0.0 && traj.scan_interval_secs > 0.0) {
        return Err(Error::SimConfigInvalid(
            "speed and scan interval must be positive".into(),
        ));
    }
    let mut legs = Vec::new();
    let mut t = 0.0;
    for seg in &traj.segments {
        if seg.floor == 0 || seg.floor > b.registry.floor_count() {
            return Err(Error::SimConfigInvalid(format!(
                "segment floor {} outside 1..={}",
                seg.floor,
                b.registry.floor_count()
            )));
        }
        if seg.waypoints.is_empty() {
            return Err(Error::SimConfigInvalid("segment has no waypoints".into()));
        }
        for &(x, y) in &seg.waypoints {
            if !b.contains_local(x, y) {
                return Err(Error::SimConfigInvalid(format!(
                    "waypoint ({x}, {y}) outside the footprint"
                )));
            }
        }
        for pair in seg.waypoints.windows(2) {
            let (a, c) = (pair[0], pair[1]);
            let len = ((c.0 - a.0).powi(2) + (c.1 - a.1).powi(2)).sqrt();
            if len == 0.0 {
                continue;
            }
            let dur = len / traj.speed_mps;
            legs.push(Leg { t0: t, t1: t + dur, floor: seg.floor, from: a, to: c });
            t += dur;
        }
        if seg.dwell_secs > 0.0 {
            let p = *seg.waypoints.last().expect("non-empty");
            legs.push(Leg { t0: t, t1: t + seg.dwell_secs, floor: seg.floor, from: p, to: p });
            t += seg.dwell_secs;
        }
    }
    if legs.is_empty() {
        // A single stationary waypoint with no dwell: hold for one interval.
        let seg = &traj.segments[0];
        let p = seg.waypoints[0];
        legs.push(Leg { t0: 0.0, t1: traj.scan_interval_secs, floor: seg.floor, from: p, to: p });
    }
    Ok(legs)
}

fn position_at(legs: &[Leg], t: f64) -> (u32, f64, f64) {
    let leg = legs
        .iter()
        .find(|l| t >= l.t0 && t <= l.t1)
        .unwrap_or_else(|| legs.last().expect("non-empty"));
    let span = leg.t1 - leg.t0;
    let frac = if span > 0.0 { ((t - leg.t0) / span).clamp(0.0, 1.0) } else { 0.0 };
    (
        leg.floor,
        leg.from.0 + frac * (leg.to.0 - leg.from.0),
        leg.from.1 + frac * (leg.to.1 - leg.from.1),
    )
}

/// Segment-intersection test for the wall-loss hook.
fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

/// One scan at a standing position on `floor` (1-based), timestamped `t`.
pub fn simulate_scan(
    b: &GeneratedBuilding,
    floor: u32,
    x: f64,
    y: f64,
    t: f64,
    params: &PropagationParams,
    rng: &mut impl Rng,
) -> Result<WifiScan> {
    if floor == 0 || floor > b.registry.floor_count() {
        return Err(Error::SimConfigInvalid(format!(
            "scan floor {floor} outside 1..={}",
            b.registry.floor_count()
        )));
    }
    if !b.contains_local(x, y) {
        return Err(Error::SimConfigInvalid(format!(
            "scan position ({x}, {y}) outside the footprint"
        )));
    }
    let user = [x, y, b.user_z(floor)];
    let mut obs = Vec::new();
    for (mac, (ap_pos, ap_floor)) in &b.ap_local {
        let floors_apart = ap_floor.abs_diff(floor);
        let crossings = if floors_apart == 0 && params.wall_loss > 0.0 {
            b.spec
                .walls
                .iter()
                .filter(|(wa, wb)| segments_cross((ap_pos[0], ap_pos[1]), (x, y), *wa, *wb))
                .count() as u32
        } else {
            0
        };
        if let Some(rss) = simulate_rss(*ap_pos, user, floors_apart, crossings, params, rng) {
            obs.push(WifiObservation { mac: *mac, rss });
        }
    }
    WifiScan::new(t, obs)
}

/// Walk the trajectory, emitting one scan per interval with ground truth.
pub fn generate_trace(
    b: &GeneratedBuilding,
    traj: &Trajectory,
    params: &PropagationParams,
    seed: u64,
) -> Result<SimTrace> {
    params.validate()?;
    let legs = build_timeline(b, traj)?;
    let total = legs.last().expect("non-empty").t1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Receiver gain folds into the reference power; the detection threshold
    // is receiver-side and stays put.
    let mut eff = params.clone();
    eff.p0 += traj.device_offset_db;

    let mut scans = Vec::new();
    let mut truth = Vec::new();
    let mut t = 0.0;
    while t <= total + 1e-9 {
        let (floor, x, y) = position_at(&legs, t);
        scans.push(simulate_scan(b, floor, x, y, t, &eff, &mut rng)?);
        truth.push(GroundTruth { t, floor, point: b.to_geo(x, y)? });
        t += traj.scan_interval_secs;
    }
    Ok(SimTrace { scans, truth })
}

/// Calibration pairs (true 2D distance, observed rss) for same-floor APs.
///
/// Distances are drawn from a two-scale log-uniform mixture — most draws
/// span the whole 0.3–60 m field, with extra mass right under the AP so the
/// strongest readings are well represented despite the mount-height gap.
/// Invisible draws are rejected and retried.
pub fn rank_training_samples(
    b: &GeneratedBuilding,
    params: &PropagationParams,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let aps: Vec<([f64; 3], u32)> = b.ap_local.values().copied().collect();
    if aps.is_empty() {
        return Err(Error::SimConfigInvalid("building has no APs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let limit = count.saturating_mul(60).max(1000);
    let ln_lo = 0.3f64.ln();
    while out.len() < count {
        attempts += 1;
        if attempts > limit {
            return Err(Error::SimConfigInvalid(
                "rank-sample rejection rate too high; check propagation params".into(),
            ));
        }
        let (ap_pos, ap_floor) = aps[rng.gen_range(0..aps.len())];
        let ln_hi = if rng.gen::<f64>() < 0.3 { 2.5f64.ln() } else { 60.0f64.ln() };
        let d2 = rng.gen_range(ln_lo..ln_hi).exp();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let user = [
            ap_pos[0] + d2 * theta.cos(),
            ap_pos[1] + d2 * theta.sin(),
            b.user_z(ap_floor),
        ];
        if let Some(rss) = simulate_rss(ap_pos, user, 0, 0, params, &mut rng) {
            out.push((d2, rss));
        }
    }
    Ok(out)
}
