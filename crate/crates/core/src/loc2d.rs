//! 2D localization on a known floor. Signal strengths are first compensated
//! for floor attenuation, then bucketed into coarse ranks; each rank carries
//! a fitted Gaussian over true AP–user distance. Summing those Gaussians on
//! a grid over the floor outline yields a location likelihood surface, and
//! the fix is the weighted centroid of its near-peak region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, FloorPolygon, GeoPoint, LocalPoint};
use crate::scan::{ApRegistry, WifiProfile};

/// Default attenuation credit per floor separating user and AP, in dB.
pub const DEFAULT_FLOOR_ATTENUATION_DB: f64 = 15.0;

/// Default near-peak threshold for the centroid region.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.98;

/// Default grid resolution in meters.
pub const DEFAULT_GRID_RESOLUTION_M: f64 = 0.5;

/// Minimum calibration samples per rank.
pub const MIN_RANK_SAMPLES: usize = 30;

/// Coarse signal-strength buckets. Intervals are closed below, open above:
/// −70 dBm is Mild, −40 dBm is VeryStrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RssRank {
    VeryWeak,
    Weak,
    Mild,
    Moderate,
    Strong,
    VeryStrong,
}

impl RssRank {
    pub const ALL: [RssRank; 6] = [
        RssRank::VeryWeak,
        RssRank::Weak,
        RssRank::Mild,
        RssRank::Moderate,
        RssRank::Strong,
        RssRank::VeryStrong,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            RssRank::VeryWeak => "very-weak",
            RssRank::Weak => "weak",
            RssRank::Mild => "mild",
            RssRank::Moderate => "moderate",
            RssRank::Strong => "strong",
            RssRank::VeryStrong => "very-strong",
        }
    }
}

/// Bucket a signal strength. Total over all finite inputs.
pub fn rank_of(rss: f64) -> RssRank {
    if rss < -80.0 {
        RssRank::VeryWeak
    } else if rss < -70.0 {
        RssRank::Weak
    } else if rss < -60.0 {
        RssRank::Mild
    } else if rss < -50.0 {
        RssRank::Moderate
    } else if rss < -40.0 {
        RssRank::Strong
    } else {
        RssRank::VeryStrong
    }
}

/// Distance distribution for one rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankGaussian {
    /// Mean AP–user distance in meters.
    pub mu: f64,
    /// Spread in meters; never below the 0.5 m floor.
    pub sigma: f64,
}

/// Fitted distance model per rank, plus fit provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankGaussianModel {
    /// Indexed in `RssRank::ALL` order (VeryWeak first).
    pub ranks: [RankGaussian; 6],
    pub anomaly_threshold: f64,
    /// Identifier of the calibration dataset this was fitted from.
    pub fitted_from: String,
}

impl RankGaussianModel {
    pub fn rank(&self, rank: RssRank) -> RankGaussian {
        self.ranks[rank as usize]
    }

    /// Stronger ranks must not imply larger distances; spreads must be
    /// positive and means non-negative.
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.ranks.iter().enumerate() {
            if !g.mu.is_finite() || g.mu < 0.0 || !g.sigma.is_finite() || g.sigma <= 0.0 {
                return Err(Error::RankModelInvalid(format!(
                    "rank {} has mu {} sigma {}",
                    RssRank::ALL[i].label(),
                    g.mu,
                    g.sigma
                )));
            }
        }
        for pair in self.ranks.windows(2) {
            if pair[1].mu > pair[0].mu + 1e-9 {
                return Err(Error::RankModelInvalid(
                    "mean distance increases toward stronger ranks".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.anomaly_threshold) || self.anomaly_threshold == 0.0 {
            return Err(Error::RankModelInvalid(format!(
                "anomaly threshold {} outside (0, 1]",
                self.anomaly_threshold
            )));
        }
        Ok(())
    }
}

/// Fit the per-rank distance Gaussians from (true distance, rss) pairs.
///
/// Outliers are trimmed iteratively: points beyond 3 sample standard
/// deviations from the mean are dropped until none remain, but each pass
/// retains at least `anomaly_threshold` of its input (the closest points
/// win when the cap binds). Fitted spread is floored at 0.5 m.
pub fn fit_rank_model(
    samples: &[(f64, f64)],
    anomaly_threshold: f64,
    fitted_from: impl Into<String>,
) -> Result<RankGaussianModel> {
    if !(anomaly_threshold > 0.0 && anomaly_threshold <= 1.0) {
        return Err(Error::RankModelInvalid(format!(
            "anomaly threshold {anomaly_threshold} outside (0, 1]"
        )));
    }
    let mut buckets: [Vec<f64>; 6] = Default::default();
    for (dist, rss) in samples {
        if !dist.is_finite() || *dist < 0.0 || !rss.is_finite() {
            return Err(Error::RankModelInvalid(format!(
                "bad calibration sample (distance {dist}, rss {rss})"
            )));
        }
        buckets[rank_of(*rss) as usize].push(*dist);
    }
    for (i, b) in buckets.iter().enumerate() {
        if b.len() < MIN_RANK_SAMPLES {
            return Err(Error::TooFewRankSamples {
                rank: RssRank::ALL[i].label(),
                count: b.len(),
                min: MIN_RANK_SAMPLES,
            });
        }
    }

    let mut ranks = [RankGaussian { mu: 0.0, sigma: 0.5 }; 6];
    for (i, bucket) in buckets.iter().enumerate() {
        let (mu, sigma) = trimmed_gaussian(bucket, anomaly_threshold);
        ranks[i] = RankGaussian { mu, sigma: sigma.max(0.5) };
    }
    let model = RankGaussianModel {
        ranks,
        anomaly_threshold,
        fitted_from: fitted_from.into(),
    };
    model.validate()?;
    Ok(model)
}

/// Iterative 3σ trimming to a fixed point, each pass keeping ≥ `retain` of
/// its points. Returns (mean, sample standard deviation).
fn trimmed_gaussian(values: &[f64], retain: f64) -> (f64, f64) {
    let mut pts = values.to_vec();
    loop {
        let (mu, sd) = mean_std(&pts);
        if sd == 0.0 || pts.len() < 2 {
            return (mu, sd);
        }
        let mut keep: Vec<f64> = pts.iter().copied().filter(|d| (d - mu).abs() <= 3.0 * sd).collect();
        if keep.len() == pts.len() {
            return (mu, sd);
        }
        let min_keep = (retain * pts.len() as f64).ceil() as usize;
        if keep.len() < min_keep {
            // The trim would cut too deep; keep the closest `min_keep` points
            // instead.
            let mut by_residual = pts.clone();
            by_residual.sort_by(|a, b| {
                (a - mu).abs().partial_cmp(&(b - mu).abs()).expect("finite")
            });
            by_residual.truncate(min_keep);
            keep = by_residual;
        }
        pts = keep;
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Compensate cross-floor attenuation: raise each AP's rss by
/// `w_f · |user floor − AP floor|`. Same-floor APs pass through unchanged.
pub fn apply_faf(
    profile: &WifiProfile,
    registry: &ApRegistry,
    user_floor: u32,
    w_f: f64,
) -> Result<WifiProfile> {
    let mut obs = std::collections::BTreeMap::new();
    for (mac, rss) in profile.observations() {
        let ap = registry
            .ap(*mac)
            .ok_or_else(|| Error::UnregisteredMac(mac.to_string()))?;
        let floors_apart = (ap.floor as i64 - user_floor as i64).unsigned_abs() as f64;
        obs.insert(*mac, rss + w_f * floors_apart);
    }
    Ok(WifiProfile::from_observations(
        profile.end_time,
        profile.window_secs,
        obs,
    ))
}

/// One grid cell of the likelihood surface, in the floor's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Max-normalized location likelihood over a floor outline.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationPdf {
    floor: u32,
    anchor: GeoPoint,
    resolution: f64,
    cells: Vec<PdfCell>,
}

impl LocationPdf {
    pub fn floor(&self) -> u32 {
        self.floor
    }

    pub fn anchor(&self) -> GeoPoint {
        self.anchor
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Cells inside the floor outline; values normalized so the max is 1.
    pub fn cells(&self) -> &[PdfCell] {
        &self.cells
    }
}

/// A single localization output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationFix {
    pub t: f64,
    pub floor: u32,
    pub point: GeoPoint,
    /// Area of the near-peak region the centroid was taken over, m².
    pub area: f64,
}

/// Gaussian density N(μ, σ²) evaluated at `d`.
fn gaussian_pdf(d: f64, mu: f64, sigma: f64) -> f64 {
    let z = (d - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Build the likelihood surface for one floor.
///
/// Cell centers lie on a `resolution`-spaced grid over the outline's
/// bounding box; centers outside the outline are dropped. Each visible AP
/// contributes a Gaussian in its rank's fitted distance, evaluated at the
/// planar distance from the AP to the cell.
pub fn compute_pdf(
    profile: &WifiProfile,
    registry: &ApRegistry,
    polygon: &FloorPolygon,
    floor: u32,
    model: &RankGaussianModel,
    resolution: f64,
) -> Result<LocationPdf> {
    if profile.is_empty() {
        return Err(Error::NoVisibleAps);
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Pipeline(format!("grid resolution {resolution} must be positive")));
    }
    let anchor = polygon.anchor();
    let ring = polygon.local_ring();
    let (min_x, min_y, max_x, max_y) = polygon.local_bounds();
    // The 1e-9 slack keeps spans that are exact multiples of the resolution
    // from picking up a spurious extra row of outside-the-outline cells.
    let nx = ((((max_x - min_x) / resolution) - 1e-9).ceil() as usize).max(1);
    let ny = ((((max_y - min_y) / resolution) - 1e-9).ceil() as usize).max(1);

    let mut sources = Vec::with_capacity(profile.len());
    for (mac, rss) in profile.observations() {
        let ap = registry
            .ap(*mac)
            .ok_or_else(|| Error::UnregisteredMac(mac.to_string()))?;
        let lp = geo::project_local(anchor, ap.location);
        let g = model.rank(rank_of(*rss));
        sources.push((lp.x, lp.y, g.mu, g.sigma));
    }

    let mut cells = Vec::new();
    let mut max_value = 0.0f64;
    for j in 0..ny {
        let y = min_y + (j as f64 + 0.5) * resolution;
        for i in 0..nx {
            let x = min_x + (i as f64 + 0.5) * resolution;
            if !geo::contains_local(&ring, x, y) {
                continue;
            }
            let value: f64 = sources
                .iter()
                .map(|(ax, ay, mu, sigma)| {
                    let d = ((x - ax).powi(2) + (y - ay).powi(2)).sqrt();
                    gaussian_pdf(d, *mu, *sigma)
                })
                .sum();
            max_value = max_value.max(value);
            cells.push(PdfCell { x, y, value });
        }
    }
    if cells.is_empty() {
        return Err(Error::Pipeline(
            "no grid cells fall inside the floor outline; resolution too coarse".into(),
        ));
    }
    if max_value <= 0.0 {
        return Err(Error::Pipeline(
            "location likelihood vanished everywhere on the floor".into(),
        ));
    }
    for c in &mut cells {
        c.value /= max_value;
    }
    Ok(LocationPdf {
        floor,
        anchor,
        resolution,
        cells,
    })
}

/// Weighted centroid of the cells whose normalized likelihood is at least
/// `threshold`. Non-empty by construction: the peak cell is exactly 1.
pub fn estimate_location(pdf: &LocationPdf, threshold: f64, t: f64) -> Result<LocationFix> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Pipeline(format!("peak threshold {threshold} outside (0, 1]")));
    }
    let mut sum_w = 0.0;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut count = 0usize;
    for c in &pdf.cells {
        if c.value >= threshold {
            sum_w += c.value;
            sum_x += c.x * c.value;
            sum_y += c.y * c.value;
            count += 1;
        }
    }
    if count == 0 || sum_w <= 0.0 {
        return Err(Error::Pipeline("empty near-peak region".into()));
    }
    let point = geo::unproject_local(LocalPoint {
        x: sum_x / sum_w,
        y: sum_y / sum_w,
        anchor: pdf.anchor,
    })?;
    Ok(LocationFix {
        t,
        floor: pdf.floor,
        point,
        area: count as f64 * pdf.resolution * pdf.resolution,
    })
}
