//! Post-processing for location fixes: a linear quality model predicting an
//! ambiguity radius from scan statistics, and a per-axis position–velocity
//! Kalman filter smoothing short windows of fixes weighted by that quality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, LocalPoint};
use crate::loc2d::LocationFix;
use crate::scan::WifiProfile;

/// Default refinement window length in seconds.
pub const DEFAULT_WINDOW_SECS: f64 = 60.0;

/// Minimum samples for fitting the quality regression.
pub const MIN_QUALITY_SAMPLES: usize = 50;

/// Scan statistics feeding the quality regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    /// Visible AP count in the localization profile.
    pub ap_count: f64,
    /// Mean RSS over the profile, dBm.
    pub mean_rss: f64,
    /// Maximum RSS over the profile, dBm.
    pub max_rss: f64,
    /// Area of the near-peak centroid region, m².
    pub area: f64,
}

impl QualityFeatures {
    pub fn from_profile(profile: &WifiProfile, area: f64) -> Result<Self> {
        if profile.is_empty() {
            return Err(Error::NoVisibleAps);
        }
        let n = profile.len() as f64;
        let mean_rss = profile.observations().values().sum::<f64>() / n;
        let max_rss = profile
            .observations()
            .values()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { ap_count: n, mean_rss, max_rss, area })
    }

    fn row(&self) -> [f64; 5] {
        [1.0, self.ap_count, self.mean_rss, self.max_rss, self.area]
    }
}

/// Linear predictor of the expected error radius (meters, clamped to ≥ 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub intercept: f64,
    /// Weights for (ap_count, mean_rss, max_rss, area).
    pub weights: [f64; 4],
}

impl QualityModel {
    pub fn predict(&self, f: &QualityFeatures) -> f64 {
        let row = f.row();
        let raw = self.intercept
            + self
                .weights
                .iter()
                .zip(&row[1..])
                .map(|(w, x)| w * x)
                .sum::<f64>();
        raw.max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intercept.is_finite() && self.weights.iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::Schema("quality model has non-finite coefficients".into()))
        }
    }
}

/// Ordinary least squares over (features, observed error radius) pairs.
pub fn fit_quality_model(samples: &[(QualityFeatures, f64)]) -> Result<QualityModel> {
    if samples.len() < MIN_QUALITY_SAMPLES {
        return Err(Error::QualityFit(format!(
            "{} samples, need at least {MIN_QUALITY_SAMPLES}",
            samples.len()
        )));
    }
    // Normal equations: (XᵀX) β = Xᵀy, 5 unknowns.
    let mut ata = [[0.0f64; 5]; 5];
    let mut atb = [0.0f64; 5];
    for (f, y) in samples {
        if !y.is_finite() {
            return Err(Error::QualityFit(format!("non-finite target {y}")));
        }
        let row = f.row();
        for i in 0..5 {
            for j in 0..5 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let beta = solve_5x5(ata, atb).ok_or_else(|| {
        Error::QualityFit(
            "design matrix is rank-deficient; provide more varied samples".into(),
        )
    })?;
    Ok(QualityModel {
        intercept: beta[0],
        weights: [beta[1], beta[2], beta[3], beta[4]],
    })
}

/// Gaussian elimination with partial pivoting; `None` when near-singular.
fn solve_5x5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..5 {
        let pivot_row = (col..5)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[pivot_row][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..5 {
            let factor = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 5];
    for row in (0..5).rev() {
        let mut acc = b[row];
        for k in (row + 1)..5 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// One-axis constant-velocity Kalman state: [position; velocity] with a 2×2
/// covariance. Process noise is zero; all adaptation comes through the
/// measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfState {
    pub pos: f64,
    pub vel: f64,
    p: [[f64; 2]; 2],
}

impl KfState {
    /// Start at a known position with unknown velocity (variance 100).
    pub fn new(pos: f64) -> Self {
        Self {
            pos,
            vel: 0.0,
            p: [[100.0, 0.0], [0.0, 100.0]],
        }
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.p
    }

    /// Propagate by `dt` seconds under constant velocity.
    pub fn predict(&mut self, dt: f64) {
        self.pos += self.vel * dt;
        // P ← A P Aᵀ with A = [[1, dt], [0, 1]].
        let [[p00, p01], [p10, p11]] = self.p;
        self.p = [
            [p00 + dt * (p10 + p01) + dt * dt * p11, p01 + dt * p11],
            [p10 + dt * p11, p11],
        ];
    }

    /// Fuse a (position, velocity) measurement with independent variances.
    pub fn update(&mut self, z_pos: f64, z_vel: f64, var_pos: f64, var_vel: f64) {
        let s = [
            [self.p[0][0] + var_pos, self.p[0][1]],
            [self.p[1][0], self.p[1][1] + var_vel],
        ];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let scale = s[0][0].abs().max(s[1][1].abs()).max(1e-12);
        let k = if det.abs() < 1e-12 * scale * scale {
            // Degenerate innovation covariance (exact measurements on a
            // collapsed state): trust the measurement outright.
            [[1.0, 0.0], [0.0, 1.0]]
        } else {
            let inv = [
                [s[1][1] / det, -s[0][1] / det],
                [-s[1][0] / det, s[0][0] / det],
            ];
            [
                [
                    self.p[0][0] * inv[0][0] + self.p[0][1] * inv[1][0],
                    self.p[0][0] * inv[0][1] + self.p[0][1] * inv[1][1],
                ],
                [
                    self.p[1][0] * inv[0][0] + self.p[1][1] * inv[1][0],
                    self.p[1][0] * inv[0][1] + self.p[1][1] * inv[1][1],
                ],
            ]
        };
        let dx = z_pos - self.pos;
        let dv = z_vel - self.vel;
        self.pos += k[0][0] * dx + k[0][1] * dv;
        self.vel += k[1][0] * dx + k[1][1] * dv;
        // P ← (I − K) P, then re-symmetrize against round-off.
        let ik = [[1.0 - k[0][0], -k[0][1]], [-k[1][0], 1.0 - k[1][1]]];
        let p = self.p;
        let mut np = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                np[i][j] = ik[i][0] * p[0][j] + ik[i][1] * p[1][j];
            }
        }
        let sym = (np[0][1] + np[1][0]) / 2.0;
        self.p = [[np[0][0], sym], [sym, np[1][1]]];
    }
}

/// A same-floor, time-ordered run of fixes with their quality radii.
#[derive(Debug, Clone, PartialEq)]
pub struct FixWindow {
    floor: u32,
    entries: Vec<(LocationFix, f64)>,
}

impl FixWindow {
    pub fn new(entries: Vec<(LocationFix, f64)>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::FixWindowInvalid("empty window".into()))?;
        let floor = first.0.floor;
        for pair in entries.windows(2) {
            if pair[1].0.t <= pair[0].0.t {
                return Err(Error::FixWindowInvalid(format!(
                    "timestamps not strictly increasing ({} then {})",
                    pair[0].0.t, pair[1].0.t
                )));
            }
        }
        for (fix, quality) in &entries {
            if fix.floor != floor {
                return Err(Error::FixWindowInvalid(format!(
                    "mixed floors {} and {}",
                    floor, fix.floor
                )));
            }
            if !quality.is_finite() || *quality < 0.0 {
                return Err(Error::FixWindowInvalid(format!(
                    "bad quality radius {quality}"
                )));
            }
        }
        Ok(Self { floor, entries })
    }

    pub fn floor(&self) -> u32 {
        self.floor
    }

    pub fn entries(&self) -> &[(LocationFix, f64)] {
        &self.entries
    }
}

/// Refine the window's last fix by filtering both axes through the window.
///
/// The quality radius is treated as a ~2σ ambiguity circle, so the position
/// measurement variance is (q/2)²; the velocity measurement comes from the
/// finite difference of consecutive fixes with variance propagated
/// accordingly. A single-fix window passes through unchanged.
pub fn kf_refine(window: &FixWindow) -> Result<LocationFix> {
    let entries = window.entries();
    let (last_fix, _) = entries.last().expect("validated non-empty");
    if entries.len() == 1 {
        return Ok(*last_fix);
    }

    let anchor = entries[0].0.point;
    let locals: Vec<LocalPoint> = entries
        .iter()
        .map(|(f, _)| geo::project_local(anchor, f.point))
        .collect();
    let var_pos: Vec<f64> = entries.iter().map(|(_, q)| (q / 2.0).powi(2)).collect();

    let mut x = KfState::new(locals[0].x);
    let mut y = KfState::new(locals[0].y);
    for i in 1..entries.len() {
        let dt = entries[i].0.t - entries[i - 1].0.t;
        let var_vel = (var_pos[i] + var_pos[i - 1]) / (dt * dt);
        x.predict(dt);
        x.update(locals[i].x, (locals[i].x - locals[i - 1].x) / dt, var_pos[i], var_vel);
        y.predict(dt);
        y.update(locals[i].y, (locals[i].y - locals[i - 1].y) / dt, var_pos[i], var_vel);
    }

    let point = geo::unproject_local(LocalPoint { x: x.pos, y: y.pos, anchor })?;
    Ok(LocationFix {
        t: last_fix.t,
        floor: window.floor(),
        point,
        area: last_fix.area,
    })
}

/// Rolling refinement over a fix stream: keeps the trailing `window_secs` of
/// fixes, restarts on floor changes, and emits a refined fix per input.
#[derive(Debug, Clone)]
pub struct TrackingSession {
    window_secs: f64,
    entries: Vec<(LocationFix, f64)>,
}

impl TrackingSession {
    pub fn new(window_secs: f64) -> Result<Self> {
        if !(window_secs.is_finite() && window_secs > 0.0) {
            return Err(Error::FixWindowInvalid(format!(
                "window length {window_secs} must be positive"
            )));
        }
        Ok(Self { window_secs, entries: Vec::new() })
    }

    pub fn push(&mut self, fix: LocationFix, quality: f64) -> Result<LocationFix> {
        if let Some((last, _)) = self.entries.last() {
            if fix.t <= last.t {
                return Err(Error::FixWindowInvalid(format!(
                    "fix at {} arrived after {}",
                    fix.t, last.t
                )));
            }
            if fix.floor != last.floor {
                self.entries.clear();
            }
        }
        self.entries.push((fix, quality));
        let cutoff = fix.t - self.window_secs;
        self.entries.retain(|(f, _)| f.t >= cutoff);
        kf_refine(&FixWindow::new(self.entries.clone())?)
    }
}
