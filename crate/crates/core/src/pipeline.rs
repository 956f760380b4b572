//! The end-to-end localization engine: scans in, floor + 2D fixes out.
//!
//! Two rolling profile windows feed the stages — a long one for floor
//! detection (absence evidence needs time to accumulate) and a short one for
//! 2D estimation (stale strong readings drag the position) — followed by
//! optional floor-attenuation compensation, the grid PDF, and Kalman
//! smoothing over a trailing fix window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floor::{detect_floor, DEFAULT_RANGE_WIDTH, FEATURES_PER_FLOOR};
use crate::loc2d::{
    apply_faf, compute_pdf, estimate_location, LocationFix, RankGaussianModel,
    DEFAULT_FLOOR_ATTENUATION_DB, DEFAULT_GRID_RESOLUTION_M, DEFAULT_PEAK_THRESHOLD,
};
use crate::nn::Mlp;
use crate::refine::{QualityFeatures, QualityModel, TrackingSession, DEFAULT_WINDOW_SECS};
use crate::scan::{build_profile, merge_virtual, ApRegistry, MaskLastHexDigit, WifiScan};

pub const DEFAULT_FLOOR_WINDOW_SECS: f64 = 120.0;
pub const DEFAULT_LOC_WINDOW_SECS: f64 = 15.0;

/// All run-time knobs of the localization pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateConfig {
    /// Profile window feeding floor detection, seconds.
    pub floor_window_secs: f64,
    /// Profile window feeding 2D estimation, seconds.
    pub loc_window_secs: f64,
    /// Per-floor attenuation compensation, dB.
    pub faf_db: f64,
    /// Normalized-PDF threshold defining the centroid region.
    pub peak_threshold: f64,
    /// Trailing fix window for the Kalman stage, seconds.
    pub track_window_secs: f64,
    pub grid_resolution_m: f64,
    /// Floor search-range width.
    pub range_width: u32,
    pub use_faf: bool,
    pub use_kf: bool,
    /// Emit floor estimates only, skipping 2D work entirely.
    pub floors_only: bool,
}

impl Default for LocateConfig {
    fn default() -> Self {
        Self {
            floor_window_secs: DEFAULT_FLOOR_WINDOW_SECS,
            loc_window_secs: DEFAULT_LOC_WINDOW_SECS,
            faf_db: DEFAULT_FLOOR_ATTENUATION_DB,
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
            track_window_secs: DEFAULT_WINDOW_SECS,
            grid_resolution_m: DEFAULT_GRID_RESOLUTION_M,
            range_width: DEFAULT_RANGE_WIDTH,
            use_faf: true,
            use_kf: true,
            floors_only: false,
        }
    }
}

impl LocateConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.floor_window_secs > 0.0
            && self.loc_window_secs > 0.0
            && self.faf_db >= 0.0
            && self.peak_threshold > 0.0
            && self.peak_threshold <= 1.0
            && self.track_window_secs > 0.0
            && self.grid_resolution_m > 0.0
            && self.range_width > 0
            && [
                self.floor_window_secs,
                self.loc_window_secs,
                self.faf_db,
                self.peak_threshold,
                self.track_window_secs,
                self.grid_resolution_m,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Pipeline(format!("invalid locate config: {self:?}")))
        }
    }

    /// One-line echo of every knob, for logs and reproducibility records.
    pub fn echo(&self) -> String {
        format!(
            "nf={} nl={} wf={} lthr={} wk={} grid={} w={} faf={} kf={} floors_only={}",
            self.floor_window_secs,
            self.loc_window_secs,
            self.faf_db,
            self.peak_threshold,
            self.track_window_secs,
            self.grid_resolution_m,
            self.range_width,
            self.use_faf,
            self.use_kf,
            self.floors_only
        )
    }
}

/// One pipeline output: always a floor, optionally a 2D fix (raw and
/// KF-refined), its quality radius, and the features behind that radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineFix {
    pub t: f64,
    pub floor: u32,
    pub raw: Option<LocationFix>,
    pub refined: Option<LocationFix>,
    pub quality: Option<f64>,
    pub features: Option<QualityFeatures>,
}

impl EngineFix {
    /// The fix to report: refined when available, else raw.
    pub fn best(&self) -> Option<&LocationFix> {
        self.refined.as_ref().or(self.raw.as_ref())
    }
}

/// Streaming engine holding scan history and the tracking session.
pub struct LocationEngine<'a> {
    registry: &'a ApRegistry,
    floor_model: &'a Mlp,
    rank_model: &'a RankGaussianModel,
    quality_model: Option<&'a QualityModel>,
    config: LocateConfig,
    history: Vec<WifiScan>,
    session: TrackingSession,
}

impl<'a> LocationEngine<'a> {
    pub fn new(
        registry: &'a ApRegistry,
        floor_model: &'a Mlp,
        rank_model: &'a RankGaussianModel,
        quality_model: Option<&'a QualityModel>,
        config: LocateConfig,
    ) -> Result<Self> {
        config.validate()?;
        floor_model.validate()?;
        rank_model.validate()?;
        let want_in = FEATURES_PER_FLOOR * config.range_width as usize;
        if floor_model.input_dim() != want_in {
            return Err(Error::DimensionMismatch {
                expected: want_in,
                got: floor_model.input_dim(),
            });
        }
        if floor_model.output_dim() != config.range_width as usize {
            return Err(Error::DimensionMismatch {
                expected: config.range_width as usize,
                got: floor_model.output_dim(),
            });
        }
        let session = TrackingSession::new(config.track_window_secs)?;
        Ok(Self {
            registry,
            floor_model,
            rank_model,
            quality_model,
            config,
            history: Vec::new(),
            session,
        })
    }

    pub fn config(&self) -> &LocateConfig {
        &self.config
    }

    /// Ingest one scan and produce the fix for its timestamp.
    ///
    /// Returns `Ok(None)` when the scan (and its window) contains no
    /// registered AP at all — there is nothing to locate with.
    pub fn process_scan(&mut self, scan: &WifiScan) -> Result<Option<EngineFix>> {
        let t = scan.timestamp;
        if let Some(last) = self.history.last() {
            if t <= last.timestamp {
                return Err(Error::Pipeline(format!(
                    "scan at {t} does not advance past {}",
                    last.timestamp
                )));
            }
        }
        self.history.push(merge_virtual(scan, &MaskLastHexDigit));
        let horizon = t - self.config.floor_window_secs.max(self.config.loc_window_secs);
        self.history.retain(|s| s.timestamp >= horizon);

        let floor_profile = build_profile(&self.history, t, self.config.floor_window_secs);
        let estimate = match detect_floor(
            &floor_profile,
            self.registry,
            self.floor_model,
            self.config.range_width,
        ) {
            Ok(e) => e,
            Err(Error::NoVisibleAps) => return Ok(None),
            Err(e) => return Err(e),
        };
        let floor = estimate.floor;
        if self.config.floors_only {
            return Ok(Some(EngineFix {
                t,
                floor,
                raw: None,
                refined: None,
                quality: None,
                features: None,
            }));
        }

        let loc_profile = build_profile(&self.history, t, self.config.loc_window_secs)
            .filter_registered(self.registry);
        if loc_profile.is_empty() {
            return Ok(Some(EngineFix {
                t,
                floor,
                raw: None,
                refined: None,
                quality: None,
                features: None,
            }));
        }
        let working = if self.config.use_faf {
            apply_faf(&loc_profile, self.registry, floor, self.config.faf_db)?
        } else {
            loc_profile.clone()
        };
        let polygon = self.registry.polygon(floor).expect("detected floor exists");
        let pdf = compute_pdf(
            &working,
            self.registry,
            polygon,
            floor,
            self.rank_model,
            self.config.grid_resolution_m,
        )?;
        let raw = estimate_location(&pdf, self.config.peak_threshold, t)?;

        // Quality reads the un-compensated profile: it describes what the
        // device actually heard.
        let features = QualityFeatures::from_profile(&loc_profile, raw.area)?;
        let quality = match self.quality_model {
            Some(m) => m.predict(&features),
            // Without a fitted model, fall back to the radius of a circle
            // with the centroid region's area.
            None => (raw.area / std::f64::consts::PI).sqrt(),
        };
        let refined =
            if self.config.use_kf { self.session.push(raw, quality)? } else { raw };

        Ok(Some(EngineFix {
            t,
            floor,
            raw: Some(raw),
            refined: Some(refined),
            quality: Some(quality),
            features: Some(features),
        }))
    }
}

/// Run the whole pipeline over a trace, dropping scans that yielded nothing.
pub fn locate_trace(
    registry: &ApRegistry,
    floor_model: &Mlp,
    rank_model: &RankGaussianModel,
    quality_model: Option<&QualityModel>,
    config: &LocateConfig,
    scans: &[WifiScan],
) -> Result<Vec<EngineFix>> {
    let mut engine =
        LocationEngine::new(registry, floor_model, rank_model, quality_model, config.clone())?;
    let mut fixes = Vec::with_capacity(scans.len());
    for scan in scans {
        if let Some(fix) = engine.process_scan(scan)? {
            fixes.push(fix);
        }
    }
    Ok(fixes)
}
