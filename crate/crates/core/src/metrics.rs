//! Evaluation: join fixes against ground truth and report floor accuracy,
//! 2D error quantiles, and the full error CDF.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FixRecord, SCHEMA_VERSION};
use crate::geo::{haversine_distance, GeoPoint};
use crate::sim::GroundTruth;

/// Fix/truth timestamps may go through JSON; allow a hair of slack when
/// joining.
const JOIN_TOLERANCE_SECS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_m: f64,
    /// Fraction of located fixes with error ≤ `error_m`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    /// Total fixes evaluated.
    pub fixes: usize,
    /// Fixes that found a matching truth record.
    pub matched: usize,
    /// Matched fixes that also carried a 2D position.
    pub located: usize,
    pub exact_floor_pct: f64,
    /// |detected − true| floor distance → count.
    pub floor_confusion: BTreeMap<u32, usize>,
    pub error_p50_m: Option<f64>,
    pub error_p75_m: Option<f64>,
    pub error_p90_m: Option<f64>,
    pub cdf: Vec<CdfPoint>,
    /// Echo of the run configuration that produced the fixes.
    pub config: BTreeMap<String, String>,
}

/// Nearest-rank quantile of an ascending-sorted sample.
fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Geodesic error per (fix, truth) pair, fanned out across worker threads.
/// Each thread owns a disjoint output chunk, so results keep input order and
/// the computation stays deterministic.
fn pairwise_errors(pairs: &[(GeoPoint, GeoPoint)]) -> Vec<f64> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = pairs.len().div_ceil(workers).max(1);
    let mut out = vec![0.0f64; pairs.len()];
    std::thread::scope(|s| {
        for (src, dst) in pairs.chunks(chunk).zip(out.chunks_mut(chunk)) {
            s.spawn(move || {
                for (pair, slot) in src.iter().zip(dst.iter_mut()) {
                    *slot = haversine_distance(pair.0, pair.1);
                }
            });
        }
    });
    out
}

pub fn compute_metrics(
    fixes: &[FixRecord],
    truth: &[GroundTruth],
    config: BTreeMap<String, String>,
) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Pipeline("no ground truth to evaluate against".into()));
    }
    let mut by_time: Vec<&GroundTruth> = truth.iter().collect();
    by_time.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite timestamps"));

    let mut matched = 0usize;
    let mut exact = 0usize;
    let mut confusion: BTreeMap<u32, usize> = BTreeMap::new();
    let mut located_pairs: Vec<(GeoPoint, GeoPoint)> = Vec::new();
    let mut cursor = 0usize;
    for fix in fixes {
        while cursor < by_time.len() && by_time[cursor].t < fix.t - JOIN_TOLERANCE_SECS {
            cursor += 1;
        }
        let Some(gt) = by_time.get(cursor) else { continue };
        if (gt.t - fix.t).abs() > JOIN_TOLERANCE_SECS {
            continue;
        }
        matched += 1;
        let delta = fix.floor.abs_diff(gt.floor);
        *confusion.entry(delta).or_insert(0) += 1;
        if delta == 0 {
            exact += 1;
        }
        if let Some(p) = fix.point() {
            located_pairs.push((p, gt.point));
        }
    }
    if matched == 0 {
        return Err(Error::Pipeline("no fix matched a truth timestamp".into()));
    }

    let mut errors = pairwise_errors(&located_pairs);
    errors.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let n = errors.len();
    let cdf = errors
        .iter()
        .enumerate()
        .map(|(i, e)| CdfPoint { error_m: *e, fraction: (i + 1) as f64 / n as f64 })
        .collect();

    Ok(MetricsReport {
        version: SCHEMA_VERSION,
        fixes: fixes.len(),
        matched,
        located: n,
        exact_floor_pct: 100.0 * exact as f64 / matched as f64,
        floor_confusion: confusion,
        error_p50_m: quantile_sorted(&errors, 0.50),
        error_p75_m: quantile_sorted(&errors, 0.75),
        error_p90_m: quantile_sorted(&errors, 0.90),
        cdf,
        config,
    })
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    crate::formats::write_json(path, report)
}

pub fn write_cdf_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| crate::formats::io_at(path, e))?,
    );
    writeln!(out, "error_m,fraction")?;
    for p in &report.cdf {
        writeln!(out, "{},{}", p.error_m, p.fraction)?;
    }
    out.flush()?;
    Ok(())
}
