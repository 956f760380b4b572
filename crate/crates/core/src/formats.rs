//! On-disk artifact formats: JSON documents for registries, models, and
//! datasets; JSON-lines for scan traces, calibration samples, and fixes.
//! Everything is human-diffable and versioned; readers reject artifacts from
//! an incompatible schema or normalization contract.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floor::{FeatureName, NormalizationContract, FEATURES_PER_FLOOR};
use crate::geo::{FloorPolygon, GeoPoint};
use crate::loc2d::{LocationFix, RankGaussianModel};
use crate::nn::Mlp;
use crate::refine::QualityModel;
use crate::scan::{AccessPoint, ApRegistry, Mac, WifiObservation, WifiScan};
use crate::sim::{GroundTruth, SimTrace};
use crate::synth::LabeledFeatureSet;

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(found: u32, what: &str) -> Result<()> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "{what}: schema version {found}, this build reads {SCHEMA_VERSION}"
        )))
    }
}

fn feature_order() -> Vec<String> {
    FeatureName::ALL.iter().map(|f| f.label().to_string()).collect()
}

/// Annotate open/create failures with the offending path; the bare OS
/// error is useless in a multi-file pipeline.
pub(crate) fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_at(path, e))
}

fn create_file(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| io_at(path, e))
}

// ---------------------------------------------------------------- registry

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryFile {
    pub version: u32,
    pub building_id: String,
    /// Ground floor first; each ring is [lat, lon] vertices without a
    /// repeated closing vertex.
    pub floors: Vec<FloorRecord>,
    pub aps: Vec<ApRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorRecord {
    pub ring: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRecord {
    pub mac: Mac,
    pub floor: u32,
    pub lat: f64,
    pub lon: f64,
}

pub fn registry_to_file(registry: &ApRegistry) -> RegistryFile {
    RegistryFile {
        version: SCHEMA_VERSION,
        building_id: registry.building_id().to_string(),
        floors: (1..=registry.floor_count())
            .map(|f| {
                let poly = registry.polygon(f).expect("floor in range");
                FloorRecord {
                    ring: poly.ring().iter().map(|p| (p.lat(), p.lon())).collect(),
                }
            })
            .collect(),
        aps: registry
            .iter()
            .map(|ap| ApRecord {
                mac: ap.mac,
                floor: ap.floor,
                lat: ap.location.lat(),
                lon: ap.location.lon(),
            })
            .collect(),
    }
}

pub fn registry_from_file(file: RegistryFile) -> Result<ApRegistry> {
    check_version(file.version, "registry")?;
    let polygons = file
        .floors
        .into_iter()
        .map(|f| {
            let ring = f
                .ring
                .into_iter()
                .map(|(lat, lon)| GeoPoint::new(lat, lon))
                .collect::<Result<Vec<_>>>()?;
            FloorPolygon::new(ring)
        })
        .collect::<Result<Vec<_>>>()?;
    let aps = file
        .aps
        .into_iter()
        .map(|r| {
            Ok(AccessPoint {
                mac: r.mac,
                floor: r.floor,
                location: GeoPoint::new(r.lat, r.lon)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ApRegistry::new(file.building_id, polygons, aps)
}

pub fn write_registry(path: &Path, registry: &ApRegistry) -> Result<()> {
    write_json(path, &registry_to_file(registry))
}

pub fn read_registry(path: &Path) -> Result<ApRegistry> {
    registry_from_file(read_json(path)?)
}

// ------------------------------------------------------------------ traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub observations: Vec<ObsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsRecord {
    pub mac: Mac,
    pub rss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub floor: u32,
    pub lat: f64,
    pub lon: f64,
}

/// A parsed trace: scans plus per-scan optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub scans: Vec<WifiScan>,
    pub truth: Vec<Option<GroundTruth>>,
}

impl From<SimTrace> for TraceData {
    fn from(t: SimTrace) -> Self {
        TraceData { scans: t.scans, truth: t.truth.into_iter().map(Some).collect() }
    }
}

pub fn write_trace(path: &Path, data: &TraceData) -> Result<()> {
    if data.scans.len() != data.truth.len() {
        return Err(Error::Pipeline(format!(
            "{} scans but {} truth slots",
            data.scans.len(),
            data.truth.len()
        )));
    }
    let mut out = BufWriter::new(create_file(path)?);
    for (scan, truth) in data.scans.iter().zip(&data.truth) {
        let rec = TraceRecord {
            t: scan.timestamp,
            observations: scan
                .observations()
                .iter()
                .map(|o| ObsRecord { mac: o.mac, rss: o.rss })
                .collect(),
            truth: truth.map(|gt| TruthRecord {
                floor: gt.floor,
                lat: gt.point.lat(),
                lon: gt.point.lon(),
            }),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceData> {
    let reader = BufReader::new(open_file(path)?);
    let mut scans = Vec::new();
    let mut truth = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("trace line {}: {e}", i + 1)))?;
        if rec.t <= last_t {
            return Err(Error::Schema(format!(
                "trace line {}: timestamp {} does not advance past {}",
                i + 1,
                rec.t,
                last_t
            )));
        }
        last_t = rec.t;
        let obs = rec
            .observations
            .iter()
            .map(|o| WifiObservation { mac: o.mac, rss: o.rss })
            .collect();
        scans.push(WifiScan::new(rec.t, obs)?);
        truth.push(match rec.truth {
            Some(tr) => Some(GroundTruth {
                t: rec.t,
                floor: tr.floor,
                point: GeoPoint::new(tr.lat, tr.lon)?,
            }),
            None => None,
        });
    }
    Ok(TraceData { scans, truth })
}

// ----------------------------------------------------------------- dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: u32,
    pub range_width: u32,
    pub features_per_floor: usize,
    pub feature_order: Vec<String>,
    pub normalization: NormalizationContract,
    pub instances: Vec<DatasetInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInstance {
    pub label: u32,
    /// Normalized classifier inputs, floor-major.
    pub inputs: Vec<f64>,
}

impl DatasetFile {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version, "dataset")?;
        if self.normalization != NormalizationContract::current() {
            return Err(Error::Schema(
                "dataset built under a different normalization contract".into(),
            ));
        }
        let dim = self.features_per_floor * self.range_width as usize;
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.label >= self.range_width {
                return Err(Error::Schema(format!(
                    "dataset instance {i}: label {} out of range {}",
                    inst.label, self.range_width
                )));
            }
            if inst.inputs.len() != dim || inst.inputs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!(
                    "dataset instance {i}: expected {dim} finite inputs"
                )));
            }
        }
        Ok(())
    }

    pub fn training_pairs(&self) -> Vec<(Vec<f64>, usize)> {
        self.instances
            .iter()
            .map(|i| (i.inputs.clone(), i.label as usize))
            .collect()
    }
}

pub fn dataset_from_set(set: &LabeledFeatureSet) -> DatasetFile {
    DatasetFile {
        version: SCHEMA_VERSION,
        range_width: set.range_width(),
        features_per_floor: FEATURES_PER_FLOOR,
        feature_order: feature_order(),
        normalization: NormalizationContract::current(),
        instances: set
            .instances()
            .iter()
            .map(|(f, label)| DatasetInstance { label: *label, inputs: f.flatten_normalized() })
            .collect(),
    }
}

pub fn write_dataset(path: &Path, dataset: &DatasetFile) -> Result<()> {
    write_json(path, dataset)
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let d: DatasetFile = read_json(path)?;
    d.validate()?;
    Ok(d)
}

// ------------------------------------------------------------ model files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorModelFile {
    pub version: u32,
    pub range_width: u32,
    pub features_per_floor: usize,
    pub feature_order: Vec<String>,
    pub normalization: NormalizationContract,
    pub model: Mlp,
}

impl FloorModelFile {
    pub fn new(range_width: u32, model: Mlp) -> Self {
        Self {
            version: SCHEMA_VERSION,
            range_width,
            features_per_floor: FEATURES_PER_FLOOR,
            feature_order: feature_order(),
            normalization: NormalizationContract::current(),
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version, "floor model")?;
        if self.normalization != NormalizationContract::current() {
            return Err(Error::Schema(
                "floor model built under a different normalization contract".into(),
            ));
        }
        self.model.validate()?;
        let want_in = self.features_per_floor * self.range_width as usize;
        if self.model.input_dim() != want_in {
            return Err(Error::Schema(format!(
                "floor model expects {} inputs but width {} implies {}",
                self.model.input_dim(),
                self.range_width,
                want_in
            )));
        }
        if self.model.output_dim() != self.range_width as usize {
            return Err(Error::Schema(format!(
                "floor model emits {} classes for width {}",
                self.model.output_dim(),
                self.range_width
            )));
        }
        Ok(())
    }
}

pub fn write_floor_model(path: &Path, file: &FloorModelFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_floor_model(path: &Path) -> Result<FloorModelFile> {
    let f: FloorModelFile = read_json(path)?;
    f.validate()?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModelFile {
    pub version: u32,
    pub model: RankGaussianModel,
}

pub fn write_rank_model(path: &Path, model: &RankGaussianModel) -> Result<()> {
    write_json(path, &RankModelFile { version: SCHEMA_VERSION, model: model.clone() })
}

pub fn read_rank_model(path: &Path) -> Result<RankGaussianModel> {
    let f: RankModelFile = read_json(path)?;
    check_version(f.version, "rank model")?;
    f.model.validate()?;
    Ok(f.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModelFile {
    pub version: u32,
    pub feature_order: Vec<String>,
    pub model: QualityModel,
}

pub fn write_quality_model(path: &Path, model: &QualityModel) -> Result<()> {
    write_json(
        path,
        &QualityModelFile {
            version: SCHEMA_VERSION,
            feature_order: ["ap_count", "mean_rss", "max_rss", "area"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            model: model.clone(),
        },
    )
}

pub fn read_quality_model(path: &Path) -> Result<QualityModel> {
    let f: QualityModelFile = read_json(path)?;
    check_version(f.version, "quality model")?;
    let ok = f.model.intercept.is_finite() && f.model.weights.iter().all(|w| w.is_finite());
    if !ok {
        return Err(Error::Schema("quality model has non-finite parameters".into()));
    }
    Ok(f.model)
}

// ------------------------------------------------- rank calibration samples

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSampleRecord {
    pub distance_m: f64,
    pub rss: f64,
}

pub fn write_rank_samples(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for (d, rss) in samples {
        serde_json::to_writer(&mut out, &RankSampleRecord { distance_m: *d, rss: *rss })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rank_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let reader = BufReader::new(open_file(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RankSampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("rank sample line {}: {e}", i + 1)))?;
        if !(rec.distance_m.is_finite() && rec.distance_m > 0.0 && rec.rss.is_finite()) {
            return Err(Error::Schema(format!(
                "rank sample line {}: distance must be positive and finite",
                i + 1
            )));
        }
        out.push((rec.distance_m, rec.rss));
    }
    Ok(out)
}

// ------------------------------------------------------------------- fixes

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixRecord {
    pub t: f64,
    pub floor: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
}

impl FixRecord {
    pub fn located(fix: &LocationFix, quality: Option<f64>) -> Self {
        FixRecord {
            t: fix.t,
            floor: fix.floor,
            lat: Some(fix.point.lat()),
            lon: Some(fix.point.lon()),
            quality,
        }
    }

    pub fn floor_only(t: f64, floor: u32) -> Self {
        FixRecord { t, floor, lat: None, lon: None, quality: None }
    }

    pub fn point(&self) -> Option<GeoPoint> {
        match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
            _ => None,
        }
    }
}

pub fn write_fixes(path: &Path, fixes: &[FixRecord]) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for f in fixes {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fixes(path: &Path) -> Result<Vec<FixRecord>> {
    let reader = BufReader::new(open_file(path)?);
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FixRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("fix line {}: {e}", i + 1)))?;
        if rec.t <= last_t {
            return Err(Error::Schema(format!(
                "fix line {}: timestamp {} does not advance past {}",
                i + 1,
                rec.t,
                last_t
            )));
        }
        last_t = rec.t;
        out.push(rec);
    }
    Ok(out)
}

// ----------------------------------------------------------------- helpers

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let reader = BufReader::new(open_file(path)?);
    serde_json::from_reader(reader)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
