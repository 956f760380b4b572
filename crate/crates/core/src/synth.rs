//! Calibration-free training-set synthesis for the floor classifier.
//!
//! Instead of walking the deployment building with a survey device, training
//! instances are manufactured from whatever source geometry is available
//! (possibly the deployment building itself): simulate a user somewhere in a
//! randomly chosen floor window of the source, shape the visible-AP counts to
//! those of a randomly selected deployment window, perturb the signal
//! strengths, and extract the same features the live detector uses. Class
//! balance is exact by construction.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::floor::{
    compute_search_range, extract_features, FloorFeatureVector, FloorSearchRange,
    DEFAULT_RANGE_WIDTH,
};
use crate::scan::{ApRegistry, WifiObservation, WifiProfile};
use crate::sim::{simulate_scan, GeneratedBuilding, PropagationParams};

const RETRY_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Per-observation perturbation standard deviation, dB.
    pub sigma: f64,
    /// Instances per in-range floor class.
    pub per_label: usize,
    /// Search-range width the classifier will be trained for.
    pub range_width: u32,
    /// When false, the ablation arm: instances are clean survey-style scans
    /// labeled through the *detection-time* window rule — no window
    /// randomization, no count shaping, no perturbation, and whatever class
    /// balance that rule naturally produces.
    pub augment: bool,
    /// Drop the weakest extras when shaping AP counts; false drops at random.
    pub subsample_strongest: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            per_label: 500,
            range_width: DEFAULT_RANGE_WIDTH,
            augment: true,
            subsample_strongest: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma.is_finite()
            && self.sigma >= 0.0
            && self.per_label > 0
            && self.range_width > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::SynthFailed(format!("invalid synthesis config: {self:?}")))
        }
    }
}

/// A labeled training corpus: feature vectors with in-range floor slots.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    range_width: u32,
    instances: Vec<(FloorFeatureVector, u32)>,
}

impl LabeledFeatureSet {
    pub fn new(range_width: u32, instances: Vec<(FloorFeatureVector, u32)>) -> Result<Self> {
        if range_width == 0 {
            return Err(Error::SynthFailed("range width must be at least 1".into()));
        }
        for (_, label) in &instances {
            if *label >= range_width {
                return Err(Error::SynthFailed(format!(
                    "label {label} out of range for width {range_width}"
                )));
            }
        }
        Ok(Self { range_width, instances })
    }

    pub fn range_width(&self) -> u32 {
        self.range_width
    }

    pub fn instances(&self) -> &[(FloorFeatureVector, u32)] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.range_width as usize];
        for (_, label) in &self.instances {
            counts[*label as usize] += 1;
        }
        counts
    }

    /// Classifier-ready `(input, label)` pairs in instance order.
    pub fn to_training_pairs(&self) -> Vec<(Vec<f64>, usize)> {
        self.instances
            .iter()
            .map(|(f, l)| (f.flatten_normalized(), *l as usize))
            .collect()
    }
}

/// Add N(0, σ²) to every rss, clamped to the representable [−100, 0] dBm.
pub fn perturb_observations(obs: &mut [WifiObservation], sigma: f64, rng: &mut impl Rng) {
    if sigma <= 0.0 {
        return;
    }
    let noise = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    for o in obs.iter_mut() {
        o.rss = (o.rss + noise.sample(rng)).clamp(-100.0, 0.0);
    }
}

/// Cap per-floor visible counts at `targets`, keeping the strongest (or a
/// random subset). Floors without a target, and unregistered MACs, pass
/// through untouched.
pub fn subsample_observations(
    obs: &mut Vec<WifiObservation>,
    registry: &ApRegistry,
    targets: &BTreeMap<u32, usize>,
    strongest_first: bool,
    rng: &mut impl Rng,
) {
    let mut by_floor: BTreeMap<u32, Vec<WifiObservation>> = BTreeMap::new();
    let mut keep = Vec::with_capacity(obs.len());
    for o in obs.drain(..) {
        match registry.ap(o.mac) {
            Some(ap) if targets.contains_key(&ap.floor) => {
                by_floor.entry(ap.floor).or_default().push(o)
            }
            _ => keep.push(o),
        }
    }
    for (floor, mut group) in by_floor {
        let target = targets[&floor];
        if group.len() > target {
            if strongest_first {
                group.sort_by(|a, b| {
                    b.rss.partial_cmp(&a.rss).expect("finite rss").then(a.mac.cmp(&b.mac))
                });
            } else {
                group.shuffle(rng);
            }
            group.truncate(target);
        }
        keep.extend(group);
    }
    keep.sort_by_key(|o| o.mac);
    *obs = keep;
}

/// Shaping targets: the deployment's installed counts over a window
/// starting at `d1`, mapped slot-by-slot onto the source window's floors.
/// Source floors beyond the deployment window get no target and pass
/// through unshaped.
fn cross_window_counts(
    source_range: &FloorSearchRange,
    deployment: &ApRegistry,
    d1: u32,
) -> BTreeMap<u32, usize> {
    source_range
        .floors()
        .iter()
        .enumerate()
        .filter_map(|(i, &src_floor)| {
            let dep_floor = d1 + i as u32;
            (dep_floor <= deployment.floor_count())
                .then(|| (src_floor, deployment.aps_on_floor(dep_floor).len()))
        })
        .collect()
}

/// Generate a balanced labeled corpus for `deployment` from scans of
/// `source`. The two may be the same building (self-emulation) or differ
/// (training data manufactured from whatever geometry is at hand, shaped to
/// the deployment's per-floor AP counts).
pub fn synthesize_training_set(
    source: &GeneratedBuilding,
    deployment: &ApRegistry,
    params: &PropagationParams,
    config: &SynthConfig,
) -> Result<LabeledFeatureSet> {
    config.validate()?;
    params.validate()?;
    let source_floors = source.registry.floor_count();
    let w = config.range_width;
    // Only slots that exist in both buildings can ever be labeled.
    let label_domain = w.min(source_floors).min(deployment.floor_count());
    let n_starts = source_floors.saturating_sub(w) + 1;
    let dep_starts = deployment.floor_count().saturating_sub(w) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut instances = Vec::with_capacity(config.per_label * label_domain as usize);
    if config.augment {
        for label in 0..label_domain {
            for _ in 0..config.per_label {
                instances.push(synth_instance(
                    source, deployment, params, config, n_starts, dep_starts, label, &mut rng,
                )?);
            }
        }
    } else {
        for _ in 0..config.per_label * label_domain as usize {
            instances.push(natural_instance(source, params, config, &mut rng)?);
        }
    }
    LabeledFeatureSet::new(w, instances)
}

#[allow(clippy::too_many_arguments)]
fn synth_instance(
    source: &GeneratedBuilding,
    deployment: &ApRegistry,
    params: &PropagationParams,
    config: &SynthConfig,
    n_starts: u32,
    dep_starts: u32,
    label: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(FloorFeatureVector, u32)> {
    let floor_count = source.registry.floor_count();
    let (w_m, d_m) = (source.spec.width_m, source.spec.depth_m);
    let mx = (0.5f64).min(w_m / 4.0);
    let my = (0.5f64).min(d_m / 4.0);
    for _ in 0..RETRY_LIMIT {
        let r1 = rng.gen_range(1..=n_starts);
        let floor = r1 + label;
        debug_assert!(floor <= floor_count);
        let x = rng.gen_range(mx..w_m - mx);
        let y = rng.gen_range(my..d_m - my);

        let scan = simulate_scan(source, floor, x, y, 0.0, params, rng)?;
        let mut obs = scan.observations().to_vec();
        let range = FloorSearchRange::new(r1, config.range_width, floor_count)?;
        // Shape visible counts to a randomly selected deployment window.
        let d1 = rng.gen_range(1..=dep_starts);
        subsample_observations(
            &mut obs,
            &source.registry,
            &cross_window_counts(&range, deployment, d1),
            config.subsample_strongest,
            rng,
        );
        perturb_observations(&mut obs, config.sigma, rng);
        let map: BTreeMap<_, _> = obs.into_iter().map(|o| (o.mac, o.rss)).collect();
        let profile = WifiProfile::from_observations(0.0, 0.0, map);
        match extract_features(&profile, &source.registry, &range) {
            Ok(features) => return Ok((features, label)),
            Err(Error::NoVisibleAps) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SynthFailed(format!(
        "no visible APs in any sampled window after {RETRY_LIMIT} attempts"
    )))
}

/// One survey-style instance: a clean scan at a random position, labeled by
/// running the detection-time window selection on it. The class distribution
/// is whatever that rule yields — typically skewed toward a few slots.
fn natural_instance(
    b: &GeneratedBuilding,
    params: &PropagationParams,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(FloorFeatureVector, u32)> {
    let floor_count = b.registry.floor_count();
    let (w_m, d_m) = (b.spec.width_m, b.spec.depth_m);
    let mx = (0.5f64).min(w_m / 4.0);
    let my = (0.5f64).min(d_m / 4.0);
    for _ in 0..RETRY_LIMIT {
        let floor = rng.gen_range(1..=floor_count);
        let x = rng.gen_range(mx..w_m - mx);
        let y = rng.gen_range(my..d_m - my);
        let scan = simulate_scan(b, floor, x, y, 0.0, params, rng)?;
        let map: BTreeMap<_, _> = scan.observations().iter().map(|o| (o.mac, o.rss)).collect();
        let profile = WifiProfile::from_observations(0.0, 0.0, map);
        let range = match compute_search_range(&profile, &b.registry, config.range_width) {
            Ok(range) => range,
            Err(Error::NoVisibleAps) => continue,
            Err(e) => return Err(e),
        };
        // A window that misses the true floor cannot be labeled; a real
        // survey would discard the sample the same way.
        if !range.contains(floor) {
            continue;
        }
        match extract_features(&profile, &b.registry, &range) {
            Ok(features) => return Ok((features, floor - range.r1())),
            Err(Error::NoVisibleAps) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SynthFailed(format!(
        "no usable survey instance after {RETRY_LIMIT} attempts"
    )))
}
