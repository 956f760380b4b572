//! Access-point registry, scan ingestion, virtual-AP canonicalization, and
//! windowed WiFi profile construction.
//!
//! A *profile* is the union of all APs seen within a sliding window, each
//! carrying its strongest RSS from that window. Multiplexed (virtual) MACs
//! are first folded onto their physical AP, whose RSS is the mean of the
//! virtual observations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{FloorPolygon, GeoPoint};

/// A 48-bit MAC address. Canonical text form is lowercase, colon-separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mac(u64);

impl Mac {
    pub fn from_u64(raw: u64) -> Result<Self> {
        if raw > 0xFFFF_FFFF_FFFF {
            return Err(Error::MacParse {
                input: format!("{raw:#x}"),
                reason: "more than 48 bits".into(),
            });
        }
        Ok(Self(raw))
    }

    pub fn as_u64(&self) -> u64 {
        self.0
    }

    /// True when the last hexadecimal digit is zero, the convention used
    /// here for physical (non-virtual) AP identities.
    pub fn is_physical(&self) -> bool {
        self.0 & 0xF == 0
    }
}

impl fmt::Display for Mac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

impl FromStr for Mac {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex: String = s.chars().filter(|c| *c != ':' && *c != '-').collect();
        if hex.len() != 12 {
            return Err(Error::MacParse {
                input: s.into(),
                reason: format!("expected 12 hex digits, got {}", hex.len()),
            });
        }
        let raw = u64::from_str_radix(&hex, 16).map_err(|e| Error::MacParse {
            input: s.into(),
            reason: e.to_string(),
        })?;
        Ok(Self(raw))
    }
}

impl Serialize for Mac {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mac {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Rule mapping a virtual AP identity to its physical AP MAC.
///
/// Vendors multiplex differently, so deployments can supply their own rule;
/// the default masks the last hex digit to zero.
pub trait VirtualApRule {
    fn physical_mac(&self, mac: Mac) -> Mac;
}

/// The default mapping: force the last hexadecimal digit to 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaskLastHexDigit;

impl VirtualApRule for MaskLastHexDigit {
    fn physical_mac(&self, mac: Mac) -> Mac {
        Mac(mac.0 & !0xF)
    }
}

/// Map a MAC to its physical AP identity under the default masking rule.
pub fn canonicalize_mac(mac: Mac) -> Mac {
    MaskLastHexDigit.physical_mac(mac)
}

/// A deployed access point: physical MAC, installation floor (1-based), and
/// 2D location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub mac: Mac,
    pub floor: u32,
    pub location: GeoPoint,
}

/// The building's AP installation registry plus its floor outlines.
///
/// Immutable after construction; APs are indexed both by MAC and by floor.
#[derive(Debug, Clone)]
pub struct ApRegistry {
    building_id: String,
    floor_polygons: Vec<FloorPolygon>,
    by_mac: HashMap<Mac, AccessPoint>,
    by_floor: Vec<Vec<Mac>>,
}

impl ApRegistry {
    /// Validates that floors are 1..=floor_count, MACs are unique physical
    /// identities, and every AP sits inside its floor's outline.
    pub fn new(
        building_id: impl Into<String>,
        floor_polygons: Vec<FloorPolygon>,
        aps: Vec<AccessPoint>,
    ) -> Result<Self> {
        let floor_count = floor_polygons.len() as u32;
        if floor_count == 0 {
            return Err(Error::RegistryInvalid("no floors".into()));
        }
        let mut by_mac = HashMap::new();
        let mut by_floor = vec![Vec::new(); floor_count as usize];
        for ap in aps {
            if ap.floor == 0 || ap.floor > floor_count {
                return Err(Error::RegistryInvalid(format!(
                    "AP {} on floor {} of a {}-floor building",
                    ap.mac, ap.floor, floor_count
                )));
            }
            if !ap.mac.is_physical() {
                return Err(Error::RegistryInvalid(format!(
                    "AP MAC {} is not a physical identity (last hex digit must be 0)",
                    ap.mac
                )));
            }
            if !floor_polygons[(ap.floor - 1) as usize].contains(ap.location) {
                return Err(Error::RegistryInvalid(format!(
                    "AP {} lies outside its floor {} outline",
                    ap.mac, ap.floor
                )));
            }
            if by_mac.insert(ap.mac, ap).is_some() {
                return Err(Error::RegistryInvalid(format!("duplicate AP MAC {}", ap.mac)));
            }
            by_floor[(ap.floor - 1) as usize].push(ap.mac);
        }
        for floor in &mut by_floor {
            floor.sort();
        }
        Ok(Self {
            building_id: building_id.into(),
            floor_polygons,
            by_mac,
            by_floor,
        })
    }

    pub fn building_id(&self) -> &str {
        &self.building_id
    }

    pub fn floor_count(&self) -> u32 {
        self.floor_polygons.len() as u32
    }

    pub fn polygon(&self, floor: u32) -> Option<&FloorPolygon> {
        self.floor_polygons.get(floor.checked_sub(1)? as usize)
    }

    pub fn ap(&self, mac: Mac) -> Option<&AccessPoint> {
        self.by_mac.get(&mac)
    }

    pub fn contains(&self, mac: Mac) -> bool {
        self.by_mac.contains_key(&mac)
    }

    /// MACs installed on `floor`, in sorted order. Empty for out-of-range floors.
    pub fn aps_on_floor(&self, floor: u32) -> &[Mac] {
        match floor.checked_sub(1).map(|f| self.by_floor.get(f as usize)) {
            Some(Some(macs)) => macs,
            _ => &[],
        }
    }

    pub fn ap_count(&self) -> usize {
        self.by_mac.len()
    }

    /// All APs in MAC order.
    pub fn iter(&self) -> impl Iterator<Item = &AccessPoint> {
        self.by_floor
            .iter()
            .flatten()
            .map(move |mac| &self.by_mac[mac])
    }
}

/// One (MAC, RSS) pair inside a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiObservation {
    pub mac: Mac,
    /// Received signal strength in dBm; more negative is weaker.
    pub rss: f64,
}

/// A timestamped WiFi scan: the list of visible APs at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WifiScan {
    pub timestamp: f64,
    observations: Vec<WifiObservation>,
}

impl WifiScan {
    pub fn new(timestamp: f64, observations: Vec<WifiObservation>) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(Error::ScanInvalid(format!("non-finite timestamp {timestamp}")));
        }
        let mut seen = std::collections::HashSet::new();
        for obs in &observations {
            if !obs.rss.is_finite() {
                return Err(Error::ScanInvalid(format!(
                    "non-finite RSS for {}",
                    obs.mac
                )));
            }
            if !seen.insert(obs.mac) {
                return Err(Error::ScanInvalid(format!("duplicate MAC {}", obs.mac)));
            }
        }
        Ok(Self {
            timestamp,
            observations,
        })
    }

    pub fn observations(&self) -> &[WifiObservation] {
        &self.observations
    }
}

/// Fold virtual AP identities onto their physical APs.
///
/// Each physical MAC's RSS becomes the arithmetic mean of its virtual
/// observations' RSS. The result has one observation per physical MAC.
pub fn merge_virtual(scan: &WifiScan, rule: &impl VirtualApRule) -> WifiScan {
    let mut grouped: BTreeMap<Mac, (f64, usize)> = BTreeMap::new();
    for obs in &scan.observations {
        let entry = grouped.entry(rule.physical_mac(obs.mac)).or_insert((0.0, 0));
        entry.0 += obs.rss;
        entry.1 += 1;
    }
    let observations = grouped
        .into_iter()
        .map(|(mac, (sum, n))| WifiObservation {
            mac,
            rss: sum / n as f64,
        })
        .collect();
    WifiScan {
        timestamp: scan.timestamp,
        observations,
    }
}

/// Union-of-scans WiFi profile over a window ending at `end_time`.
///
/// Each MAC carries the strongest RSS it showed in any contributing scan.
#[derive(Debug, Clone, PartialEq)]
pub struct WifiProfile {
    pub end_time: f64,
    pub window_secs: f64,
    observations: BTreeMap<Mac, f64>,
}

impl WifiProfile {
    pub fn observations(&self) -> &BTreeMap<Mac, f64> {
        &self.observations
    }

    pub fn rss(&self, mac: Mac) -> Option<f64> {
        self.observations.get(&mac).copied()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Keep only MACs present in the registry.
    pub fn filter_registered(&self, registry: &ApRegistry) -> WifiProfile {
        WifiProfile {
            end_time: self.end_time,
            window_secs: self.window_secs,
            observations: self
                .observations
                .iter()
                .filter(|(mac, _)| registry.contains(**mac))
                .map(|(m, r)| (*m, *r))
                .collect(),
        }
    }

    /// Build a profile directly from a MAC -> RSS map (used by synthesis and
    /// tests).
    pub fn from_observations(end_time: f64, window_secs: f64, obs: BTreeMap<Mac, f64>) -> Self {
        Self {
            end_time,
            window_secs,
            observations: obs,
        }
    }
}

/// Build the profile for time `t` over the last `window_secs` seconds.
///
/// A scan contributes when its timestamp lies in `[max(0, t - N), t]`, both
/// endpoints inclusive. Scans are expected to be canonicalized and
/// virtual-merged already. An empty window yields an empty profile.
pub fn build_profile(scans: &[WifiScan], t: f64, window_secs: f64) -> WifiProfile {
    let start = (t - window_secs).max(0.0);
    let mut observations: BTreeMap<Mac, f64> = BTreeMap::new();
    for scan in scans {
        if scan.timestamp < start || scan.timestamp > t {
            continue;
        }
        for obs in &scan.observations {
            observations
                .entry(obs.mac)
                .and_modify(|r| *r = r.max(obs.rss))
                .or_insert(obs.rss);
        }
    }
    WifiProfile {
        end_time: t,
        window_secs,
        observations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mac(s: &str) -> Mac {
        s.parse().unwrap()
    }

    #[test]
    fn mac_parse_and_display_round_trip() {
        let m = mac("AA:BB:CC:DD:EE:F7");
        assert_eq!(m.to_string(), "aa:bb:cc:dd:ee:f7");
        assert_eq!(mac("aabbccddeef7"), m);
        assert!("aa:bb:cc:dd:ee".parse::<Mac>().is_err());
        assert!("aa:bb:cc:dd:ee:fg".parse::<Mac>().is_err());
    }

    #[test]
    fn canonicalize_masks_last_digit() {
        assert_eq!(
            canonicalize_mac(mac("aa:bb:cc:dd:ee:f3")).to_string(),
            "aa:bb:cc:dd:ee:f0"
        );
        assert_eq!(
            canonicalize_mac(mac("aa:bb:cc:dd:ee:f0")).to_string(),
            "aa:bb:cc:dd:ee:f0"
        );
        assert_eq!(
            canonicalize_mac(mac("AA:BB:CC:DD:EE:F7")).to_string(),
            "aa:bb:cc:dd:ee:f0"
        );
    }

    #[test]
    fn merge_virtual_averages_rss() {
        let scan = WifiScan::new(
            0.0,
            vec![
                WifiObservation { mac: mac("aa:bb:cc:dd:ee:f1"), rss: -60.0 },
                WifiObservation { mac: mac("aa:bb:cc:dd:ee:f2"), rss: -70.0 },
            ],
        )
        .unwrap();
        let merged = merge_virtual(&scan, &MaskLastHexDigit);
        assert_eq!(merged.observations().len(), 1);
        assert_eq!(merged.observations()[0].mac, mac("aa:bb:cc:dd:ee:f0"));
        assert_eq!(merged.observations()[0].rss, -65.0);
    }

    #[test]
    fn merge_virtual_singleton_unchanged() {
        let scan = WifiScan::new(
            0.0,
            vec![WifiObservation { mac: mac("aa:bb:cc:dd:ee:f0"), rss: -55.0 }],
        )
        .unwrap();
        let merged = merge_virtual(&scan, &MaskLastHexDigit);
        assert_eq!(merged.observations(), scan.observations());
    }

    #[test]
    fn merge_virtual_mixed() {
        let scan = WifiScan::new(
            0.0,
            vec![
                WifiObservation { mac: mac("aa:bb:cc:dd:ee:f1"), rss: -60.0 },
                WifiObservation { mac: mac("aa:bb:cc:dd:ee:f2"), rss: -60.0 },
                WifiObservation { mac: mac("11:22:33:44:55:60"), rss: -80.0 },
            ],
        )
        .unwrap();
        let merged = merge_virtual(&scan, &MaskLastHexDigit);
        assert_eq!(merged.observations().len(), 2);
        assert_eq!(merged.observations()[0].rss, -80.0); // 11:... sorts first
        assert_eq!(merged.observations()[1].rss, -60.0);
    }

    #[test]
    fn profile_takes_max_over_window() {
        let a = mac("aa:bb:cc:dd:ee:00");
        let b = mac("aa:bb:cc:dd:ee:10");
        let scans = vec![
            WifiScan::new(1.0, vec![WifiObservation { mac: a, rss: -70.0 }]).unwrap(),
            WifiScan::new(
                5.0,
                vec![
                    WifiObservation { mac: a, rss: -60.0 },
                    WifiObservation { mac: b, rss: -80.0 },
                ],
            )
            .unwrap(),
        ];
        let p = build_profile(&scans, 5.0, 10.0);
        assert_eq!(p.rss(a), Some(-60.0));
        assert_eq!(p.rss(b), Some(-80.0));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn profile_single_scan_window() {
        let a = mac("aa:bb:cc:dd:ee:00");
        let scans =
            vec![WifiScan::new(3.0, vec![WifiObservation { mac: a, rss: -42.0 }]).unwrap()];
        let p = build_profile(&scans, 3.0, 1.0);
        assert_eq!(p.rss(a), Some(-42.0));
    }

    #[test]
    fn profile_empty_window_is_empty() {
        let a = mac("aa:bb:cc:dd:ee:00");
        let scans =
            vec![WifiScan::new(0.0, vec![WifiObservation { mac: a, rss: -42.0 }]).unwrap()];
        let p = build_profile(&scans, 100.0, 5.0);
        assert!(p.is_empty());
    }

    /// Brute-force oracle: enumerate every (scan, observation) pair.
    fn profile_oracle(scans: &[WifiScan], t: f64, n: f64) -> BTreeMap<Mac, f64> {
        let start = (t - n).max(0.0);
        let mut out: BTreeMap<Mac, f64> = BTreeMap::new();
        for scan in scans {
            for obs in scan.observations() {
                if scan.timestamp >= start && scan.timestamp <= t {
                    let e = out.entry(obs.mac).or_insert(f64::NEG_INFINITY);
                    if obs.rss > *e {
                        *e = obs.rss;
                    }
                }
            }
        }
        out
    }

    fn arb_scans() -> impl Strategy<Value = Vec<WifiScan>> {
        proptest::collection::vec(
            (
                0.0f64..200.0,
                proptest::collection::vec((0u64..12, -95.0f64..-30.0), 0..8),
            ),
            0..12,
        )
        .prop_map(|raw| {
            raw.into_iter()
                .map(|(t, obs)| {
                    let mut seen = std::collections::HashSet::new();
                    let obs = obs
                        .into_iter()
                        .filter(|(id, _)| seen.insert(*id))
                        .map(|(id, rss)| WifiObservation {
                            mac: Mac::from_u64(id * 16).unwrap(),
                            rss,
                        })
                        .collect();
                    WifiScan::new(t, obs).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn profile_matches_bruteforce_oracle(
            scans in arb_scans(),
            t in 0.0f64..220.0,
            n in 0.0f64..100.0,
        ) {
            let p = build_profile(&scans, t, n);
            prop_assert_eq!(p.observations().clone(), profile_oracle(&scans, t, n));
        }

        #[test]
        fn profile_monotone_in_window_length(
            scans in arb_scans(),
            t in 0.0f64..220.0,
            n1 in 0.0f64..100.0,
            extra in 0.0f64..100.0,
        ) {
            let short = build_profile(&scans, t, n1);
            let long = build_profile(&scans, t, n1 + extra);
            for (mac, rss) in short.observations() {
                let wider = long.rss(*mac);
                prop_assert!(wider.is_some(), "MAC lost when widening window");
                prop_assert!(wider.unwrap() >= *rss);
            }
        }

        #[test]
        fn merge_is_idempotent_on_canonical_scans(scans in arb_scans()) {
            for scan in &scans {
                let once = merge_virtual(scan, &MaskLastHexDigit);
                let twice = merge_virtual(&once, &MaskLastHexDigit);
                prop_assert_eq!(once.observations(), twice.observations());
            }
        }
    }

    #[test]
    fn registry_validates_aps() {
        let ring = vec![
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(0.0, 0.001).unwrap(),
            GeoPoint::new(0.001, 0.001).unwrap(),
            GeoPoint::new(0.001, 0.0).unwrap(),
        ];
        let poly = FloorPolygon::new(ring).unwrap();
        let inside = GeoPoint::new(0.0005, 0.0005).unwrap();
        let outside = GeoPoint::new(0.05, 0.05).unwrap();

        let good = AccessPoint { mac: mac("aa:bb:cc:dd:ee:00"), floor: 1, location: inside };
        assert!(ApRegistry::new("b", vec![poly.clone()], vec![good]).is_ok());

        let bad_floor = AccessPoint { mac: mac("aa:bb:cc:dd:ee:00"), floor: 2, location: inside };
        assert!(ApRegistry::new("b", vec![poly.clone()], vec![bad_floor]).is_err());

        let outside_ap = AccessPoint { mac: mac("aa:bb:cc:dd:ee:00"), floor: 1, location: outside };
        assert!(ApRegistry::new("b", vec![poly.clone()], vec![outside_ap]).is_err());

        let virtual_mac = AccessPoint { mac: mac("aa:bb:cc:dd:ee:03"), floor: 1, location: inside };
        assert!(ApRegistry::new("b", vec![poly.clone()], vec![virtual_mac]).is_err());

        let dup = vec![
            AccessPoint { mac: mac("aa:bb:cc:dd:ee:00"), floor: 1, location: inside },
            AccessPoint { mac: mac("aa:bb:cc:dd:ee:00"), floor: 1, location: inside },
        ];
        assert!(ApRegistry::new("b", vec![poly], dup).is_err());
    }
}
