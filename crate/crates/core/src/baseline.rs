//! Normal-behaviour profiles: per-scope packet bands and the energy threshold.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::EnergySlot;
use crate::error::{Error, Result};
use crate::protocol::Scope;
use crate::windowing::SlotMetrics;

pub const DEFAULT_MIN_PKT: u64 = 2000;
pub const DEFAULT_MAX_PKT: u64 = 6000;
pub const DEFAULT_AGGREGATE_MIN_PKT: u64 = 1500;
/// Joules per one-second sample.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 1.42;
pub const DEFAULT_MARGIN: f64 = 0.10;
/// Band scale used for idle devices when no idle data has been learned.
pub const IDLE_SCALE: f64 = 0.25;
pub const MIN_LEARNING_SLOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeviceStatus {
    Idle,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileSource {
    Defaults,
    Learned,
}

/// Packet-count band for one scope. `normal_upper` is the bound `y` the detector compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub min_pkt: u64,
    pub max_pkt: u64,
    pub normal_upper: u64,
    /// False when the band fell back to defaults during learning.
    pub learned: bool,
}

impl Band {
    fn fixed(min_pkt: u64, max_pkt: u64, normal_upper: u64) -> Self {
        Band {
            min_pkt,
            max_pkt,
            normal_upper,
            learned: false,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        let s = |v: u64| (v as f64 * factor).round() as u64;
        Band {
            min_pkt: s(self.min_pkt),
            max_pkt: s(self.max_pkt),
            normal_upper: s(self.normal_upper),
            learned: self.learned,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_pkt >= self.max_pkt {
            return Err(Error::InvalidBaseline(format!(
                "band min {} must be below max {}",
                self.min_pkt, self.max_pkt
            )));
        }
        if self.normal_upper < self.min_pkt {
            return Err(Error::InvalidBaseline(format!(
                "normal upper bound {} below band min {}",
                self.normal_upper, self.min_pkt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub device_id: String,
    pub status: DeviceStatus,
    pub bands: BTreeMap<Scope, Band>,
    pub energy_threshold: f64,
    /// Extrema used to normalize slot energy.
    pub energy_min: f64,
    pub energy_max: f64,
    /// Stream time of the last slot used for learning (0 for defaults).
    pub learned_at: f64,
    pub source: ProfileSource,
}

impl BaselineProfile {
    pub fn band(&self, scope: Scope) -> Option<&Band> {
        self.bands.get(&scope)
    }

    pub fn with_energy_threshold(mut self, threshold: f64) -> Self {
        self.energy_threshold = threshold;
        self
    }

    /// Re-targets a profile to another device id (used when one profile serves several devices).
    pub fn for_device(&self, device_id: &str) -> Self {
        BaselineProfile {
            device_id: device_id.to_string(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for band in self.bands.values() {
            band.validate()?;
        }
        if !(self.energy_max > self.energy_min) {
            return Err(Error::InvalidBaseline("energy extrema are degenerate".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let profile: BaselineProfile = serde_json::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }
}

fn default_bands() -> BTreeMap<Scope, Band> {
    let protocol_band = Band::fixed(DEFAULT_MIN_PKT, DEFAULT_MAX_PKT, DEFAULT_MAX_PKT);
    BTreeMap::from([
        (Scope::Tcp, protocol_band),
        (Scope::Udp, protocol_band),
        (Scope::Mqtt, protocol_band),
        (
            Scope::Aggregate,
            Band::fixed(DEFAULT_AGGREGATE_MIN_PKT, DEFAULT_MAX_PKT, DEFAULT_MAX_PKT),
        ),
    ])
}

/// The published normal bands: 2000-6000 packets per slot per protocol,
/// 1500-6000 for the aggregate, 1.42 J per sample. Idle devices get the
/// same bands scaled by [`IDLE_SCALE`].
pub fn default_profile(device_id: &str, status: DeviceStatus) -> BaselineProfile {
    let mut bands = default_bands();
    if status == DeviceStatus::Idle {
        for band in bands.values_mut() {
            *band = band.scaled(IDLE_SCALE);
        }
    }
    BaselineProfile {
        device_id: device_id.to_string(),
        status,
        bands,
        energy_threshold: DEFAULT_ENERGY_THRESHOLD,
        energy_min: 0.0,
        energy_max: 2.0 * DEFAULT_ENERGY_THRESHOLD,
        learned_at: 0.0,
        source: ProfileSource::Defaults,
    }
}

fn with_margin(count: u64, margin: f64) -> u64 {
    count + (count as f64 * margin).round() as u64
}

/// Learns a profile from attack-free slots.
///
/// Each scope's band is the observed count extrema; `normal_upper` is the
/// observed max plus `margin`. A constant series is widened upward by the
/// margin. Scopes that saw no traffic at all keep the default band.
pub fn learn_baseline(
    slots: &[SlotMetrics],
    energy: &[EnergySlot],
    status: DeviceStatus,
    margin: f64,
) -> Result<BaselineProfile> {
    if slots.len() < MIN_LEARNING_SLOTS {
        return Err(Error::InsufficientData(format!(
            "learning needs at least {MIN_LEARNING_SLOTS} slots, got {}",
            slots.len()
        )));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Config(format!("margin must be non-negative, got {margin}")));
    }
    let device_id = slots[0].device_id.clone();
    let mut profile = default_profile(&device_id, status);
    for scope in Scope::ALL {
        let counts = slots.iter().map(|s| s.count(scope));
        let min = counts.clone().min().unwrap_or(0);
        let max = counts.max().unwrap_or(0);
        if max == 0 {
            continue;
        }
        let upper = with_margin(max, margin);
        let band = Band {
            min_pkt: min,
            max_pkt: if max > min { max } else { upper },
            normal_upper: upper,
            learned: true,
        };
        band.validate().map_err(|_| {
            Error::InvalidBaseline(format!(
                "{scope} counts are constant at {max}; a positive margin is needed to widen the band"
            ))
        })?;
        profile.bands.insert(scope, band);
    }

    let energies: Vec<f64> = energy
        .iter()
        .filter(|e| !e.data_gap)
        .map(|e| e.mean_sample_joules)
        .collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if e_max > e_min {
        profile.energy_min = e_min;
        profile.energy_max = e_max;
    }

    profile.learned_at = slots.iter().map(SlotMetrics::slot_end).fold(0.0, f64::max);
    profile.source = ProfileSource::Learned;
    Ok(profile)
}

/// The rate bound `y` and the energy threshold for a scope.
pub fn threshold_for(profile: &BaselineProfile, scope: Scope) -> Result<(u64, f64)> {
    let band = profile
        .band(scope)
        .ok_or_else(|| Error::Config(format!("profile for {} has no {scope} band", profile.device_id)))?;
    Ok((band.normal_upper, profile.energy_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Diagnostics;

    fn slot(tcp: u64, udp: u64, mqtt: u64) -> SlotMetrics {
        SlotMetrics {
            device_id: "dev".into(),
            window_index: 0,
            slot_index: 0,
            slot_start: 0.0,
            slot_length: 180.0,
            counts: [(Scope::Tcp, tcp), (Scope::Udp, udp), (Scope::Mqtt, mqtt)].into(),
            normalized: BTreeMap::new(),
            sample_counts: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn default_bands() {
        let p = default_profile("d", DeviceStatus::Active);
        let tcp = p.band(Scope::Tcp).unwrap();
        assert_eq!((tcp.min_pkt, tcp.max_pkt, tcp.normal_upper), (2000, 6000, 6000));
        assert_eq!(p.energy_threshold, 1.42);
        assert_eq!(p.band(Scope::Aggregate).unwrap().min_pkt, 1500);
        assert_eq!(threshold_for(&p, Scope::Tcp).unwrap(), (6000, 1.42));
        assert_eq!(threshold_for(&p, Scope::Aggregate).unwrap(), (6000, 1.42));
        assert_eq!(p, default_profile("d", DeviceStatus::Active));
    }

    #[test]
    fn idle_defaults_are_scaled() {
        let p = default_profile("d", DeviceStatus::Idle);
        let tcp = p.band(Scope::Tcp).unwrap();
        assert_eq!((tcp.min_pkt, tcp.max_pkt, tcp.normal_upper), (500, 1500, 1500));
        assert_eq!(p.band(Scope::Aggregate).unwrap().min_pkt, 375);
    }

    #[test]
    fn learns_extrema_plus_margin() {
        let slots = [slot(2000, 0, 0), slot(3500, 0, 0), slot(5000, 0, 0)];
        let p = learn_baseline(&slots, &[], DeviceStatus::Active, DEFAULT_MARGIN).unwrap();
        let tcp = p.band(Scope::Tcp).unwrap();
        assert_eq!((tcp.min_pkt, tcp.max_pkt, tcp.normal_upper), (2000, 5000, 5500));
        assert!(tcp.learned);
        assert!(!p.band(Scope::Udp).unwrap().learned);
        assert_eq!(p.source, ProfileSource::Learned);
        assert_eq!(p.learned_at, 180.0);
    }

    #[test]
    fn constant_series_widened_by_margin() {
        let slots = [slot(3000, 0, 0), slot(3000, 0, 0), slot(3000, 0, 0)];
        let p = learn_baseline(&slots, &[], DeviceStatus::Active, DEFAULT_MARGIN).unwrap();
        let tcp = p.band(Scope::Tcp).unwrap();
        assert_eq!((tcp.min_pkt, tcp.max_pkt, tcp.normal_upper), (3000, 3300, 3300));
        assert!(matches!(
            learn_baseline(&slots, &[], DeviceStatus::Active, 0.0),
            Err(Error::InvalidBaseline(_))
        ));
    }

    #[test]
    fn too_few_slots() {
        let slots = [slot(3000, 0, 0), slot(3100, 0, 0)];
        assert!(matches!(
            learn_baseline(&slots, &[], DeviceStatus::Active, DEFAULT_MARGIN),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn zero_margin_keeps_observed_max() {
        let slots = [slot(2100, 1000, 0), slot(2500, 3000, 0), slot(4000, 2000, 0)];
        let p = learn_baseline(&slots, &[], DeviceStatus::Active, 0.0).unwrap();
        assert_eq!(p.band(Scope::Tcp).unwrap().normal_upper, 4000);
        assert_eq!(p.band(Scope::Udp).unwrap().normal_upper, 3000);
        assert_eq!(p.band(Scope::Aggregate).unwrap().normal_upper, 6000);
    }

    #[test]
    fn missing_scope_is_config_error() {
        let mut p = default_profile("d", DeviceStatus::Active);
        p.bands.remove(&Scope::Udp);
        assert!(matches!(threshold_for(&p, Scope::Udp), Err(Error::Config(_))));
    }

    #[test]
    fn profile_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = default_profile("d", DeviceStatus::Idle);
        p.save(&path).unwrap();
        assert_eq!(BaselineProfile::load(&path).unwrap(), p);
    }
}
