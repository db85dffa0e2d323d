//! Sample / slot / window accounting of detection-counted packets.
//!
//! Events fall into 5-second samples, samples roll up into 180-second slots,
//! and ten slots make a window. Slots are aligned to the stream epoch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineProfile;
use crate::error::{Error, Result};
use crate::ingest::{Diagnostics, PacketEvent};
use crate::protocol::Scope;

pub const DEFAULT_SAMPLE_SECS: f64 = 5.0;
pub const DEFAULT_SLOT_SECS: f64 = 180.0;
pub const DEFAULT_WINDOW_SLOTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub sample_secs: f64,
    pub slot_secs: f64,
    pub window_slots: usize,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            sample_secs: DEFAULT_SAMPLE_SECS,
            slot_secs: DEFAULT_SLOT_SECS,
            window_slots: DEFAULT_WINDOW_SLOTS,
        }
    }
}

impl SlotConfig {
    /// Builds a config for a custom slot length, keeping the 36-samples-per-slot ratio
    /// whenever the slot is not a whole number of default samples.
    pub fn with_slot_secs(slot_secs: f64) -> Self {
        let sample_secs = if (slot_secs / DEFAULT_SAMPLE_SECS).fract() == 0.0 {
            DEFAULT_SAMPLE_SECS
        } else {
            slot_secs / (DEFAULT_SLOT_SECS / DEFAULT_SAMPLE_SECS)
        };
        SlotConfig {
            sample_secs,
            slot_secs,
            ..SlotConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.slot_secs / self.sample_secs;
        if !(self.slot_secs > 0.0 && self.sample_secs > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "slot length {} s must be a positive multiple of the sample length {} s",
                self.slot_secs, self.sample_secs
            )));
        }
        if self.window_slots == 0 {
            return Err(Error::Config("window must hold at least one slot".into()));
        }
        Ok(())
    }

    pub fn samples_per_slot(&self) -> usize {
        (self.slot_secs / self.sample_secs).round() as usize
    }

    /// Global (epoch-aligned) slot number containing `t`.
    pub fn slot_of(&self, t: f64) -> u64 {
        (t / self.slot_secs).floor().max(0.0) as u64
    }

    pub fn slot_start(&self, global_slot: u64) -> f64 {
        global_slot as f64 * self.slot_secs
    }
}

/// Totals for one device over one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub device_id: String,
    pub window_index: u64,
    /// 0-based position within the window.
    pub slot_index: usize,
    pub slot_start: f64,
    pub slot_length: f64,
    /// Per-protocol detection counts (TCP, UDP, MQTT).
    pub counts: BTreeMap<Scope, u64>,
    /// Min-max normalized counts, including the aggregate.
    pub normalized: BTreeMap<Scope, f64>,
    /// Per-protocol counts for each sample of the slot.
    pub sample_counts: BTreeMap<Scope, Vec<u64>>,
    pub diagnostics: Diagnostics,
}

impl SlotMetrics {
    /// Count for a scope; the aggregate is the sum of the protocol counts.
    pub fn count(&self, scope: Scope) -> u64 {
        match scope {
            Scope::Aggregate => self.counts.values().sum(),
            s => self.counts.get(&s).copied().unwrap_or(0),
        }
    }

    pub fn global_slot(&self, window_slots: usize) -> u64 {
        self.window_index * window_slots as u64 + self.slot_index as u64
    }

    pub fn slot_end(&self) -> f64 {
        self.slot_start + self.slot_length
    }
}

/// Min-max normalization of a packet count, clamped to `[0, 1]`.
pub fn normalize_rate(pkt: f64, min_pkt: f64, max_pkt: f64) -> Result<f64> {
    if !(max_pkt > min_pkt) {
        return Err(Error::InvalidBaseline(format!(
            "max_pkt {max_pkt} must exceed min_pkt {min_pkt}"
        )));
    }
    Ok(((pkt - min_pkt) / (max_pkt - min_pkt)).clamp(0.0, 1.0))
}

/// Mean per-slot count for a scope.
pub fn window_average(slots: &[SlotMetrics], scope: Scope) -> Result<f64> {
    if slots.is_empty() {
        return Err(Error::InsufficientData("window average over zero slots".into()));
    }
    let total: u64 = slots.iter().map(|s| s.count(scope)).sum();
    Ok(total as f64 / slots.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Normal,
    Abnormal,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub device_id: String,
    pub window_index: u64,
    pub window_start: f64,
    pub slots: Vec<SlotMetrics>,
    pub mean_count: BTreeMap<Scope, f64>,
    pub verdict: Verdict,
}

impl WindowSummary {
    pub fn new(device_id: &str, window_index: u64, config: &SlotConfig, slots: Vec<SlotMetrics>) -> Self {
        let mean_count = Scope::ALL
            .iter()
            .filter_map(|&s| window_average(&slots, s).ok().map(|a| (s, a)))
            .collect();
        WindowSummary {
            device_id: device_id.to_string(),
            window_index,
            window_start: window_index as f64 * config.window_slots as f64 * config.slot_secs,
            slots,
            mean_count,
            verdict: Verdict::Undecided,
        }
    }
}

/// Per-device accumulator for the currently open slot.
#[derive(Debug, Clone)]
pub struct SlotAccumulator {
    device_id: String,
    config: SlotConfig,
    open_slot: u64,
    open_sample: usize,
    samples: BTreeMap<Scope, Vec<u64>>,
    diagnostics: Diagnostics,
}

impl SlotAccumulator {
    pub fn new(device_id: impl Into<String>, config: SlotConfig) -> Result<Self> {
        config.validate()?;
        Ok(SlotAccumulator {
            device_id: device_id.into(),
            config,
            open_slot: 0,
            open_sample: 0,
            samples: Self::empty_samples(&config),
            diagnostics: Diagnostics::default(),
        })
    }

    fn empty_samples(config: &SlotConfig) -> BTreeMap<Scope, Vec<u64>> {
        Scope::PROTOCOLS
            .iter()
            .map(|&s| (s, vec![0; config.samples_per_slot()]))
            .collect()
    }

    pub fn config(&self) -> &SlotConfig {
        &self.config
    }

    pub fn open_slot(&self) -> u64 {
        self.open_slot
    }

    pub fn open_slot_start(&self) -> f64 {
        self.config.slot_start(self.open_slot)
    }

    /// Adds one event, first closing every slot that ended before it.
    pub fn accumulate(&mut self, event: &PacketEvent, profile: &BaselineProfile) -> Result<Vec<SlotMetrics>> {
        let slot = self.config.slot_of(event.timestamp);
        let sample = self.sample_of(event.timestamp, slot);
        if slot < self.open_slot || (slot == self.open_slot && sample < self.open_sample) {
            return Err(Error::OutOfOrder {
                device: event.device_id.clone(),
                timestamp: event.timestamp,
                open_start: self.open_slot_start() + self.open_sample as f64 * self.config.sample_secs,
            });
        }
        let closed = self.advance_to_slot(slot, profile);
        self.open_sample = sample;
        match event.protocol.scope() {
            Some(scope) if event.is_detection_counted() => {
                if let Some(series) = self.samples.get_mut(&scope) {
                    series[sample] += 1;
                }
            }
            _ => self.diagnostics.record(event),
        }
        Ok(closed)
    }

    /// Closes every slot that ends at or before `clock`.
    pub fn advance_to(&mut self, clock: f64, profile: &BaselineProfile) -> Vec<SlotMetrics> {
        let target = self.config.slot_of(clock);
        self.advance_to_slot(target, profile)
    }

    fn advance_to_slot(&mut self, slot: u64, profile: &BaselineProfile) -> Vec<SlotMetrics> {
        let mut closed = Vec::new();
        while self.open_slot < slot {
            closed.push(self.close_slot(profile));
        }
        closed
    }

    fn sample_of(&self, t: f64, slot: u64) -> usize {
        let offset = t - self.config.slot_start(slot);
        ((offset / self.config.sample_secs).floor().max(0.0) as usize).min(self.config.samples_per_slot() - 1)
    }

    /// Closes the open slot and opens the next one. Missing samples stay zero.
    pub fn close_slot(&mut self, profile: &BaselineProfile) -> SlotMetrics {
        let samples = std::mem::replace(&mut self.samples, Self::empty_samples(&self.config));
        let diagnostics = std::mem::take(&mut self.diagnostics);
        let counts: BTreeMap<Scope, u64> = samples.iter().map(|(&s, v)| (s, v.iter().sum())).collect();
        let aggregate: u64 = counts.values().sum();
        let normalized = Scope::ALL
            .iter()
            .filter_map(|&scope| {
                let band = profile.band(scope)?;
                let count = if scope == Scope::Aggregate { aggregate } else { counts[&scope] };
                normalize_rate(count as f64, band.min_pkt as f64, band.max_pkt as f64)
                    .ok()
                    .map(|k| (scope, k))
            })
            .collect();
        let window_slots = self.config.window_slots as u64;
        let metrics = SlotMetrics {
            device_id: self.device_id.clone(),
            window_index: self.open_slot / window_slots,
            slot_index: (self.open_slot % window_slots) as usize,
            slot_start: self.open_slot_start(),
            slot_length: self.config.slot_secs,
            counts,
            normalized,
            sample_counts: samples,
            diagnostics,
        };
        self.open_slot += 1;
        self.open_sample = 0;
        metrics
    }

    /// Folds another accumulator for the same open slot into this one.
    pub fn merge(&mut self, other: &SlotAccumulator) -> Result<()> {
        if other.open_slot != self.open_slot || other.config != self.config {
            return Err(Error::Config("cannot merge accumulators for different slots".into()));
        }
        for (scope, series) in &other.samples {
            let mine = self.samples.get_mut(scope).expect("same scopes");
            for (a, b) in mine.iter_mut().zip(series) {
                *a += b;
            }
        }
        self.diagnostics.merge(&other.diagnostics);
        self.open_sample = self.open_sample.max(other.open_sample);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{default_profile, DeviceStatus};
    use crate::protocol::{PacketKind, Protocol};

    fn profile() -> BaselineProfile {
        default_profile("dev", DeviceStatus::Active)
    }

    fn acc() -> SlotAccumulator {
        SlotAccumulator::new("dev", SlotConfig::default()).unwrap()
    }

    #[test]
    fn one_tcp_event_increments_its_sample() {
        let mut a = acc();
        a.accumulate(&PacketEvent::new(12.0, "dev", Protocol::Tcp), &profile()).unwrap();
        let slot = a.close_slot(&profile());
        assert_eq!(slot.counts[&Scope::Tcp], 1);
        assert_eq!(slot.sample_counts[&Scope::Tcp][2], 1);
        assert_eq!(slot.sample_counts[&Scope::Tcp].len(), 36);
    }

    #[test]
    fn uncounted_traffic_goes_to_diagnostics() {
        let mut a = acc();
        let p = profile();
        a.accumulate(&PacketEvent::new(1.0, "dev", Protocol::MqttPub), &p).unwrap();
        a.accumulate(
            &PacketEvent::new(1.0, "dev", Protocol::Tcp).with_kind(PacketKind::Acknowledged),
            &p,
        )
        .unwrap();
        let slot = a.close_slot(&p);
        assert_eq!(slot.count(Scope::Aggregate), 0);
        assert_eq!(slot.diagnostics.mqtt_published, 1);
        assert_eq!(slot.diagnostics.tcp_acknowledgments, 1);
    }

    #[test]
    fn next_slot_event_closes_current() {
        let mut a = acc();
        let p = profile();
        assert!(a.accumulate(&PacketEvent::new(10.0, "dev", Protocol::Udp), &p).unwrap().is_empty());
        let closed = a.accumulate(&PacketEvent::new(200.0, "dev", Protocol::Udp), &p).unwrap();
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].counts[&Scope::Udp], 1);
        let next = a.close_slot(&p);
        assert_eq!(next.slot_index, 1);
        assert_eq!(next.counts[&Scope::Udp], 1);
    }

    #[test]
    fn skipped_slots_close_empty() {
        let mut a = acc();
        let closed = a.accumulate(&PacketEvent::new(3.0 * 180.0 + 1.0, "dev", Protocol::Udp), &profile()).unwrap();
        assert_eq!(closed.len(), 3);
        assert!(closed.iter().all(|s| s.count(Scope::Aggregate) == 0));
        assert_eq!(closed[2].slot_index, 2);
    }

    #[test]
    fn earlier_event_is_out_of_order() {
        let mut a = acc();
        let p = profile();
        a.accumulate(&PacketEvent::new(50.0, "dev", Protocol::Udp), &p).unwrap();
        let err = a.accumulate(&PacketEvent::new(20.0, "dev", Protocol::Udp), &p).unwrap_err();
        assert!(matches!(err, Error::OutOfOrder { .. }));
    }

    #[test]
    fn thirty_six_samples_of_one_hundred() {
        let mut a = acc();
        let p = profile();
        for sample in 0..36 {
            for i in 0..100 {
                let t = sample as f64 * 5.0 + i as f64 * 0.04;
                a.accumulate(&PacketEvent::new(t, "dev", Protocol::Tcp), &p).unwrap();
            }
        }
        let slot = a.close_slot(&p);
        assert_eq!(slot.counts[&Scope::Tcp], 3600);
        assert!(slot.sample_counts[&Scope::Tcp].iter().all(|&c| c == 100));
    }

    #[test]
    fn empty_slot_normalizes_to_zero() {
        let mut a = acc();
        let slot = a.close_slot(&profile());
        assert!(slot.counts.values().all(|&c| c == 0));
        assert!(slot.normalized.values().all(|&k| k == 0.0));
    }

    #[test]
    fn normalized_against_table_extrema() {
        let mut a = acc();
        let p = profile();
        for i in 0..5000 {
            a.accumulate(&PacketEvent::new(i as f64 * 0.03, "dev", Protocol::Tcp), &p).unwrap();
        }
        let slot = a.close_slot(&p);
        assert_eq!(slot.normalized[&Scope::Tcp], 0.75);
    }

    #[test]
    fn normalize_rate_endpoints_and_errors() {
        assert_eq!(normalize_rate(2000.0, 2000.0, 6000.0).unwrap(), 0.0);
        assert_eq!(normalize_rate(6000.0, 2000.0, 6000.0).unwrap(), 1.0);
        assert_eq!(normalize_rate(10.0, 2000.0, 6000.0).unwrap(), 0.0);
        assert_eq!(normalize_rate(9000.0, 2000.0, 6000.0).unwrap(), 1.0);
        assert!(matches!(normalize_rate(1.0, 5.0, 5.0), Err(Error::InvalidBaseline(_))));
        assert!(normalize_rate(1.0, 6.0, 5.0).is_err());
    }

    fn slot_with(count: u64) -> SlotMetrics {
        SlotMetrics {
            device_id: "dev".into(),
            window_index: 0,
            slot_index: 0,
            slot_start: 0.0,
            slot_length: 180.0,
            counts: [(Scope::Tcp, count), (Scope::Udp, 0), (Scope::Mqtt, 0)].into(),
            normalized: BTreeMap::new(),
            sample_counts: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn window_average_cases() {
        assert_eq!(window_average(&[slot_with(3000)], Scope::Tcp).unwrap(), 3000.0);
        assert_eq!(window_average(&[slot_with(2000), slot_with(4000)], Scope::Tcp).unwrap(), 3000.0);
        assert!(window_average(&[], Scope::Tcp).is_err());
    }

    #[test]
    fn split_accumulators_merge_to_whole() {
        let p = profile();
        let events: Vec<_> = (0..400)
            .map(|i| {
                let proto = [Protocol::Tcp, Protocol::Udp, Protocol::MqttSub, Protocol::Other][i % 4];
                PacketEvent::new(i as f64 * 0.4, "dev", proto)
            })
            .collect();
        let mut whole = acc();
        for e in &events {
            whole.accumulate(e, &p).unwrap();
        }
        let (left, right) = events.split_at(150);
        let mut a = acc();
        let mut b = acc();
        left.iter().for_each(|e| assert!(a.accumulate(e, &p).unwrap().is_empty()));
        right.iter().for_each(|e| assert!(b.accumulate(e, &p).unwrap().is_empty()));
        a.merge(&b).unwrap();
        assert_eq!(a.close_slot(&p), whole.close_slot(&p));
    }
}
