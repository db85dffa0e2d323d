//! Wires ingest, windowing, energy, detection, alerting and the store together.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::alert::{emit_alert, AlertSink};
use crate::baseline::{threshold_for, BaselineProfile};
use crate::detector::{DetectionEvent, DetectorConfig, EventKind, ScopeDetector};
use crate::energy::{bucket_by_slot, integrate_slot, normalize_energy, EnergySample, EnergySlot};
use crate::error::Result;
use crate::ingest::PacketEvent;
use crate::protocol::Scope;
use crate::store::{Label, Record, RecordKind, Store};
use crate::windowing::{SlotAccumulator, SlotConfig, SlotMetrics};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub slot: SlotConfig,
    pub detector: DetectorConfig,
    pub scopes: Vec<Scope>,
    pub run_id: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            slot: SlotConfig::default(),
            detector: DetectorConfig::default(),
            scopes: Scope::ALL.to_vec(),
            run_id: "run-1".to_string(),
        }
    }
}

impl PipelineConfig {
    /// Slot length override; the cooldown follows the slot length.
    pub fn with_slot_secs(mut self, slot_secs: f64) -> Self {
        self.slot = SlotConfig {
            window_slots: self.slot.window_slots,
            ..SlotConfig::with_slot_secs(slot_secs)
        };
        self.detector.cooldown_secs = slot_secs;
        self
    }
}

/// Payload of a stored `SLOT` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// Epoch-aligned slot number.
    pub global_slot: u64,
    pub metrics: SlotMetrics,
    /// Scopes that were cooling down for this slot; their counts were not evaluated.
    pub suppressed: Vec<Scope>,
    /// Scopes whose slot count exceeded `y`.
    pub over_bound: Vec<Scope>,
    pub truth: Option<Label>,
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub run_id: String,
    pub slots: usize,
    /// Every event in emission order, window verdicts included.
    pub events: Vec<DetectionEvent>,
    pub delivery_failures: usize,
}

impl RunSummary {
    /// Events other than window verdicts.
    pub fn detection_events(&self) -> impl Iterator<Item = &DetectionEvent> {
        self.events.iter().filter(|e| e.kind != EventKind::WindowVerdict)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn attack_confirmed(&self) -> bool {
        self.count(EventKind::AttackConfirmed) > 0
    }

    /// 0 clean, 2 traffic-only anomaly, 3 attack confirmed.
    pub fn exit_code(&self) -> i32 {
        if self.attack_confirmed() {
            3
        } else if self.count(EventKind::TrafficOnlyAnomaly) > 0 {
            2
        } else {
            0
        }
    }
}

struct DeviceMonitor {
    profile: BaselineProfile,
    accumulator: SlotAccumulator,
    detectors: Vec<ScopeDetector>,
    energy: BTreeMap<u64, Vec<EnergySample>>,
}

/// Offline / streaming detection pipeline for any number of devices.
pub struct Pipeline<'s> {
    config: PipelineConfig,
    profile: BaselineProfile,
    store: &'s mut Store,
    sinks: Vec<Box<dyn AlertSink>>,
    energy: HashMap<String, Vec<EnergySample>>,
    truth: Option<BTreeMap<u64, Label>>,
    devices: BTreeMap<String, DeviceMonitor>,
    summary: RunSummary,
}

impl<'s> Pipeline<'s> {
    /// `profile` is applied to every device seen (re-targeted to its id).
    pub fn new(config: PipelineConfig, profile: BaselineProfile, store: &'s mut Store) -> Result<Self> {
        config.slot.validate()?;
        profile.validate()?;
        for &scope in &config.scopes {
            threshold_for(&profile, scope)?;
        }
        let summary = RunSummary {
            run_id: config.run_id.clone(),
            ..RunSummary::default()
        };
        Ok(Pipeline {
            config,
            profile,
            store,
            sinks: Vec::new(),
            energy: HashMap::new(),
            truth: None,
            devices: BTreeMap::new(),
            summary,
        })
    }

    pub fn add_sink(&mut self, sink: Box<dyn AlertSink>) {
        self.sinks.push(sink);
    }

    /// Sensor samples for one device.
    pub fn set_energy(&mut self, device_id: &str, samples: Vec<EnergySample>) {
        self.energy.insert(device_id.to_string(), samples);
    }

    /// Ground-truth labels by global slot, copied into slot records.
    pub fn set_truth(&mut self, labels: BTreeMap<u64, Label>) {
        self.truth = Some(labels);
    }

    fn device(&mut self, device_id: &str) -> Result<&mut DeviceMonitor> {
        if !self.devices.contains_key(device_id) {
            let profile = self.profile.for_device(device_id);
            let record = Record::new(
                RecordKind::Baseline,
                device_id,
                profile.learned_at,
                Label::Unlabeled,
                &self.config.run_id,
                &profile,
            )?;
            self.store.append(record)?;
            let energy = self
                .energy
                .get(device_id)
                .map(|s| bucket_by_slot(s, self.config.slot.slot_secs))
                .unwrap_or_default();
            let monitor = DeviceMonitor {
                accumulator: SlotAccumulator::new(device_id, self.config.slot)?,
                detectors: self
                    .config
                    .scopes
                    .iter()
                    .map(|&s| ScopeDetector::new(device_id, s, self.config.detector))
                    .collect(),
                energy,
                profile,
            };
            self.devices.insert(device_id.to_string(), monitor);
        }
        Ok(self.devices.get_mut(device_id).expect("inserted above"))
    }

    /// Feeds one event; slots it closes are evaluated immediately.
    pub fn push(&mut self, event: &PacketEvent) -> Result<()> {
        let monitor = self.device(&event.device_id)?;
        let closed = monitor.accumulator.accumulate(event, &monitor.profile)?;
        for slot in closed {
            self.handle_slot(&event.device_id, slot)?;
        }
        Ok(())
    }

    pub fn run<I>(&mut self, events: I) -> Result<()>
    where
        I: IntoIterator<Item = Result<PacketEvent>>,
    {
        for event in events {
            self.push(&event?)?;
        }
        Ok(())
    }

    /// Closes every device's open slot, plus any further slots up to and
    /// including the one containing `horizon` (defaults to the latest energy sample).
    pub fn finish(mut self, horizon: Option<f64>) -> Result<RunSummary> {
        let device_ids: Vec<String> = self.devices.keys().cloned().collect();
        for device_id in device_ids {
            let device_horizon = horizon.or_else(|| {
                self.energy
                    .get(&device_id)
                    .and_then(|s| s.last())
                    .map(|s| s.timestamp)
            });
            let mut closed = Vec::new();
            {
                let monitor = self.devices.get_mut(&device_id).expect("known device");
                if let Some(h) = device_horizon {
                    closed.extend(monitor.accumulator.advance_to(h, &monitor.profile));
                }
                closed.push(monitor.accumulator.close_slot(&monitor.profile));
            }
            let last_was_window_end = closed
                .last()
                .is_some_and(|s| s.slot_index + 1 == self.config.slot.window_slots);
            for slot in closed {
                self.handle_slot(&device_id, slot)?;
            }
            if !last_was_window_end {
                self.finish_windows(&device_id)?;
            }
        }
        self.store.sync()?;
        Ok(self.summary)
    }

    fn energy_slot(&self, monitor: &DeviceMonitor, device_id: &str, slot: &SlotMetrics) -> Option<EnergySlot> {
        if !self.energy.contains_key(device_id) {
            return None;
        }
        let global = slot.global_slot(self.config.slot.window_slots);
        let samples = monitor.energy.get(&global).map(Vec::as_slice).unwrap_or(&[]);
        let mut energy = integrate_slot(device_id, samples, slot.slot_start, slot.slot_length);
        energy.slot_index = global;
        energy.normalized = normalize_energy(
            energy.mean_sample_joules,
            monitor.profile.energy_min,
            monitor.profile.energy_max,
        )
        .unwrap_or(0.0);
        Some(energy)
    }

    fn handle_slot(&mut self, device_id: &str, slot: SlotMetrics) -> Result<()> {
        let run_id = self.config.run_id.clone();
        let window_slots = self.config.slot.window_slots;
        let monitor = self.devices.get(device_id).expect("known device");
        let energy = self.energy_slot(monitor, device_id, &slot);

        let monitor = self.devices.get_mut(device_id).expect("known device");
        let mut suppressed = Vec::new();
        let mut over_bound = Vec::new();
        let mut events = Vec::new();
        for detector in &mut monitor.detectors {
            let outcome = detector.on_slot(&slot, energy.as_ref(), &monitor.profile)?;
            if outcome.suppressed {
                suppressed.push(detector.scope());
            }
            if outcome.over_bound {
                over_bound.push(detector.scope());
            }
            events.extend(outcome.events);
        }

        let global = slot.global_slot(window_slots);
        let label = if over_bound.is_empty() { Label::Normal } else { Label::Abnormal };
        let is_window_end = slot.slot_index + 1 == window_slots;
        let slot_record = SlotRecord {
            global_slot: global,
            truth: self.truth.as_ref().and_then(|t| t.get(&global).copied()),
            metrics: slot,
            suppressed,
            over_bound,
        };
        let m = &slot_record.metrics;
        self.store.append(Record::new(
            RecordKind::Slot,
            device_id,
            m.slot_start,
            label,
            &run_id,
            &slot_record,
        )?)?;
        if let Some(e) = &energy {
            let threshold = self.devices[device_id].profile.energy_threshold;
            let label = if e.data_gap {
                Label::Unlabeled
            } else if e.mean_sample_joules > threshold {
                Label::Abnormal
            } else {
                Label::Normal
            };
            self.store
                .append(Record::new(RecordKind::Energy, device_id, e.slot_start, label, &run_id, e)?)?;
        }
        self.summary.slots += 1;
        for event in events {
            self.dispatch(event)?;
        }
        if is_window_end {
            self.finish_windows(device_id)?;
        }
        Ok(())
    }

    fn finish_windows(&mut self, device_id: &str) -> Result<()> {
        let slot_config = self.config.slot;
        let monitor = self.devices.get_mut(device_id).expect("known device");
        let mut verdicts = Vec::new();
        for detector in &mut monitor.detectors {
            if let Some(v) = detector.finish_window(&monitor.profile, &slot_config)? {
                verdicts.push(v);
            }
        }
        for v in verdicts {
            self.dispatch(v)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, event: DetectionEvent) -> Result<()> {
        let receipt = emit_alert(&event, &self.config.run_id, self.store, &mut self.sinks)?;
        self.summary.delivery_failures += receipt.failed.len();
        self.summary.events.push(event);
        Ok(())
    }
}
