//! The cooldown-counter detector.
//!
//! Each closed slot updates the running average `A` of the current window.
//! `A <= y` keeps the device in monitoring. `A > y` makes it stop listening on
//! the scope for one cooldown and bumps a counter; once the counter exceeds
//! the limit the device is registered abnormal and the slot's energy
//! footprint decides between a confirmed attack and a traffic-only anomaly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baseline::{threshold_for, BaselineProfile};
use crate::energy::EnergySlot;
use crate::error::Result;
use crate::protocol::Scope;
use crate::windowing::{SlotConfig, SlotMetrics, Verdict, WindowSummary, DEFAULT_SLOT_SECS};

pub const DEFAULT_COUNTER_LIMIT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Cooldowns tolerated before the device is registered abnormal.
    pub counter_limit: u32,
    /// How long the device stops listening after an over-bound slot.
    pub cooldown_secs: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            counter_limit: DEFAULT_COUNTER_LIMIT,
            cooldown_secs: DEFAULT_SLOT_SECS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Monitoring,
    Cooldown,
    RegisteredAbnormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionState {
    pub device_id: String,
    pub scope: Scope,
    pub counter: u32,
    pub cooldown_until: Option<f64>,
    pub phase: Phase,
}

impl DetectionState {
    pub fn new(device_id: impl Into<String>, scope: Scope) -> Self {
        DetectionState {
            device_id: device_id.into(),
            scope,
            counter: 0,
            cooldown_until: None,
            phase: Phase::Monitoring,
        }
    }

    pub fn in_cooldown_at(&self, t: f64) -> bool {
        self.cooldown_until.is_some_and(|until| t < until)
    }

    /// Phase as seen at time `t`; an expired cooldown reads as the resting phase.
    pub fn phase_at(&self, t: f64, counter_limit: u32) -> Phase {
        if self.in_cooldown_at(t) {
            Phase::Cooldown
        } else if self.counter > counter_limit {
            Phase::RegisteredAbnormal
        } else {
            Phase::Monitoring
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    CooldownStarted,
    AbnormalRegistered,
    AttackConfirmed,
    TrafficOnlyAnomaly,
    WindowVerdict,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::CooldownStarted => "COOLDOWN_STARTED",
            EventKind::AbnormalRegistered => "ABNORMAL_REGISTERED",
            EventKind::AttackConfirmed => "ATTACK_CONFIRMED",
            EventKind::TrafficOnlyAnomaly => "TRAFFIC_ONLY_ANOMALY",
            EventKind::WindowVerdict => "WINDOW_VERDICT",
        }
    }

    /// Kinds that go to alert sinks, not just the store.
    pub fn is_alert(self) -> bool {
        matches!(
            self,
            EventKind::AbnormalRegistered | EventKind::AttackConfirmed | EventKind::TrafficOnlyAnomaly
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEvidence {
    pub mean_sample_joules: f64,
    pub threshold: f64,
    pub data_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub timestamp: f64,
    pub device_id: String,
    pub scope: Scope,
    pub kind: EventKind,
    pub window_index: u64,
    pub slot_index: usize,
    /// Count of the triggering slot (or the window mean for verdicts).
    pub slot_count: u64,
    /// Running average `A`.
    pub average: f64,
    /// Rate bound `y`.
    pub bound: u64,
    pub counter: u32,
    pub energy: Option<EnergyEvidence>,
    pub verdict: Option<Verdict>,
    pub note: Option<String>,
}

impl DetectionEvent {
    /// `ALERT <kind> device=<id> scope=<protocol> A=<n> y=<n> energy=<j|na> t=<timestamp>`
    pub fn alert_line(&self) -> String {
        let energy = match &self.energy {
            Some(e) if !e.data_gap => format!("{:.4}", e.mean_sample_joules),
            _ => "na".to_string(),
        };
        format!(
            "ALERT {} device={} scope={} A={} y={} energy={} t={}",
            self.kind, self.device_id, self.scope, self.average, self.bound, energy, self.timestamp
        )
    }
}

/// Applies one evaluated slot to the state machine.
///
/// `average` is the window average including this slot. The slot must not
/// fall inside a cooldown; callers skip suppressed slots.
pub fn evaluate_slot(
    slot: &SlotMetrics,
    profile: &BaselineProfile,
    mut state: DetectionState,
    average: f64,
    config: &DetectorConfig,
) -> Result<(DetectionState, Vec<DetectionEvent>)> {
    let (bound, _) = threshold_for(profile, state.scope)?;
    let now = slot.slot_end();
    let mut events = Vec::new();
    if average <= bound as f64 {
        state.cooldown_until = None;
        state.phase = state.phase_at(now, config.counter_limit);
        return Ok((state, events));
    }

    state.counter += 1;
    state.cooldown_until = Some(now + config.cooldown_secs);
    let newly_registered = state.counter == config.counter_limit + 1;
    state.phase = Phase::Cooldown;
    let event = |kind| DetectionEvent {
        timestamp: now,
        device_id: state.device_id.clone(),
        scope: state.scope,
        kind,
        window_index: slot.window_index,
        slot_index: slot.slot_index,
        slot_count: slot.count(state.scope),
        average,
        bound,
        counter: state.counter,
        energy: None,
        verdict: None,
        note: None,
    };
    events.push(event(EventKind::CooldownStarted));
    if newly_registered {
        events.push(event(EventKind::AbnormalRegistered));
    }
    Ok((state, events))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyCheck {
    /// Mean per-sample energy above the threshold.
    Exceeded,
    WithinThreshold,
    /// No usable footprint for the slot.
    DataGap,
}

/// Compares a slot's energy footprint with the profile threshold (`> threshold` confirms).
pub fn cross_check_energy(slot_energy: Option<&EnergySlot>, profile: &BaselineProfile) -> EnergyCheck {
    match slot_energy {
        None => EnergyCheck::DataGap,
        Some(e) if e.data_gap => EnergyCheck::DataGap,
        Some(e) if e.mean_sample_joules > profile.energy_threshold => EnergyCheck::Exceeded,
        Some(_) => EnergyCheck::WithinThreshold,
    }
}

/// Turns an `ABNORMAL_REGISTERED` event and the energy check into the follow-up event.
pub fn confirm(
    registered: &DetectionEvent,
    slot_energy: Option<&EnergySlot>,
    profile: &BaselineProfile,
) -> DetectionEvent {
    let check = cross_check_energy(slot_energy, profile);
    let evidence = slot_energy.map(|e| EnergyEvidence {
        mean_sample_joules: e.mean_sample_joules,
        threshold: profile.energy_threshold,
        data_gap: e.data_gap,
    });
    let (kind, note) = match check {
        EnergyCheck::Exceeded => (EventKind::AttackConfirmed, None),
        EnergyCheck::WithinThreshold => (EventKind::TrafficOnlyAnomaly, None),
        EnergyCheck::DataGap => (
            EventKind::TrafficOnlyAnomaly,
            Some("energy data gap; cannot confirm".to_string()),
        ),
    };
    DetectionEvent {
        kind,
        energy: evidence,
        note,
        ..registered.clone()
    }
}

/// Window verdict for one scope: abnormal iff the window mean exceeds `y`.
pub fn classify_window(window: &WindowSummary, profile: &BaselineProfile, scope: Scope) -> Result<Verdict> {
    let (bound, _) = threshold_for(profile, scope)?;
    Ok(match window.mean_count.get(&scope) {
        None => Verdict::Undecided,
        Some(&mean) if mean > bound as f64 => Verdict::Abnormal,
        Some(_) => Verdict::Normal,
    })
}

pub fn reset_counter(mut state: DetectionState) -> DetectionState {
    state.counter = 0;
    state.cooldown_until = None;
    state.phase = Phase::Monitoring;
    state
}

/// Result of feeding one slot to a [`ScopeDetector`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub events: Vec<DetectionEvent>,
    /// The slot began while the scope was cooling down and was not evaluated.
    pub suppressed: bool,
    /// The slot's own count exceeded `y`.
    pub over_bound: bool,
}

/// Drives one (device, scope) state across slots and windows.
#[derive(Debug, Clone)]
pub struct ScopeDetector {
    state: DetectionState,
    config: DetectorConfig,
    window_slots: Vec<SlotMetrics>,
    window_index: Option<u64>,
    last_slot_index: usize,
}

impl ScopeDetector {
    pub fn new(device_id: &str, scope: Scope, config: DetectorConfig) -> Self {
        ScopeDetector {
            state: DetectionState::new(device_id, scope),
            config,
            window_slots: Vec::new(),
            window_index: None,
            last_slot_index: 0,
        }
    }

    pub fn state(&self) -> &DetectionState {
        &self.state
    }

    pub fn scope(&self) -> Scope {
        self.state.scope
    }

    pub fn on_slot(
        &mut self,
        slot: &SlotMetrics,
        slot_energy: Option<&EnergySlot>,
        profile: &BaselineProfile,
    ) -> Result<SlotOutcome> {
        let (bound, _) = threshold_for(profile, self.state.scope)?;
        let over_bound = slot.count(self.state.scope) > bound;
        self.window_index = Some(slot.window_index);
        self.last_slot_index = slot.slot_index;
        if self.state.in_cooldown_at(slot.slot_start) {
            return Ok(SlotOutcome {
                events: Vec::new(),
                suppressed: true,
                over_bound,
            });
        }
        self.window_slots.push(slot.clone());
        let total: u64 = self.window_slots.iter().map(|s| s.count(self.state.scope)).sum();
        let average = total as f64 / self.window_slots.len() as f64;
        let scope = self.state.scope;
        let state = std::mem::replace(&mut self.state, DetectionState::new("", scope));
        let (state, mut events) = evaluate_slot(slot, profile, state, average, &self.config)?;
        self.state = state;
        if let Some(registered) = events.iter_mut().find(|e| e.kind == EventKind::AbnormalRegistered) {
            let follow_up = confirm(registered, slot_energy, profile);
            registered.energy = follow_up.energy.clone();
            events.push(follow_up);
        }
        Ok(SlotOutcome {
            events,
            suppressed: false,
            over_bound,
        })
    }

    /// Closes the current window: emits its verdict and resets the counter on a normal window.
    pub fn finish_window(
        &mut self,
        profile: &BaselineProfile,
        slot_config: &SlotConfig,
    ) -> Result<Option<DetectionEvent>> {
        let Some(window_index) = self.window_index.take() else {
            return Ok(None);
        };
        let slots = std::mem::take(&mut self.window_slots);
        let mut summary = WindowSummary::new(&self.state.device_id, window_index, slot_config, slots);
        let verdict = classify_window(&summary, profile, self.state.scope)?;
        summary.verdict = verdict;
        if verdict == Verdict::Normal {
            let scope = self.state.scope;
            self.state = reset_counter(std::mem::replace(&mut self.state, DetectionState::new("", scope)));
        }
        let (bound, _) = threshold_for(profile, self.state.scope)?;
        let mean = summary.mean_count.get(&self.state.scope).copied().unwrap_or(0.0);
        let window_end = summary.window_start + slot_config.window_slots as f64 * slot_config.slot_secs;
        Ok(Some(DetectionEvent {
            timestamp: window_end,
            device_id: self.state.device_id.clone(),
            scope: self.state.scope,
            kind: EventKind::WindowVerdict,
            window_index,
            slot_index: self.last_slot_index,
            slot_count: mean.round() as u64,
            average: mean,
            bound,
            counter: self.state.counter,
            energy: None,
            verdict: Some(verdict),
            note: None,
        }))
    }

    /// Operator acknowledgment.
    pub fn acknowledge(&mut self) {
        self.state = reset_counter(self.state.clone());
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::baseline::{default_profile, DeviceStatus};
    use crate::ingest::Diagnostics;

    fn slot(global: u64, tcp: u64) -> SlotMetrics {
        SlotMetrics {
            device_id: "dev".into(),
            window_index: global / 10,
            slot_index: (global % 10) as usize,
            slot_start: global as f64 * 180.0,
            slot_length: 180.0,
            counts: [(Scope::Tcp, tcp)].into(),
            normalized: BTreeMap::new(),
            sample_counts: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn energy(mean: f64, gap: bool) -> EnergySlot {
        EnergySlot {
            device_id: "dev".into(),
            slot_index: 0,
            slot_start: 0.0,
            joules: mean * 180.0,
            mean_sample_joules: mean,
            normalized: 0.5,
            sample_count: 180,
            data_gap: gap,
        }
    }

    fn run(counts: &[u64]) -> (ScopeDetector, Vec<(u64, SlotOutcome)>) {
        let profile = default_profile("dev", DeviceStatus::Active);
        let mut det = ScopeDetector::new("dev", Scope::Tcp, DetectorConfig::default());
        let outcomes = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64, det.on_slot(&slot(i as u64, c), Some(&energy(1.6, false)), &profile).unwrap()))
            .collect();
        (det, outcomes)
    }

    fn kinds(outcomes: &[(u64, SlotOutcome)]) -> Vec<(u64, EventKind)> {
        outcomes
            .iter()
            .flat_map(|(i, o)| o.events.iter().map(move |e| (*i, e.kind)))
            .collect()
    }

    #[test]
    fn bound_itself_stays_normal() {
        let (det, out) = run(&[6000; 10]);
        assert!(kinds(&out).is_empty());
        assert_eq!(det.state().counter, 0);
        assert_eq!(det.state().phase, Phase::Monitoring);
    }

    #[test]
    fn one_over_bound_starts_cooldown() {
        let (det, out) = run(&[6001]);
        assert_eq!(kinds(&out), vec![(0, EventKind::CooldownStarted)]);
        assert_eq!(det.state().counter, 1);
        assert_eq!(det.state().cooldown_until, Some(360.0));
        assert_eq!(det.state().phase, Phase::Cooldown);
    }

    #[test]
    fn flood_registers_on_fourth_exceedance() {
        let (det, out) = run(&[9000; 9]);
        let suppressed: Vec<u64> = out.iter().filter(|(_, o)| o.suppressed).map(|(i, _)| *i).collect();
        assert_eq!(suppressed, vec![1, 3, 5, 7]);
        assert_eq!(
            kinds(&out),
            vec![
                (0, EventKind::CooldownStarted),
                (2, EventKind::CooldownStarted),
                (4, EventKind::CooldownStarted),
                (6, EventKind::CooldownStarted),
                (6, EventKind::AbnormalRegistered),
                (6, EventKind::AttackConfirmed),
                (8, EventKind::CooldownStarted),
            ]
        );
        let registered = &out[6].1.events[1];
        assert_eq!(registered.counter, 4);
        assert_eq!(registered.timestamp, 7.0 * 180.0);
        assert_eq!(det.state().counter, 5);
    }

    #[test]
    fn counter_is_monotone_within_window() {
        let (_, out) = run(&[9000, 100, 9000, 100, 100, 9000, 100, 9000, 100, 9000]);
        let counters: Vec<u32> = out.iter().flat_map(|(_, o)| o.events.iter().map(|e| e.counter)).collect();
        assert!(counters.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn average_smooths_single_spike() {
        // 5000 then 7500: A = 6250 > 6000; 2000 then 7500: A = 4750.
        let (_, out) = run(&[5000, 7500]);
        assert_eq!(kinds(&out), vec![(1, EventKind::CooldownStarted)]);
        let (_, out) = run(&[2000, 7500]);
        assert!(kinds(&out).is_empty());
    }

    #[test]
    fn energy_cross_check() {
        let profile = default_profile("dev", DeviceStatus::Active);
        assert_eq!(cross_check_energy(Some(&energy(1.60, false)), &profile), EnergyCheck::Exceeded);
        assert_eq!(cross_check_energy(Some(&energy(1.42, false)), &profile), EnergyCheck::WithinThreshold);
        assert_eq!(cross_check_energy(Some(&energy(1.9, true)), &profile), EnergyCheck::DataGap);
        assert_eq!(cross_check_energy(None, &profile), EnergyCheck::DataGap);

        let (_, out) = run(&[9000; 7]);
        let registered = &out[6].1.events[1];
        let gap = confirm(registered, None, &profile);
        assert_eq!(gap.kind, EventKind::TrafficOnlyAnomaly);
        assert!(gap.note.is_some());
        let within = confirm(registered, Some(&energy(1.42, false)), &profile);
        assert_eq!(within.kind, EventKind::TrafficOnlyAnomaly);
        assert!(within.note.is_none());
    }

    #[test]
    fn window_classification() {
        let profile = default_profile("dev", DeviceStatus::Active);
        let cfg = SlotConfig::default();
        let classify = |counts: &[u64]| {
            let slots = counts.iter().enumerate().map(|(i, &c)| slot(i as u64, c)).collect();
            classify_window(&WindowSummary::new("dev", 0, &cfg, slots), &profile, Scope::Tcp).unwrap()
        };
        assert_eq!(classify(&[3500; 10]), Verdict::Normal);
        assert_eq!(classify(&[10500; 10]), Verdict::Abnormal);
        assert_eq!(classify(&[6000; 10]), Verdict::Normal);
        assert_eq!(classify(&[6001; 10]), Verdict::Abnormal);
    }

    #[test]
    fn normal_window_resets_counter_abnormal_keeps_it() {
        let profile = default_profile("dev", DeviceStatus::Active);
        let cfg = SlotConfig::default();

        let (mut det, _) = run(&[9000, 100, 100, 100, 100, 100, 100, 100, 100, 100]);
        assert_eq!(det.state().counter, 1);
        let verdict = det.finish_window(&profile, &cfg).unwrap().unwrap();
        assert_eq!(verdict.verdict, Some(Verdict::Normal));
        assert_eq!(det.state().counter, 0);

        let (mut det, _) = run(&[9000; 10]);
        let before = det.state().counter;
        let verdict = det.finish_window(&profile, &cfg).unwrap().unwrap();
        assert_eq!(verdict.verdict, Some(Verdict::Abnormal));
        assert_eq!(verdict.kind, EventKind::WindowVerdict);
        assert_eq!(verdict.timestamp, 1800.0);
        assert_eq!(det.state().counter, before);
        assert!(det.finish_window(&profile, &cfg).unwrap().is_none());
    }

    #[test]
    fn acknowledge_resets() {
        let (mut det, _) = run(&[9000; 7]);
        det.acknowledge();
        assert_eq!(det.state().counter, 0);
        assert_eq!(det.state().phase, Phase::Monitoring);
    }

    #[test]
    fn alert_line_format() {
        let (_, out) = run(&[9000; 7]);
        let line = out[6].1.events[2].alert_line();
        assert_eq!(line, "ALERT ATTACK_CONFIRMED device=dev scope=TCP A=9000 y=6000 energy=1.6000 t=1260");
        let mut gap = out[6].1.events[2].clone();
        gap.energy = None;
        assert!(gap.alert_line().contains("energy=na"));
    }
}
