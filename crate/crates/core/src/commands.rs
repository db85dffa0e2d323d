//! The learn / replay / monitor / simulate / report workflows behind the CLI.

use std::path::{Path, PathBuf};

use log::info;

use crate::alert::AlertSink;
use crate::baseline::{default_profile, learn_baseline, BaselineProfile, DeviceStatus, DEFAULT_MARGIN};
use crate::detector::DetectorConfig;
use crate::energy::{bucket_by_slot, integrate_slot, read_sensor_file, EnergySample};
use crate::error::{Error, Result};
use crate::ingest::{open_source, PacketEvent, SourceConfig};
use crate::pipeline::{Pipeline, PipelineConfig, RunSummary};
use crate::protocol::Scope;
use crate::report::{write_report, ReportOutput};
use crate::sim::{read_labels, run_scenario, ScenarioConfig, ScenarioFiles};
use crate::store::{Label, Record, RecordKind, Store};
use crate::windowing::{SlotAccumulator, SlotConfig, DEFAULT_SLOT_SECS, DEFAULT_WINDOW_SLOTS};

/// Overrides shared by every command. Defaults are the published values.
#[derive(Debug, Clone, PartialEq)]
pub struct Overrides {
    pub slot_secs: f64,
    pub window_slots: usize,
    pub counter_limit: u32,
    pub energy_threshold: Option<f64>,
    pub scopes: Vec<Scope>,
    pub time_compression: f64,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            slot_secs: DEFAULT_SLOT_SECS,
            window_slots: DEFAULT_WINDOW_SLOTS,
            counter_limit: DetectorConfig::default().counter_limit,
            energy_threshold: None,
            scopes: Scope::ALL.to_vec(),
            time_compression: 1.0,
        }
    }
}

impl Overrides {
    pub fn slot_config(&self) -> SlotConfig {
        SlotConfig {
            window_slots: self.window_slots,
            ..SlotConfig::with_slot_secs(self.slot_secs)
        }
    }

    pub fn pipeline_config(&self, run_id: String) -> PipelineConfig {
        PipelineConfig {
            slot: self.slot_config(),
            detector: DetectorConfig {
                counter_limit: self.counter_limit,
                cooldown_secs: self.slot_secs,
            },
            scopes: self.scopes.clone(),
            run_id,
        }
    }

    fn apply(&self, mut profile: BaselineProfile) -> BaselineProfile {
        if let Some(t) = self.energy_threshold {
            profile.energy_threshold = t;
        }
        profile
    }
}

#[derive(Debug, Clone)]
pub struct LearnOptions {
    pub replay: PathBuf,
    pub sensor: Option<PathBuf>,
    pub profile_out: PathBuf,
    pub store: Option<PathBuf>,
    pub device: Option<String>,
    pub status: DeviceStatus,
    pub margin: f64,
    pub overrides: Overrides,
}

impl LearnOptions {
    pub fn new(replay: impl Into<PathBuf>, profile_out: impl Into<PathBuf>) -> Self {
        LearnOptions {
            replay: replay.into(),
            sensor: None,
            profile_out: profile_out.into(),
            store: None,
            device: None,
            status: DeviceStatus::Active,
            margin: DEFAULT_MARGIN,
            overrides: Overrides::default(),
        }
    }
}

fn read_events(replay: &Path, device: Option<&str>, time_compression: f64) -> Result<Vec<PacketEvent>> {
    let mut source = SourceConfig::replay(replay).with_time_compression(time_compression);
    if let Some(d) = device {
        source = source.with_device_filter(vec![d.to_string()]);
    }
    open_source(&source)?.collect()
}

fn single_device(events: &[PacketEvent], requested: Option<&str>) -> Result<Option<String>> {
    if let Some(d) = requested {
        return Ok(Some(d.to_string()));
    }
    let mut devices: Vec<&str> = events.iter().map(|e| e.device_id.as_str()).collect();
    devices.sort_unstable();
    devices.dedup();
    match devices.as_slice() {
        [] => Ok(None),
        [one] => Ok(Some(one.to_string())),
        many => Err(Error::Config(format!(
            "input holds {} devices; choose one with --device",
            many.len()
        ))),
    }
}

/// Learns a profile from attack-free replay (and optional sensor) data and writes it.
pub fn cmd_learn(opts: &LearnOptions) -> Result<BaselineProfile> {
    let oc = &opts.overrides;
    let events = read_events(&opts.replay, opts.device.as_deref(), oc.time_compression)?;
    let device = single_device(&events, opts.device.as_deref())?
        .ok_or_else(|| Error::InsufficientData(format!("{} holds no packets", opts.replay.display())))?;
    let energy: Option<Vec<EnergySample>> = opts
        .sensor
        .as_deref()
        .map(|p| read_sensor_file(p, oc.time_compression))
        .transpose()?;

    let slot_config = oc.slot_config();
    let scratch = default_profile(&device, opts.status);
    let mut acc = SlotAccumulator::new(&device, slot_config)?;
    let mut slots = Vec::new();
    for e in &events {
        slots.extend(acc.accumulate(e, &scratch)?);
    }
    if let Some(last) = energy.as_ref().and_then(|s| s.last()) {
        slots.extend(acc.advance_to(last.timestamp, &scratch));
    }
    slots.push(acc.close_slot(&scratch));

    let energy_slots: Vec<_> = match &energy {
        Some(samples) => {
            let buckets = bucket_by_slot(samples, slot_config.slot_secs);
            slots
                .iter()
                .map(|s| {
                    let global = s.global_slot(slot_config.window_slots);
                    let bucket = buckets.get(&global).map(Vec::as_slice).unwrap_or(&[]);
                    integrate_slot(&device, bucket, s.slot_start, s.slot_length)
                })
                .collect()
        }
        None => Vec::new(),
    };

    let profile = oc.apply(learn_baseline(&slots, &energy_slots, opts.status, opts.margin)?);
    profile.save(&opts.profile_out)?;
    if let Some(path) = &opts.store {
        let mut store = Store::open(path)?;
        let run_id = store.next_run_id();
        store.append(Record::new(
            RecordKind::Baseline,
            &device,
            profile.learned_at,
            Label::Normal,
            &run_id,
            &profile,
        )?)?;
        store.sync()?;
    }
    info!("learned profile for {device} from {} slots", slots.len());
    Ok(profile)
}

/// Human-readable band table for a profile.
pub fn describe_profile(profile: &BaselineProfile) -> String {
    let mut out = format!(
        "profile for {} ({:?}, {:?})\n",
        profile.device_id, profile.status, profile.source
    );
    for (scope, band) in &profile.bands {
        out.push_str(&format!(
            "  {:<10} band [{}, {}]  y = {}{}\n",
            scope.as_str(),
            band.min_pkt,
            band.max_pkt,
            band.normal_upper,
            if band.learned { "" } else { "  (default)" }
        ));
    }
    out.push_str(&format!("  energy threshold {} J per sample\n", profile.energy_threshold));
    out
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub replay: PathBuf,
    pub sensor: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// `None` uses the default bands.
    pub profile: Option<PathBuf>,
    /// `None` keeps records in memory only.
    pub store: Option<PathBuf>,
    /// Device the sensor file belongs to; inferred when the replay holds one device.
    pub device: Option<String>,
    pub overrides: Overrides,
}

impl ReplayOptions {
    pub fn new(replay: impl Into<PathBuf>) -> Self {
        ReplayOptions {
            replay: replay.into(),
            sensor: None,
            labels: None,
            profile: None,
            store: None,
            device: None,
            overrides: Overrides::default(),
        }
    }
}

fn load_profile(path: Option<&Path>, overrides: &Overrides) -> Result<BaselineProfile> {
    let profile = match path {
        Some(p) if !p.exists() => {
            return Err(Error::Config(format!(
                "profile {} not found; run `joulewatch learn` first or omit --profile to use the default bands",
                p.display()
            )));
        }
        Some(p) => BaselineProfile::load(p)?,
        None => default_profile("*", DeviceStatus::Active),
    };
    Ok(overrides.apply(profile))
}

fn open_store(path: Option<&Path>) -> Result<Store> {
    match path {
        Some(p) => Store::open(p),
        None => Ok(Store::in_memory()),
    }
}

/// Runs the full pipeline over recorded traffic. See [`RunSummary::exit_code`].
pub fn cmd_replay(opts: &ReplayOptions, sinks: Vec<Box<dyn AlertSink>>) -> Result<RunSummary> {
    let oc = &opts.overrides;
    let profile = load_profile(opts.profile.as_deref(), oc)?;
    let events = read_events(&opts.replay, None, oc.time_compression)?;
    let mut store = open_store(opts.store.as_deref())?;
    let run_id = store.next_run_id();
    let mut pipeline = Pipeline::new(oc.pipeline_config(run_id), profile, &mut store)?;
    for sink in sinks {
        pipeline.add_sink(sink);
    }
    if let Some(sensor) = &opts.sensor {
        let samples = read_sensor_file(sensor, oc.time_compression)?;
        if let Some(device) = single_device(&events, opts.device.as_deref())? {
            pipeline.set_energy(&device, samples);
        }
    }
    if let Some(labels) = &opts.labels {
        pipeline.set_truth(read_labels(labels)?);
    }
    pipeline.run(events.into_iter().map(Ok))?;
    pipeline.finish(None)
}

/// Like replay, but reads events from a live source as they arrive.
pub fn cmd_monitor(
    source: &SourceConfig,
    opts: &ReplayOptions,
    sinks: Vec<Box<dyn AlertSink>>,
) -> Result<RunSummary> {
    let oc = &opts.overrides;
    let profile = load_profile(opts.profile.as_deref(), oc)?;
    let mut store = open_store(opts.store.as_deref())?;
    let run_id = store.next_run_id();
    let mut pipeline = Pipeline::new(oc.pipeline_config(run_id), profile, &mut store)?;
    for sink in sinks {
        pipeline.add_sink(sink);
    }
    if let (Some(sensor), Some(device)) = (&opts.sensor, &opts.device) {
        pipeline.set_energy(device, read_sensor_file(sensor, oc.time_compression)?);
    }
    pipeline.run(open_source(source)?)?;
    pipeline.finish(None)
}

pub fn cmd_simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioFiles> {
    run_scenario(config, out_dir)
}

pub fn cmd_report(store_path: &Path, run_id: Option<&str>, out_dir: &Path) -> Result<ReportOutput> {
    let store = if store_path.exists() {
        Store::open_read_only(store_path)?
    } else {
        Store::in_memory()
    };
    write_report(&store, run_id, out_dir)
}
