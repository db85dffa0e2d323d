//! Detection of energy-consumption attacks on smart-home devices.
//!
//! Packets received by a device are counted per protocol in fixed slots.
//! When the running slot average exceeds the device's normal bound the device
//! stops listening for a cooldown; after more than three cooldowns it is
//! registered abnormal and its per-slot energy footprint decides whether the
//! attack is confirmed.
//!
//! The crate is organised by stage:
//!
//! - [`ingest`]: replay/simulated/live packet sources
//! - [`windowing`]: 5 s samples, 180 s slots, 10-slot windows
//! - [`energy`]: sensor parsing and per-slot Joule integration
//! - [`baseline`]: normal-behaviour profiles
//! - [`detector`] and [`alert`]: the cooldown-counter state machine and alert sinks
//! - [`store`]: append-only record file
//! - [`sim`]: seeded traffic and energy generator
//! - [`pipeline`], [`commands`], [`report`]: end-to-end workflows

pub mod alert;
pub mod baseline;
pub mod commands;
pub mod detector;
pub mod energy;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod sim;
pub mod store;
pub mod windowing;

pub use baseline::{default_profile, learn_baseline, BaselineProfile, DeviceStatus};
pub use detector::{DetectionEvent, DetectionState, DetectorConfig, EventKind};
pub use error::{Error, Result};
pub use ingest::{open_source, PacketEvent, SourceConfig, SourceKind};
pub use pipeline::{Pipeline, PipelineConfig, RunSummary};
pub use protocol::{PacketKind, Protocol, Scope};
pub use sim::{Regime, ScenarioConfig};
pub use store::{Label, Query, Record, RecordKind, Store};
pub use windowing::{SlotConfig, SlotMetrics};
