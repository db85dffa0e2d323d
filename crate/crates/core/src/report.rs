//! Figure data and band-occupancy summaries from a stored run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::baseline::BaselineProfile;
use crate::detector::{DetectionEvent, EventKind};
use crate::energy::EnergySlot;
use crate::error::{Error, Result};
use crate::pipeline::SlotRecord;
use crate::protocol::Scope;
use crate::store::{Query, RecordKind, Store};

#[derive(Debug, Clone, Default)]
pub struct ReportOutput {
    pub run_id: Option<String>,
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
}

pub const SUMMARY_FILE: &str = "summary.txt";
pub const ENERGY_SERIES_FILE: &str = "series_energy.csv";

pub fn series_file_name(scope: Scope) -> String {
    format!("series_{}.csv", scope.as_str().to_ascii_lowercase())
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes per-scope slot series, the energy series and `summary.txt` for one run
/// (the latest run when `run_id` is `None`).
pub fn write_report(store: &Store, run_id: Option<&str>, out_dir: &Path) -> Result<ReportOutput> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut output = ReportOutput::default();
    let run = match run_id {
        Some(r) => Some(r.to_string()),
        None => store.run_ids().pop(),
    };
    let Some(run) = run else {
        let msg = "store holds no runs; report is empty".to_string();
        warn!("{msg}");
        output.warnings.push(msg.clone());
        output.summary = format!("{msg}\n");
        write(out_dir.join(SUMMARY_FILE), &output.summary, &mut output.files)?;
        return Ok(output);
    };

    let slots: Vec<SlotRecord> = store
        .query(&Query::new(RecordKind::Slot).run(&run))?
        .iter()
        .map(|r| r.decode())
        .collect::<Result<_>>()?;
    let energy: Vec<EnergySlot> = store
        .query(&Query::new(RecordKind::Energy).run(&run))?
        .iter()
        .map(|r| r.decode())
        .collect::<Result<_>>()?;
    let events: Vec<DetectionEvent> = store
        .query(&Query::new(RecordKind::Event).run(&run))?
        .iter()
        .map(|r| r.decode())
        .collect::<Result<_>>()?;
    let profiles: BTreeMap<String, BaselineProfile> = store
        .query(&Query::new(RecordKind::Baseline).run(&run))?
        .iter()
        .map(|r| r.decode::<BaselineProfile>().map(|p| (r.device_id.clone(), p)))
        .collect::<Result<_>>()?;
    if slots.is_empty() {
        output.warnings.push(format!("run {run} has no slot records"));
    }

    let cooldowns: BTreeSet<(String, Scope, u64, usize)> = events
        .iter()
        .filter(|e| e.kind == EventKind::CooldownStarted)
        .map(|e| (e.device_id.clone(), e.scope, e.window_index, e.slot_index))
        .collect();
    let energy_by_slot: BTreeMap<(String, u64), &EnergySlot> = energy
        .iter()
        .map(|e| ((e.device_id.clone(), e.slot_index), e))
        .collect();

    for scope in Scope::ALL {
        let mut csv = String::from(
            "device_id,window_index,slot_index,slot_start,count,normalized,mean_sample_joules,verdict,truth\n",
        );
        for rec in &slots {
            let m = &rec.metrics;
            let verdict = if rec.suppressed.contains(&scope) {
                "SUPPRESSED"
            } else if cooldowns.contains(&(m.device_id.clone(), scope, m.window_index, m.slot_index)) {
                "ABNORMAL"
            } else {
                "NORMAL"
            };
            let global = rec.global_slot;
            let joules = energy_by_slot
                .get(&(m.device_id.clone(), global))
                .filter(|e| !e.data_gap)
                .map(|e| format!("{:.6}", e.mean_sample_joules))
                .unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{:.6},{},{},{}",
                m.device_id,
                m.window_index,
                m.slot_index,
                m.slot_start,
                m.count(scope),
                m.normalized.get(&scope).copied().unwrap_or(0.0),
                joules,
                verdict,
                rec.truth.map(|t| t.as_str()).unwrap_or("")
            );
        }
        write(out_dir.join(series_file_name(scope)), &csv, &mut output.files)?;
    }

    let mut csv = String::from("device_id,slot_index,slot_start,joules,mean_sample_joules,normalized,data_gap\n");
    for e in &energy {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            e.device_id, e.slot_index, e.slot_start, e.joules, e.mean_sample_joules, e.normalized, e.data_gap
        );
    }
    write(out_dir.join(ENERGY_SERIES_FILE), &csv, &mut output.files)?;

    output.summary = summarize(&run, &slots, &energy, &events, &profiles);
    write(out_dir.join(SUMMARY_FILE), &output.summary, &mut output.files)?;
    output.run_id = Some(run);
    Ok(output)
}

fn summarize(
    run: &str,
    slots: &[SlotRecord],
    energy: &[EnergySlot],
    events: &[DetectionEvent],
    profiles: &BTreeMap<String, BaselineProfile>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {run}: {} slot records, {} energy slots", slots.len(), energy.len());
    let _ = writeln!(out);
    let w = profiles.keys().map(String::len).max().unwrap_or(0).max(10);
    let _ = writeln!(
        out,
        "{:<w$} {:<10} {:>12} {:>8} {:>8} {:>8} {:>10}",
        "device", "scope", "band", "below", "normal", "above", "max count"
    );
    for (device, profile) in profiles {
        for scope in Scope::ALL {
            let Some(band) = profile.band(scope) else { continue };
            let counts: Vec<u64> = slots
                .iter()
                .filter(|s| &s.metrics.device_id == device)
                .map(|s| s.metrics.count(scope))
                .collect();
            let below = counts.iter().filter(|&&c| c < band.min_pkt).count();
            let above = counts.iter().filter(|&&c| c > band.normal_upper).count();
            let normal = counts.len() - below - above;
            let _ = writeln!(
                out,
                "{:<w$} {:<10} {:>12} {:>8} {:>8} {:>8} {:>10}",
                device,
                scope.as_str(),
                format!("{}-{}", band.min_pkt, band.normal_upper),
                below,
                normal,
                above,
                counts.iter().max().copied().unwrap_or(0)
            );
        }
        let mine: Vec<&EnergySlot> = energy.iter().filter(|e| &e.device_id == device).collect();
        let gaps = mine.iter().filter(|e| e.data_gap).count();
        let high = mine
            .iter()
            .filter(|e| !e.data_gap && e.mean_sample_joules > profile.energy_threshold)
            .count();
        let _ = writeln!(
            out,
            "{:<w$} {:<10} {:>12} {:>8} {:>8} {:>8}",
            device,
            "ENERGY",
            format!("<={}J", profile.energy_threshold),
            "-",
            mine.len() - gaps - high,
            high
        );
        if gaps > 0 {
            let _ = writeln!(out, "{device}: {gaps} energy slots flagged with data gaps");
        }
    }
    let _ = writeln!(out);
    for kind in [
        EventKind::CooldownStarted,
        EventKind::AbnormalRegistered,
        EventKind::AttackConfirmed,
        EventKind::TrafficOnlyAnomaly,
        EventKind::WindowVerdict,
    ] {
        let n = events.iter().filter(|e| e.kind == kind).count();
        let _ = writeln!(out, "{:<22} {n}", kind.as_str());
    }
    out
}
