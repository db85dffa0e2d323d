//! Per-second sensor samples and their per-slot Joule footprint.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::to_virtual_time;

/// Sensor cadence, seconds.
pub const NOMINAL_SPACING_SECS: f64 = 1.0;
/// Gaps wider than this many nominal spacings flag the slot.
pub const GAP_TOLERANCE_SPACINGS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub timestamp: f64,
    pub voltage: Option<f64>,
    pub current: Option<f64>,
    pub power: f64,
}

impl EnergySample {
    pub fn new(timestamp: f64, voltage: f64, current: f64, power: f64) -> Self {
        EnergySample {
            timestamp,
            voltage: Some(voltage),
            current: Some(current),
            power,
        }
    }

    /// `|P - V*I| <= 0.1 P`; vacuously true when V or I is missing.
    pub fn is_consistent(&self) -> bool {
        match (self.voltage, self.current) {
            (Some(v), Some(i)) => (self.power - v * i).abs() <= 0.1 * self.power + 1e-12,
            _ => true,
        }
    }

    pub fn to_sensor_line(&self, time_compression: f64) -> String {
        let opt = |v: Option<f64>, digits: usize| v.map(|x| format!("{x:.digits$}")).unwrap_or_default();
        format!(
            "{:.6},{},{},{:.6}",
            self.timestamp / time_compression,
            opt(self.voltage, 4),
            opt(self.current, 6),
            self.power
        )
    }
}

/// Parses `timestamp,voltage,current,power`. An empty power field is rebuilt as V*I.
pub fn parse_sensor_line(line: &str, line_no: usize) -> Result<EnergySample> {
    parse_sensor_line_compressed(line, line_no, 1.0)
}

pub fn parse_sensor_line_compressed(line: &str, line_no: usize, time_compression: f64) -> Result<EnergySample> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::malformed(
            line_no,
            format!("expected 4 sensor fields, found {}", fields.len()),
        ));
    }
    let number = |idx: usize, name: &str| -> Result<Option<f64>> {
        if fields[idx].is_empty() {
            return Ok(None);
        }
        let v: f64 = fields[idx]
            .parse()
            .map_err(|_| Error::malformed(line_no, format!("bad {name} `{}`", fields[idx])))?;
        if !v.is_finite() {
            return Err(Error::malformed(line_no, format!("{name} is not finite")));
        }
        Ok(Some(v))
    };
    let timestamp = number(0, "timestamp")?
        .ok_or_else(|| Error::malformed(line_no, "missing timestamp"))?;
    if timestamp < 0.0 {
        return Err(Error::malformed(line_no, "negative timestamp"));
    }
    let voltage = number(1, "voltage")?;
    let current = number(2, "current")?;
    let power = match (number(3, "power")?, voltage, current) {
        (Some(p), _, _) => p,
        (None, Some(v), Some(i)) => v * i,
        (None, _, _) => {
            return Err(Error::malformed(line_no, "power missing and not reconstructible"));
        }
    };
    if power < 0.0 {
        return Err(Error::malformed(line_no, format!("negative power {power}")));
    }
    let sample = EnergySample {
        timestamp: to_virtual_time(timestamp, time_compression),
        voltage,
        current,
        power,
    };
    if !sample.is_consistent() {
        warn!("line {line_no}: power {power} W disagrees with V*I by more than 10%");
    }
    Ok(sample)
}

/// Reads a whole sensor dump. Comment lines start with `#`.
pub fn read_sensor_file(path: &Path, time_compression: f64) -> Result<Vec<EnergySample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples: Vec<EnergySample> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let sample = parse_sensor_line_compressed(trimmed, idx + 1, time_compression)?;
        if let Some(prev) = samples.last() {
            if sample.timestamp < prev.timestamp {
                return Err(Error::malformed(idx + 1, "sensor timestamp goes backwards"));
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_sensor<W: Write>(mut out: W, samples: &[EnergySample], time_compression: f64) -> std::io::Result<()> {
    writeln!(out, "# timestamp,voltage,current,power")?;
    for s in samples {
        writeln!(out, "{}", s.to_sensor_line(time_compression))?;
    }
    Ok(())
}

/// Energy footprint of one device over one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySlot {
    pub device_id: String,
    /// Global (epoch-aligned) slot number.
    pub slot_index: u64,
    pub slot_start: f64,
    pub joules: f64,
    /// Joules per one-second sample, i.e. mean power.
    pub mean_sample_joules: f64,
    pub normalized: f64,
    pub sample_count: usize,
    pub data_gap: bool,
}

/// Integrates power over the samples of one slot.
///
/// Each sample holds until the next one; the last holds for one nominal spacing.
pub fn integrate_slot(device_id: &str, samples: &[EnergySample], slot_start: f64, slot_length: f64) -> EnergySlot {
    integrate_slot_with_spacing(device_id, samples, slot_start, slot_length, NOMINAL_SPACING_SECS)
}

pub fn integrate_slot_with_spacing(
    device_id: &str,
    samples: &[EnergySample],
    slot_start: f64,
    slot_length: f64,
    spacing: f64,
) -> EnergySlot {
    let slot_index = (slot_start / slot_length).round() as u64;
    let gap_limit = GAP_TOLERANCE_SPACINGS * spacing;
    if samples.is_empty() {
        return EnergySlot {
            device_id: device_id.to_string(),
            slot_index,
            slot_start,
            joules: 0.0,
            mean_sample_joules: 0.0,
            normalized: 0.0,
            sample_count: 0,
            data_gap: true,
        };
    }
    let mut joules = 0.0;
    let mut data_gap = samples[0].timestamp - slot_start > gap_limit;
    for (i, s) in samples.iter().enumerate() {
        let dt = match samples.get(i + 1) {
            Some(next) => next.timestamp - s.timestamp,
            None => spacing,
        };
        if dt > gap_limit {
            data_gap = true;
        }
        joules += s.power * dt;
    }
    let last = samples[samples.len() - 1].timestamp;
    if slot_start + slot_length - last > gap_limit {
        data_gap = true;
    }
    EnergySlot {
        device_id: device_id.to_string(),
        slot_index,
        slot_start,
        joules: round_nanojoules(joules),
        mean_sample_joules: round_nanojoules(joules / samples.len() as f64),
        normalized: 0.0,
        sample_count: samples.len(),
        data_gap,
    }
}

// Sensor readings carry six decimals; rounding here keeps summation noise
// from pushing an exact threshold value over the line.
fn round_nanojoules(j: f64) -> f64 {
    (j * 1e9).round() / 1e9
}

/// Min-max normalization of an energy value, clamped to `[0, 1]`.
pub fn normalize_energy(e: f64, min_e: f64, max_e: f64) -> Result<f64> {
    if !(max_e > min_e) {
        return Err(Error::InvalidBaseline(format!(
            "max energy {max_e} must exceed min energy {min_e}"
        )));
    }
    Ok(((e - min_e) / (max_e - min_e)).clamp(0.0, 1.0))
}

/// Groups samples by epoch-aligned slot.
pub fn bucket_by_slot(samples: &[EnergySample], slot_secs: f64) -> BTreeMap<u64, Vec<EnergySample>> {
    let mut buckets: BTreeMap<u64, Vec<EnergySample>> = BTreeMap::new();
    for s in samples {
        let slot = (s.timestamp / slot_secs).floor().max(0.0) as u64;
        buckets.entry(slot).or_default().push(*s);
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sensor_lines() {
        let s = parse_sensor_line("10.0,5.1,0.6,3.06", 1).unwrap();
        assert_eq!(s.power, 3.06);
        assert_eq!(s.timestamp, 10.0);
        let s = parse_sensor_line("10.0,5.0,0.0,", 1).unwrap();
        assert_eq!(s.power, 0.0);
        let s = parse_sensor_line("1,5.0,0.5,", 1).unwrap();
        assert_eq!(s.power, 2.5);
    }

    #[test]
    fn rejects_bad_sensor_lines() {
        assert!(matches!(parse_sensor_line("10.0,5.1,0.6,-3", 4), Err(Error::Malformed { line: 4, .. })));
        assert!(parse_sensor_line("10.0,5.1,0.6", 1).is_err());
        assert!(parse_sensor_line("x,5.1,0.6,1", 1).is_err());
        assert!(parse_sensor_line("1,,,", 1).is_err());
    }

    #[test]
    fn constant_two_watts_for_three_minutes() {
        let samples: Vec<_> = (0..180).map(|t| EnergySample::new(t as f64, 5.0, 0.4, 2.0)).collect();
        let slot = integrate_slot("d", &samples, 0.0, 180.0);
        assert_eq!(slot.joules, 360.0);
        assert_eq!(slot.mean_sample_joules, 2.0);
        assert!(!slot.data_gap);
    }

    #[test]
    fn empty_slot_is_gap_flagged() {
        let slot = integrate_slot("d", &[], 180.0, 180.0);
        assert_eq!(slot.joules, 0.0);
        assert!(slot.data_gap);
        assert_eq!(slot.slot_index, 1);
    }

    #[test]
    fn long_hole_flags_gap() {
        let mut samples: Vec<_> = (0..60).map(|t| EnergySample::new(t as f64, 5.0, 0.2, 1.0)).collect();
        samples.extend((70..180).map(|t| EnergySample::new(t as f64, 5.0, 0.2, 1.0)));
        assert!(integrate_slot("d", &samples, 0.0, 180.0).data_gap);
        let truncated: Vec<_> = (0..100).map(|t| EnergySample::new(t as f64, 5.0, 0.2, 1.0)).collect();
        assert!(integrate_slot("d", &truncated, 0.0, 180.0).data_gap);
    }

    #[test]
    fn normalize_energy_cases() {
        assert_eq!(normalize_energy(1.0, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(normalize_energy(2.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(normalize_energy(1.5, 1.0, 2.0).unwrap(), 0.5);
        assert!(normalize_energy(1.5, 2.0, 2.0).is_err());
    }

    #[test]
    fn sensor_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let samples: Vec<_> = (0..5).map(|t| EnergySample::new(t as f64, 5.1, 0.25, 1.275)).collect();
        write_sensor(File::create(&path).unwrap(), &samples, 1.0).unwrap();
        assert_eq!(read_sensor_file(&path, 1.0).unwrap(), samples);
    }
}
