//! Seeded traffic and energy generator.
//!
//! Per-slot counts are drawn uniformly inside the observed normal and attack
//! bands. Events are spread evenly across the slot with jitter, and a
//! per-second power trace is derived from the packet load.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{write_sensor, EnergySample};
use crate::error::{Error, Result};
use crate::ingest::{write_replay, PacketEvent};
use crate::protocol::{PacketKind, Protocol};
use crate::store::Label;
use crate::windowing::DEFAULT_SLOT_SECS;

pub const DEFAULT_DURATION_SECS: f64 = 1800.0;
pub const DEFAULT_DEVICE: &str = "rpi-0";

/// Inclusive per-slot count range.
pub type CountBand = (u64, u64);

pub const TCP_NORMAL: CountBand = (2000, 5000);
pub const UDP_NORMAL: CountBand = (1000, 3000);
pub const MQTT_NORMAL: CountBand = (2000, 5999);
pub const AGGREGATE_NORMAL: CountBand = (1500, 6000);
pub const TCP_ATTACK: CountBand = (6500, 12000);
pub const UDP_ATTACK: CountBand = (9000, 12500);
pub const MQTT_ATTACK: CountBand = (8000, 12000);
pub const AGGREGATE_ATTACK: CountBand = (7000, 12500);

/// Events keep this distance (seconds) from slot edges so that compressed
/// timestamps never cross a boundary when mapped back.
const EDGE_MARGIN_SECS: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Normal,
    Attack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub regime: Regime,
    /// Virtual time at which the regime takes effect.
    pub onset: f64,
}

impl RegimeSpec {
    pub fn attack_from(onset: f64) -> Self {
        RegimeSpec {
            regime: Regime::Attack,
            onset,
        }
    }
}

/// Power draw as a function of packet load.
///
/// The defaults put the boundary between the top of the normal bands
/// (6000 packets per slot, 33.3 pkt/s) and the lowest attack floor (6500,
/// 36.1 pkt/s) on either side of 1.42 J per sample:
/// `1.0 + 0.012 * 33.33 * 1.02 = 1.408` and `1.0 + 0.012 * 36.11 * 0.98 = 1.4247`.
/// `examples/calibrate_energy.rs` recomputes these margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub idle_watts: f64,
    pub per_packet_joules: f64,
    /// Relative amplitude of uniform noise on the packet-driven term.
    pub noise: f64,
    pub supply_volts: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            idle_watts: 1.0,
            per_packet_joules: 0.012,
            noise: 0.02,
            supply_volts: 5.1,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.idle_watts, self.per_packet_joules, self.noise]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
            && self.supply_volts > 0.0;
        if !ok {
            return Err(Error::Config("energy model parameters must be non-negative".into()));
        }
        Ok(())
    }

    /// Mean per-sample energy bounds for a slot carrying `count` packets.
    pub fn mean_sample_joules_bounds(&self, count: u64, slot_secs: f64) -> (f64, f64) {
        let load = self.per_packet_joules * count as f64 / slot_secs;
        (
            self.idle_watts + load * (1.0 - self.noise),
            self.idle_watts + load * (1.0 + self.noise),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub device_id: String,
    pub duration: f64,
    pub slot_length: f64,
    /// Protocol shares during normal slots. Keys are TCP, UDP, MQTT_SUB, OTHER.
    pub mix: BTreeMap<Protocol, f64>,
    /// Protocol shares during attack slots; `None` reuses `mix`.
    pub attack_mix: Option<BTreeMap<Protocol, f64>>,
    /// Protocols absent from this map stay normal.
    pub regimes: BTreeMap<Protocol, RegimeSpec>,
    pub time_compression: f64,
    pub energy_model: EnergyModel,
    /// Adds TCP acks/retransmissions and MQTT publishes that never reach detection counts.
    pub diagnostic_traffic: bool,
}

impl ScenarioConfig {
    /// Thirty minutes of one protocol, attacked from t=0 when `regime` is `Attack`.
    pub fn single(protocol: Protocol, regime: Regime, seed: u64) -> Self {
        let mut regimes = BTreeMap::new();
        if regime == Regime::Attack {
            regimes.insert(protocol, RegimeSpec::attack_from(0.0));
        }
        ScenarioConfig {
            seed,
            device_id: DEFAULT_DEVICE.to_string(),
            duration: DEFAULT_DURATION_SECS,
            slot_length: DEFAULT_SLOT_SECS,
            mix: BTreeMap::from([(protocol, 1.0)]),
            attack_mix: None,
            regimes,
            time_compression: 1.0,
            energy_model: EnergyModel::default(),
            diagnostic_traffic: true,
        }
    }

    /// Normal household mix: TCP 45%, UDP 30%, MQTT 20%, other 5%.
    pub fn mixed(regime: Regime, seed: u64) -> Self {
        let mix = BTreeMap::from([
            (Protocol::Tcp, 0.45),
            (Protocol::Udp, 0.30),
            (Protocol::MqttSub, 0.20),
            (Protocol::Other, 0.05),
        ]);
        let attack_mix = BTreeMap::from([
            (Protocol::Tcp, 0.40),
            (Protocol::MqttSub, 0.40),
            (Protocol::Udp, 0.20),
        ]);
        let mut regimes = BTreeMap::new();
        if regime == Regime::Attack {
            for p in [Protocol::Tcp, Protocol::Udp, Protocol::MqttSub] {
                regimes.insert(p, RegimeSpec::attack_from(0.0));
            }
        }
        ScenarioConfig {
            mix,
            attack_mix: Some(attack_mix),
            regimes,
            ..ScenarioConfig::single(Protocol::Tcp, Regime::Normal, seed)
        }
    }

    /// Parses `<tcp|udp|mqtt|mix>:<normal|attack>[:seed[:duration]]`.
    pub fn from_descriptor(descriptor: &str) -> Result<Self> {
        let parts: Vec<&str> = descriptor.split(':').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 4 {
            return Err(Error::Config(format!(
                "scenario descriptor `{descriptor}` must be <protocol>:<regime>[:seed[:duration]]"
            )));
        }
        let regime = match parts[1].to_ascii_lowercase().as_str() {
            "normal" => Regime::Normal,
            "attack" => Regime::Attack,
            other => return Err(Error::Config(format!("unknown regime `{other}`"))),
        };
        let seed = match parts.get(2) {
            Some(s) => s.parse().map_err(|_| Error::Config(format!("bad seed `{s}`")))?,
            None => 0,
        };
        let mut config = match parts[0].to_ascii_lowercase().as_str() {
            "mix" | "mixed" | "aggregate" => ScenarioConfig::mixed(regime, seed),
            p => ScenarioConfig::single(parse_sim_protocol(p)?, regime, seed),
        };
        if let Some(d) = parts.get(3) {
            config.duration = d.parse().map_err(|_| Error::Config(format!("bad duration `{d}`")))?;
        }
        Ok(config)
    }

    pub fn slot_count(&self) -> u64 {
        (self.duration / self.slot_length).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.slot_length > 0.0) {
            return Err(Error::Config("duration and slot length must be positive".into()));
        }
        if !(self.time_compression > 0.0 && self.time_compression.is_finite()) {
            return Err(Error::Config("time compression must be positive".into()));
        }
        validate_mix(&self.mix)?;
        if let Some(m) = &self.attack_mix {
            validate_mix(m)?;
        }
        self.energy_model.validate()
    }

    fn slot_regime(&self, slot_start: f64) -> Regime {
        let attacked = self.regimes.iter().any(|(p, spec)| {
            spec.regime == Regime::Attack && spec.onset <= slot_start && self.mix.get(p).is_some_and(|f| *f > 0.0)
        });
        if attacked {
            Regime::Attack
        } else {
            Regime::Normal
        }
    }

    /// Generates the scenario in memory.
    pub fn generate(&self) -> Result<ScenarioOutput> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut events = Vec::new();
        let mut labels = Vec::new();
        for slot in 0..self.slot_count() {
            let start = slot as f64 * self.slot_length;
            let end = (start + self.slot_length).min(self.duration);
            let regime = self.slot_regime(start);
            let mix = match (regime, &self.attack_mix) {
                (Regime::Attack, Some(m)) => m,
                _ => &self.mix,
            };
            let counts = draw_slot_counts(&mut rng, mix, regime)?;
            let mut slot_events = Vec::new();
            for (&protocol, &n) in &counts {
                spread(&mut rng, &self.device_id, protocol, PacketKind::Received, n, start, end, &mut slot_events);
                if self.diagnostic_traffic {
                    add_diagnostic_traffic(&mut rng, &self.device_id, protocol, n, start, end, &mut slot_events);
                }
            }
            slot_events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            events.extend(slot_events);
            let label = match regime {
                Regime::Normal => Label::Normal,
                Regime::Attack => Label::Abnormal,
            };
            labels.push((slot, label));
        }
        let energy = gen_energy(&events, &self.energy_model, self.seed, self.duration)?;
        Ok(ScenarioOutput { events, energy, labels })
    }
}

fn parse_sim_protocol(token: &str) -> Result<Protocol> {
    match token.to_ascii_lowercase().as_str() {
        "tcp" => Ok(Protocol::Tcp),
        "udp" => Ok(Protocol::Udp),
        "mqtt" | "mqtt_sub" => Ok(Protocol::MqttSub),
        other => Err(Error::Config(format!("cannot simulate protocol `{other}`"))),
    }
}

fn validate_mix(mix: &BTreeMap<Protocol, f64>) -> Result<()> {
    if mix.contains_key(&Protocol::MqttPub) {
        return Err(Error::Config("MQTT_PUB is not a mix component; use MQTT_SUB".into()));
    }
    if mix.values().any(|f| !(*f >= 0.0)) {
        return Err(Error::Config("mix fractions must be non-negative".into()));
    }
    let sum: f64 = mix.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("mix fractions sum to {sum}, expected 1")));
    }
    if !mix.iter().any(|(p, f)| *p != Protocol::Other && *f > 0.0) {
        return Err(Error::Config("mix has no detection-counted protocol".into()));
    }
    Ok(())
}

pub fn normal_band(protocol: Protocol) -> Result<CountBand> {
    match protocol {
        Protocol::Tcp => Ok(TCP_NORMAL),
        Protocol::Udp => Ok(UDP_NORMAL),
        Protocol::MqttSub => Ok(MQTT_NORMAL),
        p => Err(Error::Config(format!("no traffic band for {p}"))),
    }
}

pub fn attack_band(protocol: Protocol) -> Result<CountBand> {
    match protocol {
        Protocol::Tcp => Ok(TCP_ATTACK),
        Protocol::Udp => Ok(UDP_ATTACK),
        Protocol::MqttSub => Ok(MQTT_ATTACK),
        p => Err(Error::Config(format!("no traffic band for {p}"))),
    }
}

/// Per-protocol counted events for one slot (plus OTHER filler for mixes).
fn draw_slot_counts(
    rng: &mut ChaCha8Rng,
    mix: &BTreeMap<Protocol, f64>,
    regime: Regime,
) -> Result<BTreeMap<Protocol, u64>> {
    let counted: Vec<(Protocol, f64)> = mix
        .iter()
        .filter(|(p, f)| **p != Protocol::Other && **f > 0.0)
        .map(|(p, f)| (*p, *f))
        .collect();
    if let [(protocol, _)] = counted.as_slice() {
        let (lo, hi) = match regime {
            Regime::Normal => normal_band(*protocol)?,
            Regime::Attack => attack_band(*protocol)?,
        };
        let mut out = BTreeMap::from([(*protocol, rng.gen_range(lo..=hi))]);
        add_other_share(mix, &mut out);
        return Ok(out);
    }
    let (lo, hi) = match regime {
        Regime::Normal => AGGREGATE_NORMAL,
        Regime::Attack => AGGREGATE_ATTACK,
    };
    let total = rng.gen_range(lo..=hi);
    let mut out = apportion(total, &counted);
    add_other_share(mix, &mut out);
    Ok(out)
}

fn add_other_share(mix: &BTreeMap<Protocol, f64>, counts: &mut BTreeMap<Protocol, u64>) {
    let other = mix.get(&Protocol::Other).copied().unwrap_or(0.0);
    if other > 0.0 && other < 1.0 {
        let counted: u64 = counts.values().sum();
        counts.insert(Protocol::Other, (counted as f64 * other / (1.0 - other)).round() as u64);
    }
}

/// Largest-remainder split of `total` by (renormalized) fractions.
pub fn apportion(total: u64, shares: &[(Protocol, f64)]) -> BTreeMap<Protocol, u64> {
    let sum: f64 = shares.iter().map(|(_, f)| f).sum();
    let mut parts: Vec<(Protocol, u64, f64)> = shares
        .iter()
        .map(|(p, f)| {
            let exact = total as f64 * f / sum;
            (*p, exact.floor() as u64, exact - exact.floor())
        })
        .collect();
    let assigned: u64 = parts.iter().map(|p| p.1).sum();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[b].2.total_cmp(&parts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take((total - assigned) as usize) {
        parts[i].1 += 1;
    }
    parts.into_iter().map(|(p, n, _)| (p, n)).collect()
}

fn packet_size(protocol: Protocol, kind: PacketKind) -> u32 {
    match (protocol, kind) {
        (Protocol::Tcp, PacketKind::Received) => 512,
        (Protocol::Tcp, _) => 60,
        (Protocol::Udp, _) => 256,
        (Protocol::MqttSub, _) | (Protocol::MqttPub, _) => 128,
        (Protocol::Other, _) => 90,
    }
}

#[allow(clippy::too_many_arguments)]
fn spread(
    rng: &mut ChaCha8Rng,
    device_id: &str,
    protocol: Protocol,
    kind: PacketKind,
    n: u64,
    start: f64,
    end: f64,
    out: &mut Vec<PacketEvent>,
) {
    if n == 0 {
        return;
    }
    let lo = start + EDGE_MARGIN_SECS;
    let step = (end - start - 2.0 * EDGE_MARGIN_SECS) / n as f64;
    for i in 0..n {
        let jitter: f64 = rng.gen();
        let t = lo + (i as f64 + jitter) * step;
        let t = (t * 1e6).floor() / 1e6;
        out.push(PacketEvent {
            timestamp: t,
            device_id: device_id.to_string(),
            protocol,
            kind,
            size: packet_size(protocol, kind),
        });
    }
}

fn add_diagnostic_traffic(
    rng: &mut ChaCha8Rng,
    device_id: &str,
    protocol: Protocol,
    n: u64,
    start: f64,
    end: f64,
    out: &mut Vec<PacketEvent>,
) {
    let share = |f: f64| (n as f64 * f).round() as u64;
    match protocol {
        Protocol::Tcp => {
            spread(rng, device_id, Protocol::Tcp, PacketKind::Acknowledged, share(0.10), start, end, out);
            spread(rng, device_id, Protocol::Tcp, PacketKind::Retransmission, share(0.02), start, end, out);
        }
        Protocol::MqttSub => {
            spread(rng, device_id, Protocol::MqttPub, PacketKind::Received, share(0.10), start, end, out);
        }
        _ => {}
    }
}

fn single_protocol_events(protocol: Protocol, regime: Regime, seed: u64, duration: f64) -> Result<Vec<PacketEvent>> {
    parse_sim_protocol(match protocol {
        Protocol::Tcp => "tcp",
        Protocol::Udp => "udp",
        Protocol::MqttSub => "mqtt",
        other => other.as_str(),
    })?;
    let config = ScenarioConfig {
        duration,
        diagnostic_traffic: false,
        ..ScenarioConfig::single(protocol, regime, seed)
    };
    Ok(config.generate()?.events)
}

/// Attack-free traffic for one protocol: TCP, UDP or MQTT_SUB.
pub fn gen_normal_traffic(protocol: Protocol, seed: u64, duration: f64) -> Result<Vec<PacketEvent>> {
    single_protocol_events(protocol, Regime::Normal, seed, duration)
}

/// Flood traffic for one protocol, attacked from t=0.
pub fn gen_attack_traffic(protocol: Protocol, seed: u64, duration: f64) -> Result<Vec<PacketEvent>> {
    single_protocol_events(protocol, Regime::Attack, seed, duration)
}

/// One sample per second over `[0, duration)`:
/// `power = idle + per_packet_joules * packets_that_second * (1 + noise)`.
pub fn gen_energy(trace: &[PacketEvent], model: &EnergyModel, seed: u64, duration: f64) -> Result<Vec<EnergySample>> {
    model.validate()?;
    let seconds = duration.ceil().max(0.0) as usize;
    let mut per_second = vec![0u64; seconds];
    for e in trace.iter().filter(|e| e.is_detection_counted()) {
        let s = e.timestamp.floor() as usize;
        if s < seconds {
            per_second[s] += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_E4E6_0000_0001);
    let quantize = |v: f64| (v * 1e6).round() / 1e6;
    Ok(per_second
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            let noise = if model.noise > 0.0 {
                rng.gen_range(-model.noise..=model.noise)
            } else {
                0.0
            };
            let power = quantize(model.idle_watts + model.per_packet_joules * n as f64 * (1.0 + noise));
            EnergySample::new(t as f64, model.supply_volts, quantize(power / model.supply_volts), power)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub events: Vec<PacketEvent>,
    pub energy: Vec<EnergySample>,
    /// Ground truth per global slot.
    pub labels: Vec<(u64, Label)>,
}

#[derive(Debug, Clone)]
pub struct ScenarioFiles {
    pub replay: PathBuf,
    pub sensor: PathBuf,
    pub labels: PathBuf,
}

pub const REPLAY_FILE: &str = "traffic.csv";
pub const SENSOR_FILE: &str = "energy.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// Writes the replay, sensor and label files for a scenario into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioFiles> {
    let output = config.generate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = ScenarioFiles {
        replay: out_dir.join(REPLAY_FILE),
        sensor: out_dir.join(SENSOR_FILE),
        labels: out_dir.join(LABELS_FILE),
    };
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));

    let mut w = create(&files.replay)?;
    write_replay(&mut w, &output.events, config.time_compression)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&files.replay, e))?;

    let mut w = create(&files.sensor)?;
    write_sensor(&mut w, &output.energy, config.time_compression)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&files.sensor, e))?;

    let mut w = create(&files.labels)?;
    write_labels(&mut w, &output.labels)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&files.labels, e))?;
    Ok(files)
}

pub fn write_labels<W: Write>(mut out: W, labels: &[(u64, Label)]) -> std::io::Result<()> {
    writeln!(out, "# slot_index,regime")?;
    for (slot, label) in labels {
        writeln!(out, "{slot},{}", label.as_str())?;
    }
    Ok(())
}

/// Reads a `slot_index,regime` label file.
pub fn read_labels(path: &Path) -> Result<BTreeMap<u64, Label>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (slot, label) = line
            .split_once(',')
            .ok_or_else(|| Error::malformed(idx + 1, "expected slot_index,regime"))?;
        let slot: u64 = slot
            .trim()
            .parse()
            .map_err(|_| Error::malformed(idx + 1, format!("bad slot index `{slot}`")))?;
        let label: Label = label.parse().map_err(|e: Error| Error::malformed(idx + 1, e.to_string()))?;
        labels.insert(slot, label);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot_counts(events: &[PacketEvent], protocol: Protocol, slots: u64) -> Vec<u64> {
        let mut counts = vec![0; slots as usize];
        for e in events.iter().filter(|e| e.protocol == protocol && e.is_detection_counted()) {
            counts[(e.timestamp / 180.0) as usize] += 1;
        }
        counts
    }

    #[test]
    fn normal_bands_hold() {
        for seed in 0..5 {
            let tcp = gen_normal_traffic(Protocol::Tcp, seed, 1800.0).unwrap();
            assert!(slot_counts(&tcp, Protocol::Tcp, 10).iter().all(|c| (2000..=5000).contains(c)));
            let udp = gen_normal_traffic(Protocol::Udp, seed, 1800.0).unwrap();
            assert!(slot_counts(&udp, Protocol::Udp, 10).iter().all(|c| (1000..=3000).contains(c)));
        }
    }

    #[test]
    fn attack_bands_hold() {
        let tcp = gen_attack_traffic(Protocol::Tcp, 3, 1800.0).unwrap();
        assert!(slot_counts(&tcp, Protocol::Tcp, 10).iter().all(|c| *c > 6000));
        let mqtt = gen_attack_traffic(Protocol::MqttSub, 3, 1800.0).unwrap();
        assert!(slot_counts(&mqtt, Protocol::MqttSub, 10).iter().all(|c| *c >= 8000));
    }

    #[test]
    fn unsupported_protocol() {
        assert!(gen_normal_traffic(Protocol::MqttPub, 1, 180.0).is_err());
        assert!(gen_attack_traffic(Protocol::Other, 1, 180.0).is_err());
    }

    #[test]
    fn same_seed_same_stream() {
        let a = gen_normal_traffic(Protocol::Tcp, 9, 360.0).unwrap();
        let b = gen_normal_traffic(Protocol::Tcp, 9, 360.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_normal_traffic(Protocol::Tcp, 10, 360.0).unwrap());
    }

    #[test]
    fn idle_energy_without_traffic() {
        let model = EnergyModel {
            noise: 0.0,
            ..EnergyModel::default()
        };
        let samples = gen_energy(&[], &model, 1, 30.0).unwrap();
        assert_eq!(samples.len(), 30);
        assert!(samples.iter().all(|s| s.power == model.idle_watts));
    }

    #[test]
    fn apportion_is_exact() {
        let shares = [(Protocol::Tcp, 0.45), (Protocol::Udp, 0.30), (Protocol::MqttSub, 0.20)];
        for total in [1500u64, 1501, 5999, 6000] {
            assert_eq!(apportion(total, &shares).values().sum::<u64>(), total);
        }
    }

    #[test]
    fn mix_must_sum_to_one() {
        let mut c = ScenarioConfig::mixed(Regime::Normal, 1);
        c.mix.insert(Protocol::Other, 0.06);
        assert!(c.generate().is_err());
    }

    #[test]
    fn descriptor_parsing() {
        let c = ScenarioConfig::from_descriptor("udp:attack:7").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.regimes[&Protocol::Udp].regime, Regime::Attack);
        assert_eq!(ScenarioConfig::from_descriptor("mix:normal").unwrap().mix.len(), 4);
        assert!(ScenarioConfig::from_descriptor("icmp:normal").is_err());
        assert!(ScenarioConfig::from_descriptor("tcp").is_err());
    }

    #[test]
    fn ten_labels_for_thirty_minutes() {
        let out = ScenarioConfig::single(Protocol::Udp, Regime::Normal, 1).generate().unwrap();
        assert_eq!(out.labels.len(), 10);
        assert_eq!(out.energy.len(), 1800);
    }

    #[test]
    fn onset_splits_labels() {
        let mut c = ScenarioConfig::single(Protocol::Udp, Regime::Normal, 1);
        c.regimes.insert(Protocol::Udp, RegimeSpec::attack_from(900.0));
        let out = c.generate().unwrap();
        let abnormal: Vec<u64> = out.labels.iter().filter(|(_, l)| *l == Label::Abnormal).map(|(s, _)| *s).collect();
        assert_eq!(abnormal, vec![5, 6, 7, 8, 9]);
    }
}
