//! Packet sources: replay files, the simulator feed, and a line-oriented live feed.
//!
//! Every source yields [`PacketEvent`]s through the same [`EventStream`], which
//! enforces per-device timestamp order and tallies traffic that never reaches
//! the detection counts.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{PacketKind, Protocol};
use crate::sim::ScenarioConfig;

/// One observed packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEvent {
    /// Seconds since the stream epoch.
    pub timestamp: f64,
    pub device_id: String,
    pub protocol: Protocol,
    pub kind: PacketKind,
    pub size: u32,
}

impl PacketEvent {
    pub fn new(timestamp: f64, device_id: impl Into<String>, protocol: Protocol) -> Self {
        PacketEvent {
            timestamp,
            device_id: device_id.into(),
            protocol,
            kind: PacketKind::Received,
            size: 0,
        }
    }

    pub fn with_kind(mut self, kind: PacketKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_size(mut self, size: u32) -> Self {
        self.size = size;
        self
    }

    /// True for inbound TCP data, UDP, and MQTT subscription deliveries.
    pub fn is_detection_counted(&self) -> bool {
        match self.protocol {
            Protocol::Tcp => filter_tcp_received(self),
            Protocol::Udp | Protocol::MqttSub => true,
            Protocol::MqttPub | Protocol::Other => false,
        }
    }

    /// Renders the event as one replay-file line (without newline).
    pub fn to_replay_line(&self, time_compression: f64) -> String {
        format!(
            "{:.6},{},{},{},{}",
            self.timestamp / time_compression,
            self.device_id,
            self.protocol,
            self.kind,
            self.size
        )
    }
}

/// True iff a TCP event is an ordinary received segment.
pub fn filter_tcp_received(event: &PacketEvent) -> bool {
    event.kind == PacketKind::Received
}

/// What a capture saw in an MQTT frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MqttMarker {
    /// Inbound application message delivered to one of the device's subscriptions.
    SubscriptionDelivery,
    /// Message published by the device.
    Publish,
}

/// Relabels an MQTT frame by its marker. Frames without a marker become `Other`.
pub fn classify_mqtt(mut event: PacketEvent, marker: Option<MqttMarker>) -> PacketEvent {
    event.protocol = match marker {
        Some(MqttMarker::SubscriptionDelivery) => Protocol::MqttSub,
        Some(MqttMarker::Publish) => Protocol::MqttPub,
        None => Protocol::Other,
    };
    event.kind = PacketKind::Received;
    event
}

/// Tallies of traffic excluded from detection counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tcp_retransmissions: u64,
    pub tcp_acknowledgments: u64,
    pub mqtt_published: u64,
    pub other: u64,
    /// MQTT frames that carried no subscribe/publish marker (also counted in `other`).
    pub unmarked_mqtt: u64,
}

impl Diagnostics {
    pub fn record(&mut self, event: &PacketEvent) {
        match (event.protocol, event.kind) {
            (Protocol::Tcp, PacketKind::Retransmission) => self.tcp_retransmissions += 1,
            (Protocol::Tcp, PacketKind::Acknowledged) => self.tcp_acknowledgments += 1,
            (Protocol::MqttPub, _) => self.mqtt_published += 1,
            (Protocol::Other, _) => self.other += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.tcp_retransmissions += other.tcp_retransmissions;
        self.tcp_acknowledgments += other.tcp_acknowledgments;
        self.mqtt_published += other.mqtt_published;
        self.other += other.other;
        self.unmarked_mqtt += other.unmarked_mqtt;
    }

    pub fn total(&self) -> u64 {
        self.tcp_retransmissions + self.tcp_acknowledgments + self.mqtt_published + self.other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceKind {
    Replay,
    Simulated,
    Live,
}

#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub source_kind: SourceKind,
    /// File path for replay, scenario descriptor for the simulator, `-` for live stdin.
    pub path_or_endpoint: String,
    pub device_filter: Option<Vec<String>>,
    /// Emitted timestamps are virtual time divided by this factor.
    pub time_compression: f64,
    /// Programmatic scenario; overrides the descriptor for simulated sources.
    pub scenario: Option<ScenarioConfig>,
}

impl SourceConfig {
    pub fn replay(path: impl AsRef<Path>) -> Self {
        SourceConfig {
            source_kind: SourceKind::Replay,
            path_or_endpoint: path.as_ref().display().to_string(),
            device_filter: None,
            time_compression: 1.0,
            scenario: None,
        }
    }

    pub fn simulated(scenario: ScenarioConfig) -> Self {
        SourceConfig {
            source_kind: SourceKind::Simulated,
            path_or_endpoint: String::new(),
            device_filter: None,
            time_compression: 1.0,
            scenario: Some(scenario),
        }
    }

    pub fn live_stdin() -> Self {
        SourceConfig {
            source_kind: SourceKind::Live,
            path_or_endpoint: "-".into(),
            device_filter: None,
            time_compression: 1.0,
            scenario: None,
        }
    }

    pub fn with_device_filter(mut self, devices: Vec<String>) -> Self {
        self.device_filter = Some(devices);
        self
    }

    pub fn with_time_compression(mut self, factor: f64) -> Self {
        self.time_compression = factor;
        self
    }
}

/// Maps an emitted timestamp back to virtual time.
///
/// Non-unit factors are rounded to the millisecond so that integer-second
/// boundaries survive the divide/multiply round trip.
pub fn to_virtual_time(emitted: f64, time_compression: f64) -> f64 {
    if time_compression == 1.0 {
        emitted
    } else {
        (emitted * time_compression * 1000.0).round() / 1000.0
    }
}

type NumberedEvents = Box<dyn Iterator<Item = Result<(usize, PacketEvent)>>>;

/// Time-ordered stream of classified packet events.
pub struct EventStream {
    inner: NumberedEvents,
    device_filter: Option<Vec<String>>,
    last_seen: HashMap<String, f64>,
    diagnostics: Diagnostics,
    failed: bool,
}

impl EventStream {
    fn new(inner: NumberedEvents, device_filter: Option<Vec<String>>) -> Self {
        EventStream {
            inner,
            device_filter,
            last_seen: HashMap::new(),
            diagnostics: Diagnostics::default(),
            failed: false,
        }
    }

    /// Wraps an in-memory event list.
    pub fn from_events(events: Vec<PacketEvent>) -> Self {
        let inner = events.into_iter().enumerate().map(|(i, e)| Ok((i + 1, e)));
        EventStream::new(Box::new(inner), None)
    }

    /// Reads the replay line format from any buffered reader.
    pub fn from_reader<R: BufRead + 'static>(reader: R, time_compression: f64) -> Self {
        EventStream::new(Box::new(ReplayLines::new(reader, time_compression)), None)
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }
}

impl Iterator for EventStream {
    type Item = Result<PacketEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let (line, event) = match self.inner.next()? {
                Ok(item) => item,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            if let Some(filter) = &self.device_filter {
                if !filter.iter().any(|d| d == &event.device_id) {
                    continue;
                }
            }
            if let Some(&last) = self.last_seen.get(&event.device_id) {
                if event.timestamp < last {
                    self.failed = true;
                    return Some(Err(Error::malformed(
                        line,
                        format!(
                            "timestamp {} for device {} goes backwards (previous {})",
                            event.timestamp, event.device_id, last
                        ),
                    )));
                }
            }
            self.last_seen.insert(event.device_id.clone(), event.timestamp);
            if !event.is_detection_counted() {
                self.diagnostics.record(&event);
            }
            return Some(Ok(event));
        }
    }
}

/// Opens a packet source.
pub fn open_source(config: &SourceConfig) -> Result<EventStream> {
    if !(config.time_compression > 0.0 && config.time_compression.is_finite()) {
        return Err(Error::Config(format!(
            "time compression must be positive, got {}",
            config.time_compression
        )));
    }
    let mut stream = match config.source_kind {
        SourceKind::Replay => {
            let path = Path::new(&config.path_or_endpoint);
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            EventStream::from_reader(BufReader::new(file), config.time_compression)
        }
        SourceKind::Simulated => {
            let scenario = match &config.scenario {
                Some(s) => s.clone(),
                None => ScenarioConfig::from_descriptor(&config.path_or_endpoint)?,
            };
            EventStream::from_events(scenario.generate()?.events)
        }
        SourceKind::Live => {
            if config.path_or_endpoint != "-" {
                return Err(Error::UnsupportedSource(format!(
                    "live endpoint `{}` (only `-` for stdin is supported)",
                    config.path_or_endpoint
                )));
            }
            let stdin = BufReader::new(std::io::stdin());
            EventStream::from_reader(stdin, config.time_compression)
        }
    };
    stream.device_filter = config.device_filter.clone();
    Ok(stream)
}

struct ReplayLines<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    time_compression: f64,
}

impl<R: BufRead> ReplayLines<R> {
    fn new(reader: R, time_compression: f64) -> Self {
        ReplayLines {
            lines: reader.lines(),
            line_no: 0,
            time_compression,
        }
    }
}

impl<R: BufRead> Iterator for ReplayLines<R> {
    type Item = Result<(usize, PacketEvent)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::malformed(self.line_no, e.to_string()))),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(
                parse_replay_line(trimmed, self.line_no, self.time_compression)
                    .map(|e| (self.line_no, e)),
            );
        }
    }
}

/// Parses `timestamp,device_id,protocol,kind,size`.
///
/// Besides the five protocol labels, a bare `MQTT` token is accepted for
/// frames whose subscribe/publish marker was not captured; it is classified
/// as `OTHER`.
pub fn parse_replay_line(line: &str, line_no: usize, time_compression: f64) -> Result<PacketEvent> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(Error::malformed(
            line_no,
            format!("expected 5 fields, found {}", fields.len()),
        ));
    }
    let emitted: f64 = fields[0]
        .parse()
        .map_err(|_| Error::malformed(line_no, format!("bad timestamp `{}`", fields[0])))?;
    if !emitted.is_finite() || emitted < 0.0 {
        return Err(Error::malformed(line_no, format!("timestamp {emitted} out of range")));
    }
    let device_id = fields[1];
    if device_id.is_empty() {
        return Err(Error::malformed(line_no, "empty device id"));
    }
    let kind: PacketKind = fields[3]
        .parse()
        .map_err(|e: Error| Error::malformed(line_no, e.to_string()))?;
    let size: u32 = fields[4]
        .parse()
        .map_err(|_| Error::malformed(line_no, format!("bad size `{}`", fields[4])))?;
    let base = PacketEvent::new(to_virtual_time(emitted, time_compression), device_id, Protocol::Other)
        .with_kind(kind)
        .with_size(size);

    let event = match fields[2] {
        "MQTT_SUB" => classify_mqtt(base, Some(MqttMarker::SubscriptionDelivery)),
        "MQTT_PUB" => classify_mqtt(base, Some(MqttMarker::Publish)),
        "MQTT" => classify_mqtt(base, None),
        token => {
            let protocol: Protocol = token
                .parse()
                .map_err(|e: Error| Error::malformed(line_no, e.to_string()))?;
            PacketEvent { protocol, ..base }
        }
    };
    if event.protocol != Protocol::Tcp && kind != PacketKind::Received {
        return Err(Error::malformed(
            line_no,
            format!("kind {kind} is only valid for TCP"),
        ));
    }
    Ok(event)
}

/// Writes events in the replay format, one per line.
pub fn write_replay<W: Write>(mut out: W, events: &[PacketEvent], time_compression: f64) -> std::io::Result<()> {
    writeln!(out, "# timestamp,device_id,protocol,kind,size")?;
    for event in events {
        writeln!(out, "{}", event.to_replay_line(time_compression))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn stream(text: &str) -> EventStream {
        EventStream::from_reader(Cursor::new(text.to_string()), 1.0)
    }

    #[test]
    fn empty_replay_is_empty_stream() {
        let events: Vec<_> = stream("").collect::<Result<_>>().unwrap();
        assert!(events.is_empty());
        let events: Vec<_> = stream("# only a comment\n\n").collect::<Result<_>>().unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn three_events_pass_through_in_order() {
        let text = "0.5,dev,TCP,RECEIVED,60\n1.0,dev,UDP,RECEIVED,80\n1.0,dev,MQTT_SUB,RECEIVED,120\n";
        let events: Vec<_> = stream(text).collect::<Result<_>>().unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0], PacketEvent::new(0.5, "dev", Protocol::Tcp).with_size(60));
        assert_eq!(events[1].protocol, Protocol::Udp);
        assert_eq!(events[2].protocol, Protocol::MqttSub);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "# header\n0.5,dev,TCP,RECEIVED,60\n0.7,dev,TCP\n";
        let err = stream(text).collect::<Result<Vec<_>>>().unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn backwards_timestamp_rejected_per_device() {
        let ok = "2.0,a,TCP,RECEIVED,1\n1.0,b,TCP,RECEIVED,1\n";
        assert_eq!(stream(ok).count(), 2);
        let bad = "2.0,a,TCP,RECEIVED,1\n1.0,a,TCP,RECEIVED,1\n";
        let err = stream(bad).collect::<Result<Vec<_>>>().unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn non_tcp_kinds_rejected() {
        assert!(parse_replay_line("1,d,UDP,ACKNOWLEDGED,1", 1, 1.0).is_err());
        assert!(parse_replay_line("1,d,TCP,ACKNOWLEDGED,1", 1, 1.0).is_ok());
        assert!(parse_replay_line("-1,d,TCP,RECEIVED,1", 1, 1.0).is_err());
    }

    #[test]
    fn mqtt_classification() {
        let base = PacketEvent::new(1.0, "d", Protocol::Other);
        assert_eq!(
            classify_mqtt(base.clone(), Some(MqttMarker::SubscriptionDelivery)).protocol,
            Protocol::MqttSub
        );
        let published = classify_mqtt(base.clone(), Some(MqttMarker::Publish));
        assert_eq!(published.protocol, Protocol::MqttPub);
        assert!(!published.is_detection_counted());
        assert_eq!(classify_mqtt(base, None).protocol, Protocol::Other);

        let unmarked = parse_replay_line("1,d,MQTT,RECEIVED,1", 1, 1.0).unwrap();
        assert_eq!(unmarked.protocol, Protocol::Other);
    }

    #[test]
    fn tcp_received_filter() {
        let e = PacketEvent::new(0.0, "d", Protocol::Tcp);
        assert!(filter_tcp_received(&e));
        assert!(!filter_tcp_received(&e.clone().with_kind(PacketKind::Retransmission)));
        assert!(!filter_tcp_received(&e.with_kind(PacketKind::Acknowledged)));
    }

    #[test]
    fn diagnostics_tally_uncounted_traffic() {
        let text = "0,d,TCP,RECEIVED,1\n0,d,TCP,ACKNOWLEDGED,1\n0,d,TCP,RETRANSMISSION,1\n\
                    0,d,MQTT_PUB,RECEIVED,1\n0,d,OTHER,RECEIVED,1\n";
        let mut s = stream(text);
        let n = s.by_ref().count();
        assert_eq!(n, 5);
        let d = s.diagnostics();
        assert_eq!(
            (d.tcp_acknowledgments, d.tcp_retransmissions, d.mqtt_published, d.other),
            (1, 1, 1, 1)
        );
    }

    #[test]
    fn device_filter_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "0,a,TCP,RECEIVED,1\n0,b,TCP,RECEIVED,1\n").unwrap();
        let cfg = SourceConfig::replay(&path).with_device_filter(vec!["b".into()]);
        let events: Vec<_> = open_source(&cfg).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].device_id, "b");

        let missing = SourceConfig::replay(dir.path().join("nope.csv"));
        assert!(matches!(open_source(&missing), Err(Error::Io { .. })));
        let live = SourceConfig {
            path_or_endpoint: "tcp://10.0.0.1:1883".into(),
            ..SourceConfig::live_stdin()
        };
        assert!(matches!(open_source(&live), Err(Error::UnsupportedSource(_))));
    }

    #[test]
    fn compressed_timestamps_map_back() {
        let e = PacketEvent::new(180.0, "d", Protocol::Udp);
        let line = e.to_replay_line(7.0);
        let back = parse_replay_line(&line, 1, 7.0).unwrap();
        assert_eq!(back.timestamp, 180.0);
    }
}
