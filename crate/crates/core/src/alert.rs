//! Alert delivery: persist every detection event, push alert kinds to sinks.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use log::{error, info};

use crate::detector::{DetectionEvent, EventKind};
use crate::error::Result;
use crate::store::{Label, Record, RecordKind, Store};
use crate::windowing::Verdict;

pub trait AlertSink {
    fn name(&self) -> &str;

    fn deliver(&mut self, event: &DetectionEvent) -> std::result::Result<(), String>;
}

/// Writes one `ALERT ...` line per event.
pub struct LineSink<W> {
    out: W,
}

impl<W: Write> LineSink<W> {
    pub fn new(out: W) -> Self {
        LineSink { out }
    }
}

impl LineSink<std::io::Stdout> {
    pub fn stdout() -> Self {
        LineSink::new(std::io::stdout())
    }
}

impl<W: Write> AlertSink for LineSink<W> {
    fn name(&self) -> &str {
        "line"
    }

    fn deliver(&mut self, event: &DetectionEvent) -> std::result::Result<(), String> {
        writeln!(self.out, "{}", event.alert_line())
            .and_then(|_| self.out.flush())
            .map_err(|e| e.to_string())
    }
}

/// Keeps alert lines in memory; clones share the same buffer.
#[derive(Clone, Default)]
pub struct CollectingSink {
    lines: Arc<Mutex<Vec<String>>>,
}

impl CollectingSink {
    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().expect("sink lock").clone()
    }
}

impl AlertSink for CollectingSink {
    fn name(&self) -> &str {
        "memory"
    }

    fn deliver(&mut self, event: &DetectionEvent) -> std::result::Result<(), String> {
        self.lines.lock().map_err(|e| e.to_string())?.push(event.alert_line());
        Ok(())
    }
}

/// POSTs each event as a JSON object.
pub struct WebhookSink {
    url: String,
    agent: ureq::Agent,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_timeout(url, Duration::from_secs(3))
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        WebhookSink { url: url.into(), agent }
    }
}

impl AlertSink for WebhookSink {
    fn name(&self) -> &str {
        &self.url
    }

    fn deliver(&mut self, event: &DetectionEvent) -> std::result::Result<(), String> {
        let body = serde_json::to_string(event).map_err(|e| e.to_string())?;
        self.agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body.as_str())
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReceipt {
    pub position: u64,
    /// False for kinds that are persisted only.
    pub alerted: bool,
    pub delivered: Vec<String>,
    pub failed: Vec<(String, String)>,
}

pub fn event_label(event: &DetectionEvent) -> Label {
    match event.kind {
        EventKind::WindowVerdict => match event.verdict {
            Some(Verdict::Normal) => Label::Normal,
            Some(Verdict::Abnormal) => Label::Abnormal,
            _ => Label::Unlabeled,
        },
        _ => Label::Abnormal,
    }
}

/// Persists the event, then hands alert kinds to every sink.
///
/// Store failures are returned; sink failures are logged and reported in the receipt.
pub fn emit_alert(
    event: &DetectionEvent,
    run_id: &str,
    store: &mut Store,
    sinks: &mut [Box<dyn AlertSink>],
) -> Result<DeliveryReceipt> {
    let record = Record::new(
        RecordKind::Event,
        &event.device_id,
        event.timestamp,
        event_label(event),
        run_id,
        event,
    )?;
    let position = store.append(record)?;
    let mut receipt = DeliveryReceipt {
        position,
        alerted: event.kind.is_alert(),
        delivered: Vec::new(),
        failed: Vec::new(),
    };
    if !receipt.alerted {
        return Ok(receipt);
    }
    for sink in sinks.iter_mut() {
        match sink.deliver(event) {
            Ok(()) => {
                info!("{} delivered to {}", event.kind, sink.name());
                receipt.delivered.push(sink.name().to_string());
            }
            Err(e) => {
                error!("alert delivery to {} failed: {e}", sink.name());
                receipt.failed.push((sink.name().to_string(), e));
            }
        }
    }
    Ok(receipt)
}
