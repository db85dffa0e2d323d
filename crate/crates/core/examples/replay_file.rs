//! Write a scenario to disk, replay it through the CLI workflow and query the store.
//!
//! ```text
//! cargo run --example replay_file
//! ```

use joulewatch::alert::LineSink;
use joulewatch::commands::{cmd_replay, cmd_simulate, ReplayOptions};
use joulewatch::{DetectionEvent, Protocol, Query, RecordKind, Regime, ScenarioConfig, Store};

fn main() -> joulewatch::Result<()> {
    let dir = std::env::temp_dir().join("joulewatch-replay");
    let _ = std::fs::remove_dir_all(&dir);
    let files = cmd_simulate(&ScenarioConfig::single(Protocol::Udp, Regime::Attack, 21), &dir)?;

    let store_path = dir.join("store.ndjson");
    let opts = ReplayOptions {
        sensor: Some(files.sensor),
        labels: Some(files.labels),
        store: Some(store_path.clone()),
        ..ReplayOptions::new(files.replay)
    };
    let summary = cmd_replay(&opts, vec![Box::new(LineSink::stdout())])?;
    println!("{}: {} slots, exit code {}", summary.run_id, summary.slots, summary.exit_code());

    let store = Store::open_read_only(&store_path)?;
    let events = store.query(&Query::new(RecordKind::Event).device("rpi-0").between(0.0, 1800.0))?;
    for record in events {
        let event: DetectionEvent = record.decode()?;
        println!("{:>7.0}s  {:<10} {}", record.timestamp, event.scope.as_str(), event.kind);
    }
    Ok(())
}
