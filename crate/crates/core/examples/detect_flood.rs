//! Feed a TCP flood through the detector and watch the counter climb.
//!
//! ```text
//! cargo run --example detect_flood
//! ```

use joulewatch::alert::CollectingSink;
use joulewatch::{default_profile, DeviceStatus, EventKind, Pipeline, PipelineConfig, Protocol, Regime, ScenarioConfig, Scope, Store};

fn main() -> joulewatch::Result<()> {
    let scenario = ScenarioConfig::single(Protocol::Tcp, Regime::Attack, 7).generate()?;

    let mut store = Store::in_memory();
    let config = PipelineConfig {
        scopes: vec![Scope::Tcp],
        ..PipelineConfig::default()
    };
    let mut pipeline = Pipeline::new(config, default_profile("*", DeviceStatus::Active), &mut store)?;
    let sink = CollectingSink::default();
    pipeline.add_sink(Box::new(sink.clone()));
    pipeline.set_energy("rpi-0", scenario.energy);
    pipeline.run(scenario.events.into_iter().map(Ok))?;
    let summary = pipeline.finish(None)?;

    for e in &summary.events {
        match e.kind {
            EventKind::WindowVerdict => println!(
                "window {}  mean {:.0}  verdict {:?}",
                e.window_index,
                e.average,
                e.verdict.unwrap()
            ),
            kind => println!(
                "slot {}  {:<20}  A = {:>7.1}  y = {}  counter = {}",
                e.window_index * 10 + e.slot_index as u64,
                kind.as_str(),
                e.average,
                e.bound,
                e.counter
            ),
        }
    }
    println!("\nalerts:");
    for line in sink.lines() {
        println!("  {line}");
    }
    println!("exit code would be {}", summary.exit_code());
    Ok(())
}
