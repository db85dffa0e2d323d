//! Run normal and attack scenarios for every protocol and write figure data.
//!
//! ```text
//! cargo run --example report_figures -- [out_dir]
//! ```

use std::path::PathBuf;

use joulewatch::report::write_report;
use joulewatch::{default_profile, DeviceStatus, Pipeline, PipelineConfig, Protocol, Regime, ScenarioConfig, Store};

fn main() -> joulewatch::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("joulewatch-figures"));
    let mut store = Store::in_memory();

    let mut scenarios = Vec::new();
    for (i, protocol) in [Protocol::Tcp, Protocol::Udp, Protocol::MqttSub].into_iter().enumerate() {
        for regime in [Regime::Normal, Regime::Attack] {
            let mut config = ScenarioConfig::single(protocol, regime, 100 + i as u64);
            config.device_id = format!("{}-{regime:?}", protocol.as_str().to_lowercase()).to_lowercase();
            scenarios.push(config);
        }
    }

    let run_id = store.next_run_id();
    let mut pipeline = Pipeline::new(
        PipelineConfig {
            run_id: run_id.clone(),
            ..PipelineConfig::default()
        },
        default_profile("*", DeviceStatus::Active),
        &mut store,
    )?;
    let mut events = Vec::new();
    for config in &scenarios {
        let output = config.generate()?;
        pipeline.set_energy(&config.device_id, output.energy);
        events.extend(output.events);
    }
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    pipeline.run(events.into_iter().map(Ok))?;
    pipeline.finish(None)?;

    let report = write_report(&store, Some(&run_id), &out)?;
    print!("{}", report.summary);
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
