//! Generate a seeded mixed-protocol scenario and print its per-slot counts.
//!
//! ```text
//! cargo run --example simulate_scenario -- [out_dir] [seed]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use joulewatch::sim::{run_scenario, RegimeSpec};
use joulewatch::{Protocol, Regime, ScenarioConfig};

fn main() -> joulewatch::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("joulewatch-scenario"));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);

    // Normal for the first half hour, flooded from minute 30 on.
    let mut config = ScenarioConfig::mixed(Regime::Attack, seed);
    config.duration = 3600.0;
    for spec in config.regimes.values_mut() {
        *spec = RegimeSpec::attack_from(1800.0);
    }
    let output = config.generate()?;

    let mut per_slot: BTreeMap<u64, BTreeMap<Protocol, u64>> = BTreeMap::new();
    for e in output.events.iter().filter(|e| e.is_detection_counted()) {
        *per_slot
            .entry((e.timestamp / config.slot_length) as u64)
            .or_default()
            .entry(e.protocol)
            .or_default() += 1;
    }
    println!("slot  label      TCP    UDP   MQTT  total");
    for (slot, label) in &output.labels {
        let counts = per_slot.get(slot).cloned().unwrap_or_default();
        let get = |p| counts.get(&p).copied().unwrap_or(0);
        println!(
            "{slot:>4}  {:<8} {:>6} {:>6} {:>6} {:>6}",
            label.as_str(),
            get(Protocol::Tcp),
            get(Protocol::Udp),
            get(Protocol::MqttSub),
            counts.values().sum::<u64>()
        );
    }

    let files = run_scenario(&config, &out)?;
    println!("\nwrote {}, {} and {}", files.replay.display(), files.sensor.display(), files.labels.display());
    Ok(())
}
