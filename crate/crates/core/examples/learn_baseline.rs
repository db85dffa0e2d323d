//! Learn a per-protocol profile from attack-free traffic and compare it with the defaults.
//!
//! ```text
//! cargo run --example learn_baseline
//! ```

use joulewatch::commands::{cmd_learn, cmd_simulate, describe_profile, LearnOptions};
use joulewatch::{default_profile, DeviceStatus, Regime, ScenarioConfig};

fn main() -> joulewatch::Result<()> {
    let dir = std::env::temp_dir().join("joulewatch-learn");
    let mut config = ScenarioConfig::mixed(Regime::Normal, 5);
    config.duration = 3.0 * 3600.0;
    let files = cmd_simulate(&config, &dir)?;

    println!("{}", describe_profile(&default_profile("rpi-0", DeviceStatus::Active)));

    let mut opts = LearnOptions::new(&files.replay, dir.join("profile.json"));
    opts.sensor = Some(files.sensor.clone());
    let learned = cmd_learn(&opts)?;
    println!("{}", describe_profile(&learned));
    println!(
        "observed energy range [{:.4}, {:.4}] J per sample",
        learned.energy_min, learned.energy_max
    );

    // An idle device gets the same bands scaled down.
    let idle = default_profile("rpi-0", DeviceStatus::Idle);
    println!("\n{}", describe_profile(&idle));
    Ok(())
}
