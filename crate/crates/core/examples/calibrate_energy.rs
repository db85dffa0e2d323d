//! Check that the simulator's energy model separates normal and attack slots
//! around the 1.42 J per-sample threshold, then measure it on generated traces.
//!
//! ```text
//! cargo run --example calibrate_energy
//! ```

use joulewatch::baseline::DEFAULT_ENERGY_THRESHOLD;
use joulewatch::energy::{bucket_by_slot, integrate_slot};
use joulewatch::sim::{attack_band, normal_band, EnergyModel};
use joulewatch::{Protocol, Regime, ScenarioConfig};

fn main() -> joulewatch::Result<()> {
    let model = EnergyModel::default();
    println!("model {model:?}\nthreshold {DEFAULT_ENERGY_THRESHOLD} J per sample\n");
    println!("protocol  normal max   attack min   margin");
    for protocol in [Protocol::Tcp, Protocol::Udp, Protocol::MqttSub] {
        let (_, normal_top) = normal_band(protocol)?;
        let (attack_floor, _) = attack_band(protocol)?;
        // The 6000 bound is the worst case an in-band slot can reach.
        let (_, normal_hi) = model.mean_sample_joules_bounds(normal_top.max(6000), 180.0);
        let (attack_lo, _) = model.mean_sample_joules_bounds(attack_floor, 180.0);
        println!(
            "{:<9} {normal_hi:>10.4}   {attack_lo:>10.4}   {:+.4} / {:+.4}",
            protocol.as_str(),
            DEFAULT_ENERGY_THRESHOLD - normal_hi,
            attack_lo - DEFAULT_ENERGY_THRESHOLD
        );
    }

    println!("\nmeasured over 10 seeds:");
    for regime in [Regime::Normal, Regime::Attack] {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for seed in 0..10 {
            for protocol in [Protocol::Tcp, Protocol::Udp, Protocol::MqttSub] {
                let out = ScenarioConfig::single(protocol, regime, seed).generate()?;
                for (slot, bucket) in bucket_by_slot(&out.energy, 180.0) {
                    let e = integrate_slot("rpi-0", &bucket, slot as f64 * 180.0, 180.0);
                    lo = lo.min(e.mean_sample_joules);
                    hi = hi.max(e.mean_sample_joules);
                }
            }
        }
        println!("  {regime:?}: [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}
