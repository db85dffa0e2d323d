//! Integrate a per-second power trace into per-slot energy footprints.
//!
//! ```text
//! cargo run --example energy_integration
//! ```

use joulewatch::energy::{bucket_by_slot, integrate_slot, normalize_energy, EnergySample};

fn main() -> joulewatch::Result<()> {
    // Three slots: idle, busy, and busy with a sensor dropout.
    let mut samples = Vec::new();
    for t in 0..540u32 {
        if (400..420).contains(&t) {
            continue;
        }
        let power = if t < 180 { 1.05 } else { 1.6 + 0.01 * f64::from(t % 7) };
        samples.push(EnergySample::new(f64::from(t), 5.1, power / 5.1, power));
    }

    let buckets = bucket_by_slot(&samples, 180.0);
    println!("slot  samples   joules  J/sample  normalized  gap");
    for (slot, bucket) in &buckets {
        let e = integrate_slot("rpi-0", bucket, *slot as f64 * 180.0, 180.0);
        let norm = normalize_energy(e.mean_sample_joules, 0.0, 2.84)?;
        println!(
            "{slot:>4}  {:>7}  {:>7.2}  {:>8.4}  {:>10.3}  {}",
            e.sample_count, e.joules, e.mean_sample_joules, norm, e.data_gap
        );
    }
    Ok(())
}
