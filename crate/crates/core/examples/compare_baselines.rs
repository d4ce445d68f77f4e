//! Tunes the fixed-gain filter, Madgwick and Mahony on synthetic training
//! recordings and scores them on held-out ones.

use dae_ahrs::bench::compare::{compare, Setup};
use dae_ahrs::bench::{generate_synthetic, Algorithm, SynthProfile};
use dae_ahrs::filter::FilterConfig;

fn main() {
    let train: Vec<_> = (0..3).map(|s| generate_synthetic(SynthProfile::Walking, 30.0, 200.0, s)).collect();
    let test: Vec<_> = (10..12).map(|s| generate_synthetic(SynthProfile::Walking, 30.0, 200.0, s)).collect();
    let setups: Vec<Setup> = [Algorithm::FixedGainCf, Algorithm::Madgwick, Algorithm::Mahony]
        .into_iter()
        .map(|a| Setup::Tune {
            algorithm: a,
            grid: a.default_grid(),
        })
        .collect();
    let report = compare(&setups, &train, &test, &FilterConfig::default()).unwrap();
    for s in &report.algorithms {
        println!("{:<14} {}", s.algorithm.as_str(), s.config.describe());
    }
    println!();
    print!("{}", report.to_table());
}
