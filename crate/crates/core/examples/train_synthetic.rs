//! Trains a gain network on synthetic walking data, then compares it against
//! a tuned fixed-gain filter on recordings it has not seen.
//!
//! `cargo run --release --example train_synthetic -- [epochs]`

use dae_ahrs::bench::compare::{compare, Setup};
use dae_ahrs::bench::{generate_synthetic, Algorithm, SynthProfile};
use dae_ahrs::filter::FilterConfig;
use dae_ahrs::trainer::TrainConfig;

fn main() {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let walk = |seed| generate_synthetic(SynthProfile::Walking, 60.0, 200.0, seed);
    let train: Vec<_> = (100..105).map(walk).collect();
    let test: Vec<_> = (200..205).map(walk).collect();

    let training = TrainConfig {
        segment_length: 2000,
        learning_rate: 0.5,
        ic_error_max_deg: 3.0,
        epochs,
        ..TrainConfig::default()
    };
    let setups = [
        Setup::default_for(Algorithm::FixedGainCf, &training),
        Setup::Train(training),
    ];
    let report = compare(&setups, &train, &test, &FilterConfig::default()).unwrap();
    for s in &report.algorithms {
        match s.train_loss {
            Some(l) => println!("{:<14} train loss {:.3} deg", s.algorithm.as_str(), l.to_degrees()),
            None => println!("{:<14}", s.algorithm.as_str()),
        }
    }
    println!();
    print!("{}", report.to_table());

    if let dae_ahrs::bench::BaselineConfig::Dae(params) = &report.algorithms[1].config {
        println!("\nlearned gain against |residual| (axis x):");
        for i in 0..=10 {
            let r = 0.02 * i as f64;
            println!("  {r:.2}  {:.5}", params.axis_gain(0, r).unwrap());
        }
    }
}
