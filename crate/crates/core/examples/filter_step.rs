//! Runs the complementary filter with a constant gain on synthetic walking
//! data and prints roll/pitch errors for a few gains.

use dae_ahrs::bench::{compute_metrics, generate_synthetic, run_filter, BaselineConfig, SynthProfile};
use dae_ahrs::filter::{step, FilterConfig, FilterState, GainMatrix};

fn main() {
    let rec = generate_synthetic(SynthProfile::Walking, 30.0, 200.0, 7);
    let config = FilterConfig::default();

    // A single step, showing the intermediate quantities.
    let state = FilterState::new(rec.gt[0], rec.samples[0].t);
    let gains = GainMatrix::uniform(0.01).unwrap();
    let (next, trace) = step(&state, &rec.samples[1], &gains, &config).unwrap();
    println!("residual {:.5?}", trace.residual);
    println!("predicted gravity {:.5?} -> updated {:.5?}", trace.g_pred_b, trace.g_updated_b);
    println!("attitude moved {:.2e} rad\n", rec.gt[0].angle_to(&next.attitude));

    for k in [0.0, 0.0005, 0.002, 0.01, 0.1] {
        let est = run_filter(&BaselineConfig::FixedGainCf { k }, &rec, &config).unwrap();
        let m = compute_metrics(&est, &rec.gt);
        println!("k = {k:<6} roll {:6.3} deg  pitch {:6.3} deg  e {:6.3} deg", m.e_roll, m.e_pitch, m.e);
    }
}
