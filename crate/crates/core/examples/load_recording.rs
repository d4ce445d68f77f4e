//! Writes a synthetic recording in the CSV layout, loads it back and checks
//! it. Pass a path to load your own file instead.

use std::path::PathBuf;

use dae_ahrs::bench::{generate_synthetic, load_recording, save_recording, Placement, SynthProfile};

fn main() {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("dae-example-recording.csv");
            save_recording(&p, &generate_synthetic(SynthProfile::Smooth, 5.0, 200.0, 1)).unwrap();
            p
        }
    };
    match load_recording(&path, Placement::Synthetic) {
        Ok(rec) => {
            println!("{}: {} samples, {:.1} s at {:.1} Hz", rec.id, rec.len(), rec.duration(), rec.rate_hz);
            let s = &rec.samples[0];
            println!("first sample: t {} gyro {:.4?} acc {:.4?}", s.t, s.gyro, s.acc);
            let e = rec.gt[0].to_euler();
            println!("first attitude: roll {:.3} pitch {:.3} yaw {:.3} rad", e.roll, e.pitch, e.yaw);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
