//! Evaluates a freshly initialized gain network, back-propagates through it
//! and round-trips its parameter file.

use dae_ahrs::gain_net::{augment, load_params, save_params, soft_threshold, GainNetParams};
use dae_ahrs::so3::Vec3;

fn main() {
    println!("augment(2) = {:?}", augment(2.0));
    println!("soft_threshold(0) = {:.6}, (0.5) = {}", soft_threshold(0.0), soft_threshold(0.5));

    let params = GainNetParams::init(3);
    println!("{} parameters", params.num_params());
    for r in [-0.2, -0.02, 0.0, 0.02, 0.2] {
        let k = params.forward(&Vec3::new(r, r, r)).unwrap();
        println!("residual {r:>6}: gains ({:.4}, {:.4}, {:.4})", k.k_fx, k.k_fy, k.k_fz);
    }

    // Gradient of k_fx + k_fy + k_fz with respect to every parameter.
    let mut grads = params.zeros_like();
    let dr = params.backward(&Vec3::new(0.05, -0.03, 0.01), &Vec3::new(1.0, 1.0, 1.0), &mut grads).unwrap();
    println!("d(sum of gains)/d(residual) = {dr:.4?}, |d/dparams| = {:.4e}", grads.norm());

    let bytes = save_params(&params);
    let again = load_params(&bytes).unwrap();
    println!("saved {} bytes, round trip exact: {}", bytes.len(), again == params);
}
