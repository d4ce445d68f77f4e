//! Rotation helpers: Euler angles, quaternions and re-orthogonalization.

use dae_ahrs::so3::{orthogonalize, skew, EulerAngles, Mat3, RotationMatrix, Vec3};

fn main() {
    let r = RotationMatrix::from_euler(&EulerAngles::new(0.1, -0.2, 1.5));
    let e = r.to_euler();
    println!("roll {:.3} pitch {:.3} yaw {:.3}", e.roll, e.pitch, e.yaw);

    let q = r.to_quaternion();
    println!("quaternion (w, x, y, z) = {q:.6?}");
    let back = RotationMatrix::from_quaternion(q[0], q[1], q[2], q[3]);
    println!("quaternion round trip error {:.2e} rad", r.angle_to(&back));

    // Gravity in the body frame for this attitude.
    let down = r.to_body(&Vec3::z());
    println!("body-frame down {down:.4?}");

    // An Euler integration step drifts off SO(3); the polar factor pulls it back.
    let w = Vec3::new(0.3, -0.1, 0.8);
    let raw = r.matrix() * (Mat3::identity() + skew(&w) * 0.01);
    println!("raw step |RᵀR - I| = {:.2e}", (raw.transpose() * raw - Mat3::identity()).norm());
    let fixed = orthogonalize(&raw).expect("well-conditioned step");
    println!("after orthogonalize  = {:.2e}", fixed.orthogonality_error());
}
