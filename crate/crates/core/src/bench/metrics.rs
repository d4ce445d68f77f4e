//! Roll/pitch error measures and the gravity-direction loss of an attitude
//! sequence.

use crate::so3::{wrap_pi, RotationMatrix};
use crate::trainer::loss::{gravity_angle, gt_gravity, rms};

/// RMS roll and pitch errors of one run, degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub e_roll: f64,
    pub e_pitch: f64,
    pub e: f64,
}

impl Metrics {
    pub fn new(e_roll: f64, e_pitch: f64) -> Self {
        Metrics {
            e_roll,
            e_pitch,
            e: e_roll.hypot(e_pitch),
        }
    }

    /// Component-wise mean of the roll and pitch errors; `e` is recomputed
    /// from the means so every row stays self-consistent.
    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        Metrics::new(
            items.iter().map(|m| m.e_roll).sum::<f64>() / n,
            items.iter().map(|m| m.e_pitch).sum::<f64>() / n,
        )
    }
}

/// Wrapped roll and pitch differences, degrees, one per sample.
pub fn angle_errors(estimated: &[RotationMatrix], gt: &[RotationMatrix]) -> Vec<(f64, f64)> {
    assert_eq!(estimated.len(), gt.len(), "estimate and ground truth must align");
    estimated
        .iter()
        .zip(gt)
        .map(|(e, g)| {
            let (e, g) = (e.to_euler(), g.to_euler());
            (wrap_pi(e.roll - g.roll).to_degrees(), wrap_pi(e.pitch - g.pitch).to_degrees())
        })
        .collect()
}

/// Wraps to `(-180, 180]`.
pub fn wrap_deg(angle: f64) -> f64 {
    let a = angle % 360.0;
    if a <= -180.0 {
        a + 360.0
    } else if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// RMS of wrapped roll/pitch differences in degrees.
pub fn metrics_from_errors(errors: &[(f64, f64)]) -> Metrics {
    let roll: Vec<f64> = errors.iter().map(|e| wrap_deg(e.0)).collect();
    let pitch: Vec<f64> = errors.iter().map(|e| wrap_deg(e.1)).collect();
    Metrics::new(rms(&roll), rms(&pitch))
}

pub fn compute_metrics(estimated: &[RotationMatrix], gt: &[RotationMatrix]) -> Metrics {
    metrics_from_errors(&angle_errors(estimated, gt))
}

/// RMS angle between estimated and true gravity directions over every sample
/// after the first (which is the shared initial condition), radians.
pub fn attitude_loss(estimated: &[RotationMatrix], gt: &[RotationMatrix]) -> f64 {
    assert_eq!(estimated.len(), gt.len(), "estimate and ground truth must align");
    let angles: Vec<f64> = estimated
        .iter()
        .zip(gt)
        .skip(1)
        .map(|(e, g)| gravity_angle(&gt_gravity(g), &gt_gravity(e)))
        .collect();
    rms(&angles)
}
