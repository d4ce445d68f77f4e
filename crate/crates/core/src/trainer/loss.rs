//! Gravity-angle RMS loss and its exact gradient through the unrolled filter.

use crate::error::{FilterError, TrainError};
use crate::filter::{
    gravity_reference, step, FilterConfig, FilterState, GainProvider, ImuSample, StepAdjoint, StepTrace,
};
use crate::gain_net::GainNetParams;
use crate::so3::{Mat3, RotationMatrix, Vec3};

/// Margin kept between the `acos` argument and `+-1`.
pub const ACOS_MARGIN: f64 = 1e-9;

/// Angle between two unit vectors with the `acos` argument clamped.
pub fn gravity_angle(g_gt: &Vec3, g_est: &Vec3) -> f64 {
    angle_and_sine(g_gt, g_est).0
}

/// `(acos(clamp(a.b)), sin of that angle)`. Away from the clamp the angle
/// comes from `atan2(|a x b|, a.b)`, which keeps full relative precision for
/// small angles where `acos` of a rounded dot product does not.
fn angle_and_sine(a: &Vec3, b: &Vec3) -> (f64, f64) {
    let c = a.dot(b);
    let limit = 1.0 - ACOS_MARGIN;
    if c.abs() >= limit {
        let c = c.clamp(-limit, limit);
        (c.acos(), (1.0 - c * c).sqrt())
    } else {
        let s = a.cross(b).norm();
        (s.atan2(c), s)
    }
}

/// Root mean square; zero for an empty slice.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Ground-truth body-frame gravity direction.
pub fn gt_gravity(gt: &RotationMatrix) -> Vec3 {
    gt.to_body(&gravity_reference())
}

/// Per-step gravity angles of a filter run against ground truth. `gt[0]`
/// belongs to the initial sample, so the first angle compares `gt[1]`.
pub fn gravity_angles(traces: &[StepTrace], gt: &[RotationMatrix]) -> Vec<f64> {
    traces
        .iter()
        .zip(&gt[1..])
        .map(|(tr, r)| gravity_angle(&gt_gravity(r), &tr.g_updated_b))
        .collect()
}

/// Runs the filter from `initial` and returns the loss with the states
/// and traces needed for the backward pass.
pub struct Unroll {
    pub states: Vec<FilterState>,
    pub traces: Vec<StepTrace>,
    pub angles: Vec<f64>,
    pub loss: f64,
}

pub fn unroll<G: GainProvider + ?Sized>(
    initial: RotationMatrix,
    samples: &[ImuSample],
    gt: &[RotationMatrix],
    gains: &G,
    config: &FilterConfig,
) -> Result<Unroll, FilterError> {
    assert_eq!(samples.len(), gt.len(), "samples and ground truth must align");
    let n = samples.len().saturating_sub(1);
    let mut states = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    if let Some(first) = samples.first() {
        let mut state = FilterState::new(initial, first.t);
        for sample in &samples[1..] {
            let (next, trace) = step(&state, sample, gains, config)?;
            states.push(state);
            traces.push(trace);
            state = next;
        }
    }
    let angles = gravity_angles(&traces, gt);
    let loss = rms(&angles);
    Ok(Unroll {
        states,
        traces,
        angles,
        loss,
    })
}

/// Loss of one run with any gain source.
pub fn gravity_loss<G: GainProvider + ?Sized>(
    initial: RotationMatrix,
    samples: &[ImuSample],
    gt: &[RotationMatrix],
    gains: &G,
    config: &FilterConfig,
) -> Result<f64, FilterError> {
    unroll(initial, samples, gt, gains, config).map(|u| u.loss)
}

/// Loss and its gradient with respect to every network parameter, by
/// reverse-mode differentiation through the whole run (the attitude carried
/// between steps included).
pub fn loss_and_gradient(
    params: &GainNetParams,
    initial: RotationMatrix,
    samples: &[ImuSample],
    gt: &[RotationMatrix],
    config: &FilterConfig,
) -> Result<(f64, GainNetParams), TrainError> {
    let fwd = unroll(initial, samples, gt, params, config)?;
    let mut grads = params.zeros_like();
    let n = fwd.traces.len();
    if n == 0 || fwd.loss == 0.0 {
        return Ok((fwd.loss, grads));
    }
    let scale = 1.0 / (n as f64 * fwd.loss);

    let mut attitude_bar = Mat3::zeros();
    for k in (0..n).rev() {
        let trace = &fwd.traces[k];
        let g_gt = gt_gravity(&gt[k + 1]);
        // d acos(c) / dc evaluated at the clamped argument.
        let d_angle = -1.0 / angle_and_sine(&g_gt, &trace.g_updated_b).1;
        let gravity_bar = g_gt * (scale * fwd.angles[k] * d_angle);
        let adj = StepAdjoint {
            attitude_bar,
            gravity_bar,
        };
        attitude_bar = adj.backward(&fwd.states[k], &samples[k + 1], trace, config, |res, k_bar| {
            Ok(params.backward(res, k_bar, &mut grads)?)
        })?;
    }
    Ok((fwd.loss, grads))
}
