//! Reverse-mode derivative of one filter step.
//!
//! The step is recomputed from the previous state and the recorded gains, so
//! the forward pass only has to keep its `StepTrace`s.

use super::triad::TriadFrames;
use super::{
    blend_gravity, compute_residual, gravity_reference, predict_gravity, propagate_polar,
    FilterConfig, FilterState, ImuSample, StepTrace, TriadAnchor,
};
use crate::error::FilterError;
use crate::so3::{skew, Mat3, Vec3};

/// Cotangents arriving at the outputs of one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepAdjoint {
    /// Gradient on the new attitude `R_u`.
    pub attitude_bar: Mat3,
    /// Gradient on the unit updated gravity `g_updated_b`.
    pub gravity_bar: Vec3,
}

impl StepAdjoint {
    /// Back-propagates through the step that produced `trace` from `prev`.
    ///
    /// `gain_adjoint(residual, gains_bar)` must return the gradient on the
    /// residual through the gain source (and may accumulate parameter
    /// gradients as a side effect). The result is the gradient on the
    /// previous attitude.
    pub fn backward<F>(
        &self,
        prev: &FilterState,
        sample: &ImuSample,
        trace: &StepTrace,
        config: &FilterConfig,
        mut gain_adjoint: F,
    ) -> Result<Mat3, FilterError>
    where
        F: FnMut(&Vec3, &Vec3) -> Result<Vec3, FilterError>,
    {
        let (polar, dt) = propagate_polar(prev, sample)?;
        let r_g = polar.output;
        let g_r = gravity_reference();
        let g_pred = predict_gravity(&r_g, &g_r);

        let mut r_g_bar = Mat3::zeros();
        let g_pred_bar = if !trace.update.applied() {
            r_g_bar += self.attitude_bar;
            self.gravity_bar
        } else {
            let acc_used = sample.gravity_observation();
            let residual = compute_residual(&acc_used, &g_pred);
            let raw = blend_gravity(&g_pred, &acc_used, &trace.gains);
            let norm = raw.norm();
            let g_a = raw / norm;

            let (m_ref, m_body) = config.anchor.pseudo_vectors(&r_g);
            let frames = TriadFrames::solve(&g_r, &m_ref, &g_a, &m_body)?;
            let [_, m_ref_bar, g_body_bar, m_body_bar] = frames.adjoint(&self.attitude_bar);
            match config.anchor {
                TriadAnchor::BodyForward => r_g_bar += m_ref_bar * Vec3::x().transpose(),
                TriadAnchor::ReferenceNorth => r_g_bar += Vec3::x() * m_body_bar.transpose(),
            }

            let g_a_bar = self.gravity_bar + g_body_bar;
            let raw_bar = (g_a_bar - g_a * g_a.dot(&g_a_bar)) / norm;
            let k = trace.gains.as_vec();
            let gains_bar = raw_bar.component_mul(&residual);
            let residual_bar = gain_adjoint(&residual, &gains_bar)?;
            raw_bar.component_mul(&(Vec3::repeat(1.0) - k)) - residual_bar
        };

        r_g_bar += g_r * g_pred_bar.transpose();
        let raw_bar = polar.adjoint(&r_g_bar);
        Ok(raw_bar * (Mat3::identity() + skew(&sample.gyro) * dt).transpose())
    }
}
