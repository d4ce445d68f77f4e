//! Complementary attitude filter with a per-axis accelerometer update.
//!
//! One step runs: gyro propagation (Euler step plus orthogonalization),
//! gravity prediction in the body frame, accelerometer residual, gain lookup,
//! component-wise gravity update, and a Triad reconstruction of the attitude
//! from the updated gravity direction.
//!
//! Frame convention: `R` maps body to reference (`v_r = R v_b`), so the
//! predicted body-frame gravity is `Rᵀ g_r`.

mod adjoint;
mod triad;

pub use adjoint::StepAdjoint;
pub use triad::{triad, triad_reconstruct, TriadAnchor, TriadFrame, TriadFrames, DEGENERATE_TRIAD_CROSS};

use crate::error::FilterError;
use crate::so3::{polar_factor, skew, Mat3, PolarFactor, RotationMatrix, Vec3};

/// Nominal gravity magnitude used to turn specific force into a unit direction.
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Longest accepted sample interval; larger gaps indicate dropped samples.
pub const MAX_DT: f64 = 0.1;

/// Updated gravity vectors shorter than this cannot be normalized.
pub const DEGENERATE_GRAVITY_NORM: f64 = 1e-6;

/// Unit gravity direction in the NED reference frame.
pub fn gravity_reference() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// One timestamped IMU reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    /// Seconds.
    pub t: f64,
    /// Angular rate, rad/s, body frame.
    pub gyro: Vec3,
    /// Specific force, m/s², body frame.
    pub acc: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vec3, acc: Vec3) -> Self {
        ImuSample { t, gyro, acc }
    }

    /// Accelerometer reading mapped onto the gravity-direction convention:
    /// at rest this equals the body-frame unit gravity `Rᵀ g_r`.
    ///
    /// Training and inference both go through this function, so the residual
    /// scale seen by the gain network is identical in both.
    pub fn gravity_observation(&self) -> Vec3 {
        -self.acc / STANDARD_GRAVITY
    }
}

/// Filter state carried between steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    pub attitude: RotationMatrix,
    pub t_prev: f64,
}

impl FilterState {
    pub fn new(attitude: RotationMatrix, t_prev: f64) -> Self {
        FilterState { attitude, t_prev }
    }
}

/// Diagonal accelerometer weights, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainMatrix {
    pub k_fx: f64,
    pub k_fy: f64,
    pub k_fz: f64,
}

impl GainMatrix {
    pub fn new(k_fx: f64, k_fy: f64, k_fz: f64) -> Result<Self, FilterError> {
        for value in [k_fx, k_fy, k_fz] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FilterError::GainOutOfRange { value });
            }
        }
        Ok(GainMatrix { k_fx, k_fy, k_fz })
    }

    pub fn uniform(k: f64) -> Result<Self, FilterError> {
        Self::new(k, k, k)
    }

    pub fn zero() -> Self {
        GainMatrix { k_fx: 0.0, k_fy: 0.0, k_fz: 0.0 }
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.k_fx, self.k_fy, self.k_fz)
    }
}

/// Source of accelerometer weights for a residual.
pub trait GainProvider {
    fn gains(&self, residual: &Vec3) -> Result<GainMatrix, FilterError>;
}

/// A constant gain matrix is the fixed-gain complementary filter.
impl GainProvider for GainMatrix {
    fn gains(&self, _residual: &Vec3) -> Result<GainMatrix, FilterError> {
        Ok(*self)
    }
}

impl<F> GainProvider for F
where
    F: Fn(&Vec3) -> Result<GainMatrix, FilterError>,
{
    fn gains(&self, residual: &Vec3) -> Result<GainMatrix, FilterError> {
        self(residual)
    }
}

/// Everything one step computed, in evaluation order.
#[derive(Clone, Copy, Debug)]
pub struct StepTrace {
    /// Gyro-propagated attitude.
    pub r_g: RotationMatrix,
    /// Accelerometer reading in the gravity-direction convention.
    pub acc_used: Vec3,
    pub g_pred_b: Vec3,
    pub residual: Vec3,
    pub gains: GainMatrix,
    /// Unit updated gravity; equals `g_pred_b` when no update was applied.
    pub g_updated_b: Vec3,
    pub r_u: RotationMatrix,
    pub update: UpdateOutcome,
}

/// How the accelerometer update ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    /// All gains exactly zero: the step is pure gyro integration.
    ZeroGain,
    /// Gravity parallel to the pseudo vector; fell back to the gyro attitude.
    DegenerateTriad,
}

impl UpdateOutcome {
    pub fn applied(&self) -> bool {
        matches!(self, UpdateOutcome::Applied)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct FilterConfig {
    pub anchor: TriadAnchor,
}

fn checked_dt(state: &FilterState, sample: &ImuSample) -> Result<f64, FilterError> {
    let dt = sample.t - state.t_prev;
    if !(dt > 0.0) {
        return Err(FilterError::NonMonotonicTime { dt });
    }
    if dt > MAX_DT * (1.0 + 1e-9) {
        return Err(FilterError::DtTooLarge { dt, max: MAX_DT });
    }
    Ok(dt)
}

/// Raw Euler step `R + R skew(w) dt`, before orthogonalization.
pub fn euler_increment(attitude: &RotationMatrix, gyro: &Vec3, dt: f64) -> Mat3 {
    attitude.matrix() * (Mat3::identity() + skew(gyro) * dt)
}

pub(crate) fn propagate_polar(
    state: &FilterState,
    sample: &ImuSample,
) -> Result<(PolarFactor, f64), FilterError> {
    let dt = checked_dt(state, sample)?;
    let raw = euler_increment(&state.attitude, &sample.gyro, dt);
    Ok((polar_factor(&raw)?, dt))
}

/// Gyro-only propagation to the sample time.
pub fn propagate_gyro(state: &FilterState, sample: &ImuSample) -> Result<RotationMatrix, FilterError> {
    propagate_polar(state, sample).map(|(p, _)| p.output)
}

/// Reference-frame gravity expressed in the body frame, `Rᵀ g_r`.
pub fn predict_gravity(r_g: &RotationMatrix, g_r: &Vec3) -> Vec3 {
    r_g.to_body(g_r)
}

pub fn compute_residual(acc_used: &Vec3, g_pred_b: &Vec3) -> Vec3 {
    acc_used - g_pred_b
}

/// Component-wise update `g + K (acc - g)`, before normalization.
pub fn blend_gravity(g_pred_b: &Vec3, acc_used: &Vec3, gains: &GainMatrix) -> Vec3 {
    g_pred_b + gains.as_vec().component_mul(&(acc_used - g_pred_b))
}

/// Component-wise update followed by normalization to a unit direction.
pub fn update_gravity(
    g_pred_b: &Vec3,
    acc_used: &Vec3,
    gains: &GainMatrix,
) -> Result<Vec3, FilterError> {
    let raw = blend_gravity(g_pred_b, acc_used, gains);
    let norm = raw.norm();
    if !(norm >= DEGENERATE_GRAVITY_NORM) {
        return Err(FilterError::DegenerateGravity { norm });
    }
    Ok(raw / norm)
}

/// One full filter iteration.
pub fn step<G: GainProvider + ?Sized>(
    state: &FilterState,
    sample: &ImuSample,
    gains: &G,
    config: &FilterConfig,
) -> Result<(FilterState, StepTrace), FilterError> {
    let g_r = gravity_reference();
    let r_g = propagate_gyro(state, sample)?;
    let acc_used = sample.gravity_observation();
    let g_pred_b = predict_gravity(&r_g, &g_r);
    let residual = compute_residual(&acc_used, &g_pred_b);
    let k = gains.gains(&residual)?;
    let (r_u, g_updated_b, update) = if k == GainMatrix::zero() {
        (r_g, g_pred_b, UpdateOutcome::ZeroGain)
    } else {
        let g_a = update_gravity(&g_pred_b, &acc_used, &k)?;
        match triad_reconstruct(&g_a, &r_g, &g_r, config.anchor) {
            Ok(r_u) => (r_u, g_a, UpdateOutcome::Applied),
            Err(FilterError::DegenerateTriad { .. }) => (r_g, g_pred_b, UpdateOutcome::DegenerateTriad),
            Err(e) => return Err(e),
        }
    };
    let trace = StepTrace {
        r_g,
        acc_used,
        g_pred_b,
        residual,
        gains: k,
        g_updated_b,
        r_u,
        update,
    };
    Ok((FilterState::new(r_u, sample.t), trace))
}

/// Runs the filter over a sample sequence from `initial`; the first sample is
/// consumed as the time origin and its attitude is `initial`.
pub fn run<G: GainProvider + ?Sized>(
    initial: RotationMatrix,
    samples: &[ImuSample],
    gains: &G,
    config: &FilterConfig,
) -> Result<Vec<StepTrace>, FilterError> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let mut state = FilterState::new(initial, first.t);
    let mut traces = Vec::with_capacity(samples.len().saturating_sub(1));
    for sample in &samples[1..] {
        let (next, trace) = step(&state, sample, gains, config)?;
        traces.push(trace);
        state = next;
    }
    Ok(traces)
}
