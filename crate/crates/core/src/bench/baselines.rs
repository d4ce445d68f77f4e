//! Attitude filters compared against the learned gains.
//!
//! Madgwick and Mahony are the IMU-only forms (no magnetometer, no gyro bias
//! integration). Both carry a unit quaternion `(w, x, y, z)` rotating body
//! vectors into the NED reference frame, and measure gravity through
//! [`ImuSample::gravity_observation`], so "down" is `+z` on both sides.

use std::fmt;
use std::str::FromStr;

use crate::bench::Recording;
use crate::error::{BenchError, FilterError};
use crate::filter::{self, FilterConfig, GainMatrix, ImuSample};
use crate::gain_net::GainNetParams;
use crate::so3::{RotationMatrix, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    FixedGainCf,
    Madgwick,
    Mahony,
    Dae,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::FixedGainCf, Algorithm::Madgwick, Algorithm::Mahony, Algorithm::Dae];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::FixedGainCf => "fixed-gain-cf",
            Algorithm::Madgwick => "madgwick",
            Algorithm::Mahony => "mahony",
            Algorithm::Dae => "dae",
        }
    }

    /// Search grid used when none is given: 20 log-spaced points.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            Algorithm::FixedGainCf => log_grid(1e-4, 0.5, 20),
            Algorithm::Madgwick => log_grid(1e-3, 0.5, 20),
            Algorithm::Mahony => log_grid(0.1, 10.0, 20),
            Algorithm::Dae => Vec::new(),
        }
    }

    /// Configuration for a single tunable value.
    pub fn with_parameter(&self, value: f64) -> Result<BaselineConfig, BenchError> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(BenchError::Invalid(format!("{}: parameter {value} must be finite and >= 0", self.as_str())));
        }
        match self {
            Algorithm::FixedGainCf => {
                if value > 1.0 {
                    return Err(BenchError::Invalid(format!("fixed-gain-cf: gain {value} exceeds 1")));
                }
                Ok(BaselineConfig::FixedGainCf { k: value })
            }
            Algorithm::Madgwick => Ok(BaselineConfig::Madgwick { beta: value }),
            Algorithm::Mahony => Ok(BaselineConfig::Mahony { kp: value, ki: 0.0 }),
            Algorithm::Dae => Err(BenchError::Invalid("dae has no scalar parameter to tune".into())),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| BenchError::Invalid(format!("unknown algorithm '{s}'")))
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log scale.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineConfig {
    /// Same uniform gain on every axis.
    FixedGainCf { k: f64 },
    Madgwick { beta: f64 },
    Mahony { kp: f64, ki: f64 },
    Dae(Box<GainNetParams>),
}

impl BaselineConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            BaselineConfig::FixedGainCf { .. } => Algorithm::FixedGainCf,
            BaselineConfig::Madgwick { .. } => Algorithm::Madgwick,
            BaselineConfig::Mahony { .. } => Algorithm::Mahony,
            BaselineConfig::Dae(_) => Algorithm::Dae,
        }
    }

    /// Short human-readable parameter summary.
    pub fn describe(&self) -> String {
        match self {
            BaselineConfig::FixedGainCf { k } => format!("k={k}"),
            BaselineConfig::Madgwick { beta } => format!("beta={beta}"),
            BaselineConfig::Mahony { kp, ki } => format!("kp={kp} ki={ki}"),
            BaselineConfig::Dae(p) => format!("{} parameters", p.num_params()),
        }
    }
}

type Quat = [f64; 4];

fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn quat_normalize(q: &Quat) -> Quat {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// `½ q ⊗ (0, ω)`.
fn quat_rate(q: &Quat, w: &Vec3) -> Quat {
    let d = quat_mul(q, &[0.0, w.x, w.y, w.z]);
    [0.5 * d[0], 0.5 * d[1], 0.5 * d[2], 0.5 * d[3]]
}

/// Reference down axis seen in the body frame, `Rᵀ e_z`.
fn body_down(q: &Quat) -> Vec3 {
    let [w, x, y, z] = *q;
    Vec3::new(2.0 * (x * z - w * y), 2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
}

fn to_rotation(q: &Quat) -> RotationMatrix {
    RotationMatrix::from_quaternion(q[0], q[1], q[2], q[3])
}

fn unit_observation(sample: &ImuSample) -> Option<Vec3> {
    let a = sample.gravity_observation();
    let n = a.norm();
    (n > 0.0 && n.is_finite()).then(|| a / n)
}

fn checked_dt(t_prev: f64, t: f64) -> Result<f64, BenchError> {
    let dt = t - t_prev;
    if !(dt > 0.0) {
        return Err(FilterError::NonMonotonicTime { dt }.into());
    }
    Ok(dt)
}

/// One Madgwick step: gyro rate minus `beta` times the normalized gradient
/// of `|Rᵀ e_z − a|²`.
fn madgwick_step(q: &Quat, sample: &ImuSample, beta: f64, dt: f64) -> Quat {
    let mut qdot = quat_rate(q, &sample.gyro);
    if let (Some(a), true) = (unit_observation(sample), beta > 0.0) {
        let [w, x, y, z] = *q;
        let f = body_down(q) - a;
        // Columns are d/dw, d/dx, d/dy, d/dz of the three components of f.
        let grad = [
            -2.0 * y * f.x + 2.0 * x * f.y,
            2.0 * z * f.x + 2.0 * w * f.y - 4.0 * x * f.z,
            -2.0 * w * f.x + 2.0 * z * f.y - 4.0 * y * f.z,
            2.0 * x * f.x + 2.0 * y * f.y,
        ];
        let n = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if n > 0.0 {
            for i in 0..4 {
                qdot[i] -= beta * grad[i] / n;
            }
        }
    }
    quat_normalize(&[q[0] + qdot[0] * dt, q[1] + qdot[1] * dt, q[2] + qdot[2] * dt, q[3] + qdot[3] * dt])
}

/// One Mahony step: proportional-integral feedback on `a × Rᵀ e_z`.
fn mahony_step(q: &Quat, integral: &mut Vec3, sample: &ImuSample, kp: f64, ki: f64, dt: f64) -> Quat {
    let mut w = sample.gyro;
    if let Some(a) = unit_observation(sample) {
        let e = a.cross(&body_down(q));
        if ki > 0.0 {
            *integral += e * dt;
        }
        w += e * kp + *integral * ki;
    }
    let qdot = quat_rate(q, &w);
    quat_normalize(&[q[0] + qdot[0] * dt, q[1] + qdot[1] * dt, q[2] + qdot[2] * dt, q[3] + qdot[3] * dt])
}

fn run_quaternion_filter(
    initial: &RotationMatrix,
    samples: &[ImuSample],
    mut step: impl FnMut(&Quat, &ImuSample, f64) -> Quat,
) -> Result<Vec<RotationMatrix>, BenchError> {
    let mut out = Vec::with_capacity(samples.len());
    let Some(first) = samples.first() else {
        return Ok(out);
    };
    let mut q = initial.to_quaternion();
    let mut t_prev = first.t;
    out.push(*initial);
    for s in &samples[1..] {
        let dt = checked_dt(t_prev, s.t)?;
        q = step(&q, s, dt);
        if !q.iter().all(|v| v.is_finite()) {
            return Err(BenchError::NonFinite(format!("filter state became non-finite at t = {}", s.t)));
        }
        out.push(to_rotation(&q));
        t_prev = s.t;
    }
    Ok(out)
}

/// Runs `config` from `initial` over `samples`; one attitude per sample, the
/// first being `initial` itself.
pub fn run_filter_from(
    config: &BaselineConfig,
    initial: RotationMatrix,
    samples: &[ImuSample],
    filter_config: &FilterConfig,
) -> Result<Vec<RotationMatrix>, BenchError> {
    let from_traces = |traces: Vec<filter::StepTrace>| {
        let mut out = Vec::with_capacity(traces.len() + 1);
        if !samples.is_empty() {
            out.push(initial);
        }
        out.extend(traces.iter().map(|t| t.r_u));
        out
    };
    match config {
        BaselineConfig::FixedGainCf { k } => {
            let gains = GainMatrix::uniform(*k)?;
            Ok(from_traces(filter::run(initial, samples, &gains, filter_config)?))
        }
        BaselineConfig::Dae(params) => Ok(from_traces(filter::run(initial, samples, params.as_ref(), filter_config)?)),
        BaselineConfig::Madgwick { beta } => {
            run_quaternion_filter(&initial, samples, |q, s, dt| madgwick_step(q, s, *beta, dt))
        }
        BaselineConfig::Mahony { kp, ki } => {
            let mut integral = Vec3::zeros();
            run_quaternion_filter(&initial, samples, |q, s, dt| mahony_step(q, &mut integral, s, *kp, *ki, dt))
        }
    }
}

/// Runs `config` over a recording, initialized from ground truth at the first
/// sample.
pub fn run_filter(
    config: &BaselineConfig,
    recording: &Recording,
    filter_config: &FilterConfig,
) -> Result<Vec<RotationMatrix>, BenchError> {
    let initial = *recording
        .gt
        .first()
        .ok_or_else(|| BenchError::Invalid(format!("recording '{}' is empty", recording.id)))?;
    run_filter_from(config, initial, &recording.samples, filter_config)
}
