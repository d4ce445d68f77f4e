//! Synthetic IMU recordings with exact ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::recording::{Placement, Recording};
use crate::error::BenchError;
use crate::filter::{gravity_reference, ImuSample, STANDARD_GRAVITY};
use crate::so3::{EulerAngles, RotationMatrix, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthProfile {
    /// Fixed random attitude, sensor noise only.
    Stationary,
    /// Band-limited attitude motion, no linear acceleration.
    Smooth,
    /// Attitude motion plus body-frame linear acceleration bursts.
    Walking,
}

impl SynthProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthProfile::Stationary => "stationary",
            SynthProfile::Smooth => "smooth",
            SynthProfile::Walking => "walking",
        }
    }

    pub fn config(&self) -> SynthConfig {
        let base = SynthConfig::default();
        match self {
            SynthProfile::Stationary => SynthConfig {
                motion_amplitude: Vec3::zeros(),
                burst_amplitude: 0.0,
                ..base
            },
            SynthProfile::Smooth => SynthConfig {
                burst_amplitude: 0.0,
                ..base
            },
            SynthProfile::Walking => base,
        }
    }
}

impl fmt::Display for SynthProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthProfile {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [SynthProfile::Stationary, SynthProfile::Smooth, SynthProfile::Walking]
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BenchError::Invalid(format!("unknown synthetic profile '{s}'")))
    }
}

/// Generator settings. Angles in radians, rates in rad/s, accelerations in m/s².
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub gyro_noise_std: f64,
    /// Per-axis bias drawn once per recording from `N(0, gyro_bias_std²)`.
    pub gyro_bias_std: f64,
    pub acc_noise_std: f64,
    /// Peak roll, pitch and yaw excursion of the attitude motion.
    pub motion_amplitude: Vec3,
    /// Highest frequency (Hz) of the attitude motion.
    pub motion_max_freq: f64,
    pub motion_components: usize,
    /// Largest burst peak per axis; each burst draws its peak from `U(0, max)`
    /// with a random sign.
    pub burst_amplitude: f64,
    /// Expected bursts per second per axis.
    pub burst_rate: f64,
    pub burst_duration: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            gyro_noise_std: 0.01,
            gyro_bias_std: 0.005,
            acc_noise_std: 0.05,
            motion_amplitude: Vec3::new(0.4, 0.4, 1.0),
            motion_max_freq: 0.5,
            motion_components: 3,
            burst_amplitude: 3.0,
            burst_rate: 0.4,
            burst_duration: (0.3, 1.5),
        }
    }
}

impl SynthConfig {
    /// Noise, bias and bursts disabled; the attitude motion is kept.
    pub fn noiseless(mut self) -> Self {
        self.gyro_noise_std = 0.0;
        self.gyro_bias_std = 0.0;
        self.acc_noise_std = 0.0;
        self.burst_amplitude = 0.0;
        self
    }
}

/// Sum of sinusoids with its first derivative.
#[derive(Clone, Debug)]
struct Waveform {
    offset: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl Waveform {
    fn random(rng: &mut ChaCha8Rng, offset: f64, amplitude: f64, max_freq: f64, n: usize) -> Self {
        let terms = if amplitude == 0.0 || n == 0 {
            Vec::new()
        } else {
            (0..n)
                .map(|_| {
                    let a = amplitude / n as f64 * rng.gen_range(0.5..1.0);
                    let w = 2.0 * PI * rng.gen_range(0.1 * max_freq..max_freq);
                    (a, w, rng.gen_range(0.0..2.0 * PI))
                })
                .collect()
        };
        Waveform { offset, terms }
    }

    fn value(&self, t: f64) -> f64 {
        self.offset + self.terms.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum::<f64>()
    }

    fn rate(&self, t: f64) -> f64 {
        self.terms.iter().map(|(a, w, p)| a * w * (w * t + p).cos()).sum()
    }
}

/// Smooth raised-cosine pulses.
#[derive(Clone, Debug, Default)]
struct Bursts {
    pulses: Vec<(f64, f64, f64)>,
}

impl Bursts {
    fn random(rng: &mut ChaCha8Rng, duration: f64, cfg: &SynthConfig) -> Self {
        let mut pulses = Vec::new();
        if cfg.burst_amplitude <= 0.0 || cfg.burst_rate <= 0.0 {
            return Bursts { pulses };
        }
        let mut t = 0.0;
        loop {
            t += -(1.0 - rng.gen::<f64>()).ln() / cfg.burst_rate;
            if t >= duration {
                break;
            }
            let len = rng.gen_range(cfg.burst_duration.0..=cfg.burst_duration.1);
            let peak = rng.gen_range(0.0..=cfg.burst_amplitude) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            pulses.push((t, len, peak));
            t += len;
        }
        Bursts { pulses }
    }

    fn value(&self, t: f64) -> f64 {
        self.pulses
            .iter()
            .filter(|(start, len, _)| t >= *start && t < start + len)
            .map(|(start, len, peak)| peak * 0.5 * (1.0 - (2.0 * PI * (t - start) / len).cos()))
            .sum()
    }
}

/// Body angular rate for z-y-x Euler angles and their rates.
pub fn body_rate(e: &EulerAngles, rate: &EulerAngles) -> Vec3 {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    Vec3::new(
        rate.roll - rate.yaw * sp,
        rate.pitch * cr + rate.yaw * cp * sr,
        -rate.pitch * sr + rate.yaw * cp * cr,
    )
}

pub fn generate_synthetic(profile: SynthProfile, duration_s: f64, rate_hz: f64, seed: u64) -> Recording {
    generate_with(&profile.config(), profile, duration_s, rate_hz, seed)
}

/// Builds a recording of `floor(duration * rate) + 1` samples. Each gyro
/// sample is the body rate at the middle of the interval ending at its
/// timestamp, plus bias and noise.
pub fn generate_with(cfg: &SynthConfig, profile: SynthProfile, duration_s: f64, rate_hz: f64, seed: u64) -> Recording {
    assert!(duration_s > 0.0 && rate_hz > 0.0, "duration and rate must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = EulerAngles::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-PI..PI));
    let n_comp = cfg.motion_components;
    let fmax = cfg.motion_max_freq;
    let roll = Waveform::random(&mut rng, base.roll, cfg.motion_amplitude.x, fmax, n_comp);
    let pitch = Waveform::random(&mut rng, base.pitch, cfg.motion_amplitude.y, fmax, n_comp);
    let yaw = Waveform::random(&mut rng, base.yaw, cfg.motion_amplitude.z, fmax, n_comp);
    let bursts = [
        Bursts::random(&mut rng, duration_s, cfg),
        Bursts::random(&mut rng, duration_s, cfg),
        Bursts::random(&mut rng, duration_s, cfg),
    ];
    let bias_dist = Normal::new(0.0, cfg.gyro_bias_std).expect("finite std");
    let bias = Vec3::from_fn(|_, _| bias_dist.sample(&mut rng));
    let gyro_noise = Normal::new(0.0, cfg.gyro_noise_std).expect("finite std");
    let acc_noise = Normal::new(0.0, cfg.acc_noise_std).expect("finite std");

    let angles = |t: f64| EulerAngles::new(roll.value(t), pitch.value(t), yaw.value(t));
    let rates = |t: f64| EulerAngles::new(roll.rate(t), pitch.rate(t), yaw.rate(t));

    let dt = 1.0 / rate_hz;
    let n = (duration_s * rate_hz).floor() as usize + 1;
    let mut samples = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let r = RotationMatrix::from_euler(&angles(t));
        let tm = t - 0.5 * dt;
        let omega = body_rate(&angles(tm), &rates(tm));
        let gyro = omega + bias + Vec3::from_fn(|_, _| gyro_noise.sample(&mut rng));
        let linear = Vec3::new(bursts[0].value(t), bursts[1].value(t), bursts[2].value(t));
        let acc = -STANDARD_GRAVITY * r.to_body(&gravity_reference())
            + linear
            + Vec3::from_fn(|_, _| acc_noise.sample(&mut rng));
        samples.push(ImuSample::new(t, gyro, acc));
        gt.push(r);
    }
    Recording {
        id: format!("synth-{}-{seed}", profile.as_str()),
        placement: Placement::Synthetic,
        samples,
        gt,
        rate_hz,
    }
}
