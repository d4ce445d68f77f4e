//! Training of the gain network by backpropagation through the unrolled
//! filter, plus evaluation with the same loss.

pub mod history;
pub mod loss;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use history::{EpochRecord, TrainingHistory};
pub use loss::{gravity_angle, gravity_loss, loss_and_gradient, rms, unroll, ACOS_MARGIN};

use crate::bench::Recording;
use crate::error::TrainError;
use crate::filter::{FilterConfig, GainProvider, ImuSample};
use crate::gain_net::{write_params_file, GainNetParams, InputMode, ResidualMode};
use crate::so3::{EulerAngles, RotationMatrix};

// Stream ids keep the random draws of the different training stages apart.
const STREAM_SPLIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_PERTURB: u64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub segment_length: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Largest initial roll, pitch and yaw error in degrees.
    pub ic_error_max_deg: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub ic_perturb: bool,
    pub residual_mode: ResidualMode,
    pub input_mode: InputMode,
    /// Fraction of segments held out to pick the best epoch.
    pub validation_fraction: f64,
    /// When set, parameters and history are written here after every epoch.
    pub checkpoint_dir: Option<PathBuf>,
    pub filter: FilterConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            segment_length: 8000,
            batch_size: 5,
            learning_rate: 3e-4,
            ic_error_max_deg: 0.1,
            epochs: 50,
            seed: 0,
            shuffle: true,
            ic_perturb: true,
            residual_mode: ResidualMode::SignedClamp,
            input_mode: InputMode::Augmented,
            validation_fraction: 0.1,
            checkpoint_dir: None,
            filter: FilterConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.segment_length < 2 {
            return bad("segment length must be at least 2");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.ic_error_max_deg >= 0.0 && self.ic_error_max_deg.is_finite()) {
            return bad("initial-condition error must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must be in [0, 1)");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// A contiguous slice of one recording.
#[derive(Clone, Debug)]
pub struct TrainingSegment {
    pub recording: String,
    pub offset: usize,
    pub samples: Vec<ImuSample>,
    pub gt: Vec<RotationMatrix>,
    /// Ground truth at the first sample, before any perturbation.
    pub initial: RotationMatrix,
}

impl TrainingSegment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Splits every recording into non-overlapping segments of exactly
/// `segment_length` samples, dropping the remainder. The order is
/// chronological per recording, shuffled by `seed` when `shuffle` is set.
pub fn segment_dataset(recordings: &[Recording], config: &TrainConfig) -> Result<Vec<TrainingSegment>, TrainError> {
    config.validate()?;
    if recordings.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let l = config.segment_length;
    let mut out = Vec::new();
    for rec in recordings {
        if rec.len() < l {
            return Err(TrainError::RecordingTooShort {
                id: rec.id.clone(),
                len: rec.len(),
                segment_length: l,
            });
        }
        for s in 0..rec.len() / l {
            let range = s * l..(s + 1) * l;
            out.push(TrainingSegment {
                recording: rec.id.clone(),
                offset: range.start,
                samples: rec.samples[range.clone()].to_vec(),
                gt: rec.gt[range.clone()].to_vec(),
                initial: rec.gt[range.start],
            });
        }
    }
    if config.shuffle {
        out.shuffle(&mut config.rng(STREAM_SHUFFLE));
    }
    Ok(out)
}

/// `r_gt` composed with a small rotation whose z-y-x angles are each drawn
/// from `U(-max_deg, max_deg)` degrees.
pub fn perturb_initial_condition<R: Rng + ?Sized>(r_gt: &RotationMatrix, max_deg: f64, rng: &mut R) -> RotationMatrix {
    if max_deg <= 0.0 {
        return *r_gt;
    }
    let m = max_deg.to_radians();
    let mut draw = || rng.gen_range(-m..=m);
    let (roll, pitch, yaw) = (draw(), draw(), draw());
    *r_gt * RotationMatrix::from_euler(&EulerAngles::new(roll, pitch, yaw))
}

/// Loss summary of one evaluation or epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    /// Mean of the per-item losses, radians.
    pub j_f: f64,
    /// Loss per segment or recording, radians.
    pub per_item: Vec<f64>,
    pub grad_norm: Option<f64>,
    pub epoch: Option<usize>,
}

impl LossReport {
    fn from_items(per_item: Vec<f64>) -> Self {
        let j_f = if per_item.is_empty() {
            0.0
        } else {
            per_item.iter().sum::<f64>() / per_item.len() as f64
        };
        LossReport {
            j_f,
            per_item,
            grad_norm: None,
            epoch: None,
        }
    }

    pub fn j_f_deg(&self) -> f64 {
        self.j_f.to_degrees()
    }
}

/// Loss and gradient of one segment started from `initial`.
pub fn segment_loss(
    params: &GainNetParams,
    segment: &TrainingSegment,
    initial: RotationMatrix,
    config: &TrainConfig,
) -> Result<(f64, GainNetParams), TrainError> {
    loss_and_gradient(params, initial, &segment.samples, &segment.gt, &config.filter)
}

/// Segment losses from the unperturbed ground-truth start, as used for
/// validation.
pub fn evaluate_segments(
    params: &GainNetParams,
    segments: &[TrainingSegment],
    config: &TrainConfig,
) -> Result<LossReport, TrainError> {
    let per_item = segments
        .iter()
        .map(|s| gravity_loss(s.initial, &s.samples, &s.gt, params, &config.filter))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossReport::from_items(per_item))
}

/// Full-length runs from the ground-truth start; one loss per recording.
pub fn evaluate<G: GainProvider + ?Sized>(
    gains: &G,
    recordings: &[Recording],
    config: &FilterConfig,
) -> Result<LossReport, TrainError> {
    let per_item = recordings
        .iter()
        .map(|r| gravity_loss(r.gt[0], &r.samples, &r.gt, gains, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossReport::from_items(per_item))
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss (the last
    /// epoch when there is no validation split).
    pub params: GainNetParams,
    pub final_params: GainNetParams,
    pub best_epoch: usize,
    pub history: TrainingHistory,
}

/// Holds out `round(fraction * n)` segments (keeping at least one for
/// training) chosen by a seeded permutation.
fn split_validation(segments: Vec<TrainingSegment>, config: &TrainConfig) -> (Vec<TrainingSegment>, Vec<TrainingSegment>) {
    let n = segments.len();
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).min(n.saturating_sub(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut config.rng(STREAM_SPLIT));
    let mut is_val = vec![false; n];
    idx[..n_val].iter().for_each(|&i| is_val[i] = true);
    let (val, train): (Vec<_>, Vec<_>) = segments.into_iter().zip(is_val).partition(|(_, v)| *v);
    (
        train.into_iter().map(|(s, _)| s).collect(),
        val.into_iter().map(|(s, _)| s).collect(),
    )
}

/// Plain SGD on the batch-mean gradient, starting from
/// `GainNetParams::init_with(seed, ..)`.
pub fn train(recordings: &[Recording], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let params = GainNetParams::init_with(config.seed, config.input_mode, config.residual_mode);
    train_from(params, recordings, config)
}

pub fn train_from(
    mut params: GainNetParams,
    recordings: &[Recording],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let chronological = TrainConfig {
        shuffle: false,
        ..config.clone()
    };
    let (mut train_set, val_set) = split_validation(segment_dataset(recordings, &chronological)?, config);
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|source| TrainError::Io {
            path: dir.clone(),
            source,
        })?;
    }

    let mut shuffle_rng = config.rng(STREAM_SHUFFLE);
    let mut perturb_rng = config.rng(STREAM_PERTURB);
    let mut history = TrainingHistory::default();

    let validate = |p: &GainNetParams| -> Result<Option<f64>, TrainError> {
        if val_set.is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate_segments(p, &val_set, config)?.j_f))
        }
    };

    let initial_train = evaluate_segments(&params, &train_set, config)?.j_f;
    let initial_val = validate(&params)?;
    history.push(EpochRecord {
        epoch: 0,
        train_j_f: initial_train,
        val_j_f: initial_val,
        grad_norm: 0.0,
    });
    let mut best = (initial_val.unwrap_or(f64::INFINITY), 0, params.clone());

    for epoch in 1..=config.epochs {
        if config.shuffle {
            train_set.shuffle(&mut shuffle_rng);
        }
        let mut losses = Vec::with_capacity(train_set.len());
        let mut grad_norms = Vec::new();
        for batch in train_set.chunks(config.batch_size) {
            let mut batch_grad = params.zeros_like();
            for segment in batch {
                let initial = if config.ic_perturb {
                    perturb_initial_condition(&segment.initial, config.ic_error_max_deg, &mut perturb_rng)
                } else {
                    segment.initial
                };
                let (loss, grad) = segment_loss(&params, segment, initial, config)?;
                if !loss.is_finite() || !grad.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        segment: losses.len(),
                    });
                }
                losses.push(loss);
                batch_grad.axpy(1.0, &grad);
            }
            batch_grad.scale(1.0 / batch.len() as f64);
            grad_norms.push(batch_grad.norm());
            params.axpy(-config.learning_rate, &batch_grad);
        }

        let val = validate(&params)?;
        let record = EpochRecord {
            epoch,
            train_j_f: losses.iter().sum::<f64>() / losses.len() as f64,
            val_j_f: val,
            grad_norm: grad_norms.iter().sum::<f64>() / grad_norms.len() as f64,
        };
        history.push(record);
        match val {
            Some(v) if v < best.0 => best = (v, epoch, params.clone()),
            None => best = (f64::INFINITY, epoch, params.clone()),
            _ => {}
        }

        if let Some(dir) = &config.checkpoint_dir {
            write_params_file(&dir.join(format!("epoch_{epoch:04}.params")), &params)?;
            write_params_file(&dir.join("best.params"), &best.2)?;
            history.save(&dir.join("history.tsv"))?;
        }
    }

    Ok(TrainOutcome {
        params: best.2,
        final_params: params,
        best_epoch: best.1,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate_synthetic, Placement, SynthProfile};
    use crate::filter::{run, GainMatrix};

    fn recording(n: usize, seed: u64) -> Recording {
        let mut rec = generate_synthetic(SynthProfile::Walking, n as f64 / 200.0, 200.0, seed);
        rec.samples.truncate(n);
        rec.gt.truncate(n);
        rec
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            segment_length: 40,
            batch_size: 2,
            epochs: 2,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn segment_counts() {
        let config = TrainConfig::default();
        let a = segment_dataset(&[recording(24000, 1)], &config).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|s| s.len() == 8000 && s.gt.len() == 8000));
        let b = segment_dataset(&[recording(23999, 1)], &config).unwrap();
        assert_eq!(b.len(), 2);
        let mut offsets: Vec<_> = b.iter().map(|s| s.offset).collect();
        offsets.sort();
        assert_eq!(offsets, vec![0, 8000]);
        assert!(matches!(
            segment_dataset(&[recording(7999, 1)], &config),
            Err(TrainError::RecordingTooShort { len: 7999, .. })
        ));
        assert!(matches!(segment_dataset(&[], &config), Err(TrainError::EmptyData)));
    }

    #[test]
    fn segments_copy_their_slice() {
        let rec = recording(100, 4);
        let config = TrainConfig {
            segment_length: 30,
            shuffle: false,
            ..TrainConfig::default()
        };
        let segs = segment_dataset(std::slice::from_ref(&rec), &config).unwrap();
        assert_eq!(segs.len(), 3);
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.offset, 30 * i);
            assert_eq!(s.samples[..], rec.samples[30 * i..30 * (i + 1)]);
            assert_eq!(s.initial, rec.gt[30 * i]);
        }
    }

    #[test]
    fn shuffle_is_seeded() {
        let recs = [recording(400, 1), recording(400, 2)];
        let config = TrainConfig {
            segment_length: 20,
            ..TrainConfig::default()
        };
        let order = |c: &TrainConfig| {
            segment_dataset(&recs, c)
                .unwrap()
                .iter()
                .map(|s| (s.recording.clone(), s.offset))
                .collect::<Vec<_>>()
        };
        assert_eq!(order(&config), order(&config));
        let other = TrainConfig { seed: 5, ..config.clone() };
        assert_ne!(order(&config), order(&other));
        let plain = TrainConfig { shuffle: false, ..config.clone() };
        let mut sorted = order(&config);
        sorted.sort();
        let mut chrono = order(&plain);
        chrono.sort();
        assert_eq!(sorted, chrono);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for config in [
            TrainConfig { segment_length: 1, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
            TrainConfig { ic_error_max_deg: f64::NAN, ..TrainConfig::default() },
            TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(config.validate(), Err(TrainError::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let r = RotationMatrix::from_euler(&EulerAngles::new(0.1, 0.2, 0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb_initial_condition(&r, 0.0, &mut rng), r);
    }

    #[test]
    fn perturbation_angle_bound() {
        let r = RotationMatrix::from_euler(&EulerAngles::new(-0.4, 0.3, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bound = 0.1f64.to_radians() * 3f64.sqrt();
        for _ in 0..10_000 {
            let p = perturb_initial_condition(&r, 0.1, &mut rng);
            assert!(p.orthogonality_error() < 1e-12);
            assert!(r.angle_to(&p) <= bound, "{} > {bound}", r.angle_to(&p));
        }
    }

    #[test]
    fn perturbation_is_uniform_per_axis() {
        // One-sample Kolmogorov-Smirnov test against U(-0.1, 0.1) deg at the
        // 1% level: D_crit ~ 1.628 / sqrt(n).
        let n = 10_000;
        let r = RotationMatrix::from_euler(&EulerAngles::new(0.3, -0.2, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut draws = [Vec::new(), Vec::new(), Vec::new()];
        for _ in 0..n {
            let p = perturb_initial_condition(&r, 0.1, &mut rng);
            let e = (r.transpose() * p).to_euler();
            draws[0].push(e.roll.to_degrees());
            draws[1].push(e.pitch.to_degrees());
            draws[2].push(e.yaw.to_degrees());
        }
        let d_crit = 1.628 / (n as f64).sqrt();
        for axis in draws.iter_mut() {
            axis.sort_by(f64::total_cmp);
            let d = axis
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let cdf = ((x + 0.1) / 0.2).clamp(0.0, 1.0);
                    (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < d_crit, "D = {d}");
            assert!(axis[0] >= -0.1 - 1e-9 && axis[n - 1] <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let recs = [recording(200, 3)];
        let config = TrainConfig {
            learning_rate: 0.0,
            ..small_config()
        };
        let out = train(&recs, &config).unwrap();
        assert_eq!(out.final_params, GainNetParams::init(config.seed));
        assert_eq!(out.params, GainNetParams::init(config.seed));
    }

    #[test]
    fn training_is_deterministic() {
        let recs = [recording(200, 3), recording(200, 4)];
        let config = small_config();
        let a = train(&recs, &config).unwrap();
        let b = train(&recs, &config).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.history, b.history);
        assert_ne!(a.final_params, GainNetParams::init(config.seed));
        assert_eq!(a.history.records.len(), config.epochs + 1);
    }

    #[test]
    fn unperturbed_epoch_loss_matches_segment_evaluation() {
        let recs = [recording(200, 5)];
        let config = TrainConfig {
            learning_rate: 0.0,
            ic_perturb: false,
            validation_fraction: 0.0,
            epochs: 1,
            ..small_config()
        };
        let out = train(&recs, &config).unwrap();
        let segs = segment_dataset(&recs, &config).unwrap();
        let eval = evaluate_segments(&out.params, &segs, &config).unwrap();
        let epoch = &out.history.records[1];
        assert!((epoch.train_j_f - eval.j_f).abs() < 1e-12);
    }

    #[test]
    fn checkpoints_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let config = TrainConfig {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..small_config()
        };
        let out = train(&[recording(200, 6)], &config).unwrap();
        for name in ["epoch_0001.params", "epoch_0002.params", "best.params", "history.tsv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let best = crate::gain_net::read_params_file(&dir.path().join("best.params")).unwrap();
        assert_eq!(best, out.params);
        let hist = TrainingHistory::load(&dir.path().join("history.tsv")).unwrap();
        assert_eq!(hist, out.history);
    }

    #[test]
    fn evaluate_zero_gain_equals_gyro_drift() {
        let rec = recording(600, 7);
        let zero = GainMatrix::zero();
        let config = FilterConfig::default();
        let report = evaluate(&zero, std::slice::from_ref(&rec), &config).unwrap();
        let traces = run(rec.gt[0], &rec.samples, &zero, &config).unwrap();
        let angles: Vec<f64> = traces
            .iter()
            .zip(&rec.gt[1..])
            .map(|(t, g)| gravity_angle(&loss::gt_gravity(g), &t.r_u.to_body(&crate::filter::gravity_reference())))
            .collect();
        assert!((report.j_f - rms(&angles)).abs() < 1e-12);
        assert!(report.j_f > 0.0);
    }

    #[test]
    fn fresh_params_on_stationary_data_stay_near_noise_angle() {
        let rec = generate_synthetic(SynthProfile::Stationary, 20.0, 200.0, 8);
        assert_eq!(rec.placement, Placement::Synthetic);
        let report = evaluate(&GainNetParams::init(0), &[rec], &FilterConfig::default()).unwrap();
        // With gains near 0.5 the estimate follows the accelerometer, whose
        // direction noise is about sigma / g per axis.
        let cfg = SynthProfile::Stationary.config();
        let noise_angle = 2f64.sqrt() * cfg.acc_noise_std / crate::filter::STANDARD_GRAVITY;
        assert!(report.j_f < noise_angle, "{} vs {noise_angle}", report.j_f);
    }
}
