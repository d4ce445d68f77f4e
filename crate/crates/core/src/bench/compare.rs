//! Grid tuning on training recordings and scoring on held-out ones.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::baselines::{run_filter, Algorithm, BaselineConfig};
use super::metrics::{angle_errors, attitude_loss, metrics_from_errors, Metrics};
use super::recording::{Placement, Recording};
use crate::error::BenchError;
use crate::filter::FilterConfig;
use crate::trainer::{train, TrainConfig};

/// Mean attitude loss (radians) of `config` over `recordings`.
pub fn mean_loss(config: &BaselineConfig, recordings: &[Recording], filter: &FilterConfig) -> Result<f64, BenchError> {
    if recordings.is_empty() {
        return Err(BenchError::Invalid("no recordings to evaluate".into()));
    }
    let mut total = 0.0;
    for rec in recordings {
        total += attitude_loss(&run_filter(config, rec, filter)?, &rec.gt);
    }
    Ok(total / recordings.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub config: BaselineConfig,
    pub value: f64,
    /// `(parameter, mean loss)` for every grid point, ascending parameter.
    pub losses: Vec<(f64, f64)>,
}

/// Exhaustive search over `grid`; the lowest mean loss wins and ties go to
/// the smaller parameter. A run that fails numerically scores `+inf`; bad
/// input data is reported as an error.
pub fn tune_baseline(
    algorithm: Algorithm,
    grid: &[f64],
    train: &[Recording],
    filter: &FilterConfig,
) -> Result<TuneResult, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::Invalid(format!("{algorithm}: empty tuning grid")));
    }
    let mut points = grid.to_vec();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut losses = Vec::with_capacity(points.len());
    let mut best: Option<(f64, f64)> = None;
    for &value in &points {
        let config = algorithm.with_parameter(value)?;
        let loss = match mean_loss(&config, train, filter) {
            Ok(l) if l.is_finite() => l,
            Ok(_) => f64::INFINITY,
            Err(e) if !e.is_validation() => f64::INFINITY,
            Err(e) => return Err(e),
        };
        losses.push((value, loss));
        if best.is_none_or(|(_, l)| loss < l) {
            best = Some((value, loss));
        }
    }
    let (value, loss) = best.unwrap();
    if !loss.is_finite() {
        return Err(BenchError::NonFinite(format!("{algorithm}: every grid point failed numerically")));
    }
    Ok(TuneResult {
        config: algorithm.with_parameter(value)?,
        value,
        losses,
    })
}

/// How an algorithm gets its parameters before the test pass.
#[derive(Clone, Debug)]
pub enum Setup {
    /// Grid search on the training recordings.
    Tune { algorithm: Algorithm, grid: Vec<f64> },
    /// Use as given.
    Fixed(BaselineConfig),
    /// Train the gain network on the training recordings.
    Train(TrainConfig),
}

impl Setup {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Setup::Tune { algorithm, .. } => *algorithm,
            Setup::Fixed(c) => c.algorithm(),
            Setup::Train(_) => Algorithm::Dae,
        }
    }

    /// Tuning over the default grid, or training with `train` for the DAE.
    pub fn default_for(algorithm: Algorithm, train: &TrainConfig) -> Setup {
        match algorithm {
            Algorithm::Dae => Setup::Train(train.clone()),
            a => Setup::Tune {
                algorithm: a,
                grid: a.default_grid(),
            },
        }
    }
}

/// Test recordings behind a read counter.
struct TestSet<'a> {
    recordings: &'a [Recording],
    reads: RefCell<Vec<usize>>,
}

impl<'a> TestSet<'a> {
    fn new(recordings: &'a [Recording]) -> Self {
        TestSet {
            recordings,
            reads: RefCell::new(vec![0; recordings.len()]),
        }
    }

    fn get(&self, i: usize) -> &'a Recording {
        self.reads.borrow_mut()[i] += 1;
        &self.recordings[i]
    }

    fn take_counts(&self) -> Vec<usize> {
        std::mem::replace(&mut *self.reads.borrow_mut(), vec![0; self.recordings.len()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingResult {
    pub algorithm: Algorithm,
    pub recording: String,
    pub placement: Placement,
    pub metrics: Metrics,
    /// `(t, roll error, pitch error)`, degrees.
    pub trace: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub config: BaselineConfig,
    /// Mean training loss of the chosen configuration, radians (absent when
    /// the configuration was supplied).
    pub train_loss: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Recording,
    Placement,
    Average,
}

impl Scope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::Recording => "recording",
            Scope::Placement => "placement",
            Scope::Average => "average",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scope: Scope,
    pub placement: Option<Placement>,
    pub recording: Option<String>,
    pub algorithm: Algorithm,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub algorithms: Vec<AlgorithmSummary>,
    /// Per algorithm, then per recording in test-set order.
    pub results: Vec<RecordingResult>,
    /// How often each test recording was read, per algorithm.
    pub test_reads: Vec<(Algorithm, Vec<usize>)>,
}

pub const REPORT_HEADER: &str = "scope,placement,recording,algorithm,e_roll_deg,e_pitch_deg,e_deg";
pub const TRACE_HEADER: &str = "t,roll_err_deg,pitch_err_deg";

/// Prepares every algorithm on `train`, then scores it on `test`. Each test
/// recording is read exactly once per algorithm.
pub fn compare(
    setups: &[Setup],
    train_set: &[Recording],
    test_set: &[Recording],
    filter: &FilterConfig,
) -> Result<ComparisonReport, BenchError> {
    if test_set.is_empty() {
        return Err(BenchError::Invalid("empty test set".into()));
    }
    let mut seen = BTreeSet::new();
    for s in setups {
        if !seen.insert(s.algorithm()) {
            return Err(BenchError::Invalid(format!("algorithm {} listed twice", s.algorithm())));
        }
    }

    let test = TestSet::new(test_set);
    let mut report = ComparisonReport {
        algorithms: Vec::new(),
        results: Vec::new(),
        test_reads: Vec::new(),
    };
    for setup in setups {
        let (config, train_loss) = match setup {
            Setup::Tune { algorithm, grid } => {
                let tuned = tune_baseline(*algorithm, grid, train_set, filter)?;
                let loss = tuned.losses.iter().find(|(v, _)| *v == tuned.value).map(|(_, l)| *l);
                (tuned.config, loss)
            }
            Setup::Fixed(c) => (c.clone(), None),
            Setup::Train(cfg) => {
                let outcome = train(train_set, cfg)?;
                (BaselineConfig::Dae(Box::new(outcome.params)), None)
            }
        };
        let algorithm = config.algorithm();
        for i in 0..test_set.len() {
            let rec = test.get(i);
            let est = run_filter(&config, rec, filter)?;
            let errors = angle_errors(&est, &rec.gt);
            report.results.push(RecordingResult {
                algorithm,
                recording: rec.id.clone(),
                placement: rec.placement,
                metrics: metrics_from_errors(&errors),
                trace: rec.samples.iter().zip(&errors).map(|(s, e)| (s.t, e.0, e.1)).collect(),
            });
        }
        let counts = test.take_counts();
        if counts.iter().any(|&c| c != 1) {
            return Err(BenchError::Invalid(format!("{algorithm}: test recordings read {counts:?} times")));
        }
        report.test_reads.push((algorithm, counts));
        report.algorithms.push(AlgorithmSummary {
            algorithm,
            config,
            train_loss,
        });
    }
    Ok(report)
}

impl ComparisonReport {
    pub fn metrics_for(&self, algorithm: Algorithm) -> Vec<Metrics> {
        self.results.iter().filter(|r| r.algorithm == algorithm).map(|r| r.metrics).collect()
    }

    fn placements(&self) -> Vec<Placement> {
        let set: BTreeSet<Placement> = self.results.iter().map(|r| r.placement).collect();
        set.into_iter().collect()
    }

    /// Mean over placements of the per-placement means.
    pub fn average(&self, algorithm: Algorithm) -> Metrics {
        let per_placement: Vec<Metrics> = self
            .placements()
            .into_iter()
            .map(|p| self.placement_mean(algorithm, p))
            .collect();
        Metrics::mean(&per_placement)
    }

    pub fn placement_mean(&self, algorithm: Algorithm, placement: Placement) -> Metrics {
        let items: Vec<Metrics> = self
            .results
            .iter()
            .filter(|r| r.algorithm == algorithm && r.placement == placement)
            .map(|r| r.metrics)
            .collect();
        Metrics::mean(&items)
    }

    /// Per-recording rows, then per-placement means, then the average over
    /// placements.
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let algorithms: Vec<Algorithm> = self.algorithms.iter().map(|a| a.algorithm).collect();
        let mut rows: Vec<SummaryRow> = self
            .results
            .iter()
            .map(|r| SummaryRow {
                scope: Scope::Recording,
                placement: Some(r.placement),
                recording: Some(r.recording.clone()),
                algorithm: r.algorithm,
                metrics: r.metrics,
            })
            .collect();
        for p in self.placements() {
            for &a in &algorithms {
                rows.push(SummaryRow {
                    scope: Scope::Placement,
                    placement: Some(p),
                    recording: None,
                    algorithm: a,
                    metrics: self.placement_mean(a, p),
                });
            }
        }
        for &a in &algorithms {
            rows.push(SummaryRow {
                scope: Scope::Average,
                placement: None,
                recording: None,
                algorithm: a,
                metrics: self.average(a),
            });
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in self.summary_rows() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.scope.as_str(),
                r.placement.map_or("", |p| p.as_str()),
                r.recording.as_deref().unwrap_or(""),
                r.algorithm,
                r.metrics.e_roll,
                r.metrics.e_pitch,
                r.metrics.e
            );
        }
        out
    }

    /// Placement rows against algorithm columns of `e`, degrees.
    pub fn to_table(&self) -> String {
        let algorithms: Vec<Algorithm> = self.algorithms.iter().map(|a| a.algorithm).collect();
        let mut out = format!("{:<12}", "placement");
        for a in &algorithms {
            let _ = write!(out, "{:>15}", a.as_str());
        }
        out.push('\n');
        let mut line = |label: &str, f: &dyn Fn(Algorithm) -> Metrics| {
            let _ = write!(out, "{label:<12}");
            for &a in &algorithms {
                let _ = write!(out, "{:>15.3}", f(a).e);
            }
            out.push('\n');
        };
        for p in self.placements() {
            line(p.as_str(), &|a| self.placement_mean(a, p));
        }
        line("average", &|a| self.average(a));
        out
    }

    pub fn trace_csv(result: &RecordingResult) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for (t, roll, pitch) in &result.trace {
            let _ = writeln!(out, "{t},{roll},{pitch}");
        }
        out
    }

    /// Directory holding the per-recording traces of the report at `path`.
    pub fn trace_dir(path: &Path) -> PathBuf {
        let stem = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
        path.with_file_name(format!("{stem}_traces"))
    }

    /// Writes the summary CSV to `path` and one trace per algorithm and
    /// recording under [`Self::trace_dir`].
    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |source| BenchError::Io { path: p, source }
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
        fs::write(path, self.to_csv()).map_err(io(path))?;
        let root = Self::trace_dir(path);
        for r in &self.results {
            let dir = root.join(r.algorithm.as_str());
            fs::create_dir_all(&dir).map_err(io(&dir))?;
            let file = dir.join(format!("{}.csv", r.recording));
            fs::write(&file, Self::trace_csv(r)).map_err(io(&file))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synth::{generate_synthetic, SynthProfile};

    fn recs(profile: SynthProfile, seeds: std::ops::Range<u64>, secs: f64) -> Vec<Recording> {
        seeds.map(|s| generate_synthetic(profile, secs, 200.0, s)).collect()
    }

    #[test]
    fn single_point_grid() {
        let train = recs(SynthProfile::Walking, 0..1, 5.0);
        let r = tune_baseline(Algorithm::Madgwick, &[0.05], &train, &FilterConfig::default()).unwrap();
        assert_eq!(r.config, BaselineConfig::Madgwick { beta: 0.05 });
        assert!(tune_baseline(Algorithm::Madgwick, &[], &train, &FilterConfig::default()).is_err());
    }

    #[test]
    fn stationary_data_prefers_the_largest_gain() {
        // At rest with a clean accelerometer, gyro drift is the only error
        // left and the strongest correction removes it fastest.
        let mut synth = SynthProfile::Stationary.config();
        synth.acc_noise_std = 0.0;
        let train: Vec<_> = (0..2)
            .map(|s| crate::bench::synth::generate_with(&synth, SynthProfile::Stationary, 20.0, 200.0, s))
            .collect();
        let cfg = FilterConfig::default();
        let grid = [0.0, 0.01, 0.5];
        let r = tune_baseline(Algorithm::FixedGainCf, &grid, &train, &cfg).unwrap();
        let losses: Vec<f64> = grid
            .iter()
            .map(|&k| mean_loss(&BaselineConfig::FixedGainCf { k }, &train, &cfg).unwrap())
            .collect();
        assert!(losses[2] < losses[1] && losses[1] < losses[0], "{losses:?}");
        assert_eq!(r.value, 0.5);
        assert_eq!(r.losses.iter().map(|l| l.1).collect::<Vec<_>>(), losses);
    }

    #[test]
    fn tuning_returns_the_measured_argmin() {
        let train = recs(SynthProfile::Stationary, 0..2, 20.0);
        let cfg = FilterConfig::default();
        let grid = [0.5, 0.0, 0.01, 0.003];
        let r = tune_baseline(Algorithm::FixedGainCf, &grid, &train, &cfg).unwrap();
        let mut best = (f64::NAN, f64::INFINITY);
        for k in [0.0, 0.003, 0.01, 0.5] {
            let l = mean_loss(&BaselineConfig::FixedGainCf { k }, &train, &cfg).unwrap();
            if l < best.1 {
                best = (k, l);
            }
        }
        assert_eq!(r.value, best.0);
        assert_eq!(r.config, BaselineConfig::FixedGainCf { k: best.0 });
    }

    #[test]
    fn ties_go_to_the_smaller_value() {
        // With no recordings moving, every gain gives the same loss.
        let mut rec = generate_synthetic(SynthProfile::Stationary, 2.0, 200.0, 0);
        let synth = SynthProfile::Stationary.config().noiseless();
        rec = crate::bench::synth::generate_with(&synth, SynthProfile::Stationary, 2.0, 200.0, rec.len() as u64);
        let r = tune_baseline(Algorithm::FixedGainCf, &[0.3, 0.1, 0.2], &[rec], &FilterConfig::default()).unwrap();
        assert!(r.losses.windows(2).all(|w| w[0].1 == w[1].1), "{:?}", r.losses);
        assert_eq!(r.value, 0.1);
    }

    #[test]
    fn comparison_reads_each_test_recording_once() {
        let train = recs(SynthProfile::Walking, 0..2, 5.0);
        let mut test = recs(SynthProfile::Walking, 10..13, 5.0);
        test[2].placement = Placement::Pocket;
        let setups = vec![
            Setup::Tune {
                algorithm: Algorithm::FixedGainCf,
                grid: vec![0.001, 0.01],
            },
            Setup::Tune {
                algorithm: Algorithm::Madgwick,
                grid: vec![0.01, 0.1],
            },
            Setup::Fixed(BaselineConfig::Mahony { kp: 1.0, ki: 0.0 }),
        ];
        let cfg = FilterConfig::default();
        let report = compare(&setups, &train, &test, &cfg).unwrap();
        assert_eq!(report.test_reads.len(), 3);
        for (_, counts) in &report.test_reads {
            assert_eq!(counts, &vec![1, 1, 1]);
        }
        assert_eq!(report.results.len(), 9);
        assert_eq!(report.algorithms[2].train_loss, None);

        for row in report.summary_rows() {
            let m = row.metrics;
            assert!((m.e - (m.e_roll.powi(2) + m.e_pitch.powi(2)).sqrt()).abs() < 1e-12);
        }
        // Average over placements, each placement weighted equally.
        let fixed = report.metrics_for(Algorithm::FixedGainCf);
        let synthetic = Metrics::mean(&fixed[..2]);
        let avg = report.average(Algorithm::FixedGainCf);
        assert!((avg.e_roll - (synthetic.e_roll + fixed[2].e_roll) / 2.0).abs() < 1e-12);

        let csv = report.to_csv();
        assert!(csv.starts_with(REPORT_HEADER));
        assert_eq!(csv.lines().count(), 1 + 9 + 2 * 3 + 3);
        assert_eq!(compare(&setups, &train, &test, &cfg).unwrap().to_csv(), csv);
        assert!(report.to_table().contains("average"));
    }

    #[test]
    fn duplicate_algorithms_are_rejected() {
        let test = recs(SynthProfile::Walking, 0..1, 2.0);
        let setups = vec![
            Setup::Fixed(BaselineConfig::FixedGainCf { k: 0.1 }),
            Setup::Fixed(BaselineConfig::FixedGainCf { k: 0.2 }),
        ];
        assert!(compare(&setups, &[], &test, &FilterConfig::default()).is_err());
    }

    #[test]
    fn report_files() {
        let test = recs(SynthProfile::Walking, 0..2, 2.0);
        let setups = vec![Setup::Fixed(BaselineConfig::Madgwick { beta: 0.05 })];
        let report = compare(&setups, &[], &test, &FilterConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/report.csv");
        report.write(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), report.to_csv());
        let trace = dir.path().join("out/report_traces/madgwick").join(format!("{}.csv", test[0].id));
        let text = fs::read_to_string(trace).unwrap();
        assert_eq!(text.lines().next(), Some(TRACE_HEADER));
        assert_eq!(text.lines().count(), test[0].len() + 1);
        assert!(text.lines().nth(1).unwrap().ends_with(",0,0"));
    }
}
