use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dae_ahrs::bench::compare::{compare, tune_baseline, ComparisonReport, Setup};
use dae_ahrs::bench::{generate_synthetic, load_dir, save_recording, Algorithm, BaselineConfig, Placement, SynthProfile};
use dae_ahrs::error::BenchError;
use dae_ahrs::filter::FilterConfig;
use dae_ahrs::gain_net::{read_params_file, write_params_file, InputMode, ResidualMode};
use dae_ahrs::trainer::{train, TrainConfig};

/// Attitude estimation with learned accelerometer gains.
#[derive(Parser)]
#[command(name = "dae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train gain-network parameters on a directory of recordings.
    Train(TrainArgs),
    /// Score trained parameters on a directory of recordings.
    Eval(EvalArgs),
    /// Tune or train each algorithm on one set and score it on another.
    Compare(CompareArgs),
    /// Write a synthetic recording.
    Synth(SynthArgs),
    /// Grid-search one baseline parameter.
    Tune(TuneArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ResidualArg {
    SignedClamp,
    Absolute,
}

#[derive(Args)]
struct TrainingFlags {
    #[arg(long, default_value_t = 8000)]
    segment_length: usize,
    #[arg(long, default_value_t = 5)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    /// Largest initial-condition error per Euler angle, degrees.
    #[arg(long, default_value_t = 0.1)]
    ic_error_deg: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep segments in recording order.
    #[arg(long)]
    no_shuffle: bool,
    /// Start every segment from the exact ground truth.
    #[arg(long)]
    no_ic_perturb: bool,
    #[arg(long, value_enum, default_value_t = ResidualArg::SignedClamp)]
    residual_mode: ResidualArg,
    /// Feed the residual itself instead of its powers.
    #[arg(long)]
    raw_input: bool,
    /// Fraction of segments held out to pick the best epoch.
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    /// Write parameters and history here after every epoch.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

impl TrainingFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            segment_length: self.segment_length,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            ic_error_max_deg: self.ic_error_deg,
            epochs: self.epochs,
            seed: self.seed,
            shuffle: !self.no_shuffle,
            ic_perturb: !self.no_ic_perturb,
            residual_mode: match self.residual_mode {
                ResidualArg::SignedClamp => ResidualMode::SignedClamp,
                ResidualArg::Absolute => ResidualMode::Absolute,
            },
            input_mode: if self.raw_input { InputMode::Raw } else { InputMode::Augmented },
            validation_fraction: self.validation_fraction,
            checkpoint_dir: self.checkpoint_dir.clone(),
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    placement: Option<Placement>,
    #[arg(long)]
    out_params: PathBuf,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    placement: Option<Placement>,
    /// Summary CSV; traces go to a sibling `<stem>_traces` directory.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated: fixed-gain-cf, madgwick, mahony, dae.
    #[arg(long, value_delimiter = ',', default_value = "fixed-gain-cf,madgwick,mahony,dae")]
    algorithms: Vec<Algorithm>,
    #[arg(long)]
    train_dir: PathBuf,
    #[arg(long)]
    test_dir: PathBuf,
    #[arg(long)]
    placement: Option<Placement>,
    #[arg(long)]
    report: PathBuf,
    /// Use these parameters for dae instead of training.
    #[arg(long)]
    dae_params: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "walking")]
    profile: SynthProfile,
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Hz.
    #[arg(long, default_value_t = 200.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    algorithm: Algorithm,
    /// Comma-separated values; defaults to 20 log-spaced points.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    placement: Option<Placement>,
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let filter = FilterConfig::default();
    match cli.command {
        Command::Train(args) => {
            let recordings = load_dir(&args.data_dir, args.placement)?;
            let outcome = train(&recordings, &args.training.config())?;
            write_params_file(&args.out_params, &outcome.params)?;
            print!("{}", outcome.history.to_text());
            println!("# best epoch {}", outcome.best_epoch);
        }
        Command::Eval(args) => {
            let params = read_params_file(&args.params)?;
            let recordings = load_dir(&args.data_dir, args.placement)?;
            let setups = [Setup::Fixed(BaselineConfig::Dae(Box::new(params)))];
            let report = compare(&setups, &[], &recordings, &filter)?;
            finish(&report, args.report.as_deref())?;
        }
        Command::Compare(args) => {
            let train_set = load_dir(&args.train_dir, args.placement)?;
            let test_set = load_dir(&args.test_dir, args.placement)?;
            let training = args.training.config();
            let mut setups = Vec::new();
            for a in &args.algorithms {
                setups.push(match (a, &args.dae_params) {
                    (Algorithm::Dae, Some(path)) => Setup::Fixed(BaselineConfig::Dae(Box::new(read_params_file(path)?))),
                    _ => Setup::default_for(*a, &training),
                });
            }
            let report = compare(&setups, &train_set, &test_set, &filter)?;
            for s in &report.algorithms {
                println!("# {}: {}", s.algorithm, s.config.describe());
            }
            finish(&report, Some(&args.report))?;
        }
        Command::Synth(args) => {
            if !(args.duration > 0.0 && args.rate > 0.0 && args.duration.is_finite() && args.rate.is_finite()) {
                return Err(BenchError::Invalid("duration and rate must be positive".into()));
            }
            let rec = generate_synthetic(args.profile, args.duration, args.rate, args.seed);
            save_recording(&args.out, &rec)?;
        }
        Command::Tune(args) => {
            let recordings = load_dir(&args.data_dir, args.placement)?;
            let grid = args.grid.unwrap_or_else(|| args.algorithm.default_grid());
            let result = tune_baseline(args.algorithm, &grid, &recordings, &filter)?;
            println!("# value\tmean_loss_rad");
            for (v, l) in &result.losses {
                println!("{v}\t{l}");
            }
            println!("# best {}", result.config.describe());
        }
    }
    Ok(())
}

fn finish(report: &ComparisonReport, path: Option<&std::path::Path>) -> Result<(), BenchError> {
    print!("{}", report.to_table());
    if let Some(path) = path {
        report.write(path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
