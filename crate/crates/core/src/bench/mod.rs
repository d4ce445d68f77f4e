//! Data ingestion, synthetic data, baseline filters, metrics and comparison
//! runs.

pub mod baselines;
pub mod compare;
pub mod metrics;
pub mod recording;
pub mod synth;

pub use recording::{load_dir, load_recording, save_recording, Placement, Recording};
pub use synth::{generate_synthetic, generate_with, SynthConfig, SynthProfile};
pub use baselines::{run_filter, run_filter_from, Algorithm, BaselineConfig};
pub use metrics::{attitude_loss, compute_metrics, Metrics};
pub use compare::{compare, tune_baseline, ComparisonReport, Setup, TuneResult};
