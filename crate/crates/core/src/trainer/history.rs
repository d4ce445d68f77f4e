//! Per-epoch training history as tab-separated text.
//!
//! ```text
//! # epoch	train_jf_rad	val_jf_rad	grad_norm
//! 0	0.0123	0.0119	0
//! 1	0.0101	0.0098	0.52
//! ```
//!
//! Missing validation losses are written as `nan`. Values use the shortest
//! representation that parses back to the same `f64`.

use std::fs;
use std::path::Path;

use crate::error::TrainError;

pub const HISTORY_HEADER: &str = "# epoch\ttrain_jf_rad\tval_jf_rad\tgrad_norm";

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss of the epoch, radians.
    pub train_j_f: f64,
    /// Validation loss after the epoch, radians.
    pub val_j_f: Option<f64>,
    /// Mean norm of the batch gradients.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn push(&mut self, record: EpochRecord) {
        self.records.push(record);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            let val = r.val_j_f.map_or("nan".to_string(), |v| v.to_string());
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.epoch, r.train_j_f, val, r.grad_norm));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let bad = |line: usize, msg: &str| TrainError::InvalidConfig(format!("history line {line}: {msg}"));
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(i + 1, "expected 4 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "invalid number"));
            let val = num(fields[2])?;
            records.push(EpochRecord {
                epoch: fields[0].parse().map_err(|_| bad(i + 1, "invalid epoch"))?,
                train_j_f: num(fields[1])?,
                val_j_f: if val.is_nan() { None } else { Some(val) },
                grad_norm: num(fields[3])?,
            });
        }
        Ok(TrainingHistory { records })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, self.to_text()).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let h = TrainingHistory {
            records: vec![
                EpochRecord { epoch: 0, train_j_f: 0.1 / 3.0, val_j_f: None, grad_norm: 0.0 },
                EpochRecord { epoch: 1, train_j_f: 1e-3, val_j_f: Some(2.5e-3), grad_norm: 0.75 },
            ],
        };
        let text = h.to_text();
        assert!(text.starts_with(HISTORY_HEADER));
        assert_eq!(text.lines().nth(1).unwrap(), "0\t0.03333333333333333\tnan\t0");
        assert_eq!(TrainingHistory::parse(&text).unwrap(), h);
        assert!(TrainingHistory::parse("1\t2\t3").is_err());
    }
}
