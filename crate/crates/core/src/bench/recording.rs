//! Recordings and the canonical CSV format.
//!
//! One header line, then one row per sample:
//! `t_s,gyro_x,gyro_y,gyro_z,acc_x,acc_y,acc_z,q_w,q_x,q_y,q_z`
//! (seconds, rad/s, m/s², unit quaternion body to reference, scalar first).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::BenchError;
use crate::filter::ImuSample;
use crate::so3::{RotationMatrix, Vec3};

pub const CSV_HEADER: [&str; 11] = [
    "t_s", "gyro_x", "gyro_y", "gyro_z", "acc_x", "acc_y", "acc_z", "q_w", "q_x", "q_y", "q_z",
];

/// Accepted accelerometer norm range in m/s².
pub const ACC_NORM_RANGE: (f64, f64) = (0.1, 100.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    Pocket,
    Texting,
    Body,
    Bag,
    Synthetic,
}

impl Placement {
    pub const ALL: [Placement; 5] = [
        Placement::Pocket,
        Placement::Texting,
        Placement::Body,
        Placement::Bag,
        Placement::Synthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Placement::Pocket => "pocket",
            Placement::Texting => "texting",
            Placement::Body => "body",
            Placement::Bag => "bag",
            Placement::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Placement {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Placement::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BenchError::Invalid(format!("unknown placement '{s}'")))
    }
}

/// IMU samples with time-aligned ground-truth attitude.
#[derive(Clone, Debug)]
pub struct Recording {
    pub id: String,
    pub placement: Placement,
    pub samples: Vec<ImuSample>,
    pub gt: Vec<RotationMatrix>,
    pub rate_hz: f64,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Checks alignment, time ordering and ground-truth orthogonality.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.samples.len() != self.gt.len() {
            return Err(BenchError::Alignment(format!(
                "{}: {} samples but {} ground-truth attitudes",
                self.id,
                self.samples.len(),
                self.gt.len()
            )));
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(BenchError::Invalid(format!("{}: timestamps not increasing at sample {}", self.id, i + 1)));
            }
        }
        if let Some(i) = self.gt.iter().position(|r| !(r.orthogonality_error() < 1e-9)) {
            return Err(BenchError::Invalid(format!("{}: ground truth {i} is not a rotation", self.id)));
        }
        Ok(())
    }
}

/// Median-interval sample rate.
pub fn estimate_rate(samples: &[ImuSample]) -> f64 {
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    if dts.is_empty() {
        return 0.0;
    }
    dts.sort_by(f64::total_cmp);
    1.0 / dts[dts.len() / 2]
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> BenchError {
    BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a recording from CSV text. `path` is only used in messages.
pub fn parse_recording(text: &str, path: &Path, id: &str, placement: Placement) -> Result<Recording, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut samples = Vec::new();
    let mut gt = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            let names: Vec<&str> = record.iter().collect();
            if names != CSV_HEADER {
                return Err(parse_err(path, line, format!("expected header {}", CSV_HEADER.join(","))));
            }
            saw_header = true;
            continue;
        }
        let fields = record.len();
        if fields == 7 {
            return Err(BenchError::Alignment(format!(
                "{}:{line}: sensor row without ground truth",
                path.display()
            )));
        }
        if fields != CSV_HEADER.len() {
            return Err(parse_err(path, line, format!("expected 11 fields, found {fields}")));
        }
        let mut v = [0.0; 11];
        for (slot, (field, name)) in v.iter_mut().zip(record.iter().zip(CSV_HEADER)) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("{name}: invalid number '{field}'")))?;
        }
        let sample = ImuSample::new(v[0], Vec3::new(v[1], v[2], v[3]), Vec3::new(v[4], v[5], v[6]));
        if let Some(prev) = samples.last().map(|s: &ImuSample| s.t) {
            if !(sample.t > prev) {
                return Err(parse_err(path, line, format!("timestamp {} does not follow {prev}", sample.t)));
            }
        }
        let acc_norm = sample.acc.norm();
        if !(acc_norm >= ACC_NORM_RANGE.0 && acc_norm <= ACC_NORM_RANGE.1) {
            return Err(parse_err(path, line, format!("accelerometer norm {acc_norm} m/s² out of range")));
        }
        let q_norm = (v[7] * v[7] + v[8] * v[8] + v[9] * v[9] + v[10] * v[10]).sqrt();
        if (q_norm - 1.0).abs() > 1e-3 {
            return Err(parse_err(path, line, format!("quaternion norm {q_norm} is not 1")));
        }
        samples.push(sample);
        gt.push(RotationMatrix::from_quaternion(v[7], v[8], v[9], v[10]));
    }
    if !saw_header {
        return Err(parse_err(path, 1, "missing header"));
    }
    let rate_hz = estimate_rate(&samples);
    Ok(Recording {
        id: id.to_string(),
        placement,
        samples,
        gt,
        rate_hz,
    })
}

/// Loads one CSV recording; the id is the file stem.
pub fn load_recording(path: &Path, placement: Placement) -> Result<Recording, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_recording(&text, path, &id, placement)
}

pub fn format_recording(rec: &Recording) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory write");
    for (s, r) in rec.samples.iter().zip(&rec.gt) {
        let q = r.to_quaternion();
        let row = [s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.acc.x, s.acc.y, s.acc.z, q[0], q[1], q[2], q[3]];
        writer.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn save_recording(path: &Path, rec: &Recording) -> Result<(), BenchError> {
    fs::write(path, format_recording(rec)).map_err(|e| io_err(path, e))
}

/// Finds `*.csv` files under `dir`. Files inside a directory named after a
/// placement get that placement; others are `synthetic`. Results are sorted
/// by path.
pub fn discover_recordings(dir: &Path) -> Result<Vec<(PathBuf, Placement)>, BenchError> {
    fn walk(dir: &Path, inherited: Placement, out: &mut Vec<(PathBuf, Placement)>) -> Result<(), BenchError> {
        let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| io_err(dir, e))?.path();
            if path.is_dir() {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let placement = name.parse().unwrap_or(inherited);
                walk(&path, placement, out)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                out.push((path, inherited));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, Placement::Synthetic, &mut out)?;
    out.sort();
    Ok(out)
}

/// Loads every recording under `dir`, optionally restricted to a placement.
pub fn load_dir(dir: &Path, placement: Option<Placement>) -> Result<Vec<Recording>, BenchError> {
    let found = discover_recordings(dir)?;
    let recs = found
        .into_iter()
        .filter(|(_, p)| placement.is_none_or(|want| *p == want))
        .map(|(path, p)| load_recording(&path, p))
        .collect::<Result<Vec<_>, _>>()?;
    if recs.is_empty() {
        return Err(BenchError::Invalid(format!("no recordings found in {}", dir.display())));
    }
    Ok(recs)
}
