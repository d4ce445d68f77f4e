//! Binary parameter files.
//!
//! Layout (all integers little endian):
//!
//! ```text
//! magic        8 bytes  "DAEGNET\0"
//! version      u8       1
//! residual     u8       0 = signed clamp, 1 = absolute
//! input        u8       0 = augmented, 1 = raw
//! reserved     u8       0
//! axes         u32
//! per axis:    u32 layer count, then (inputs u32, outputs u32) per layer
//! per axis, per layer: weights f64 (outputs x inputs, row major), bias f64
//! ```

use std::fs;
use std::path::Path;

use super::{AxisNet, Dense, GainNetParams, InputMode, ResidualMode, LAYER_SIZES};
use crate::error::GainNetError;

pub const MAGIC: &[u8; 8] = b"DAEGNET\0";
pub const FORMAT_VERSION: u8 = 1;

fn format_err(msg: impl Into<String>) -> GainNetError {
    GainNetError::Format(msg.into())
}

pub fn save_params(params: &GainNetParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(match params.residual_mode {
        ResidualMode::SignedClamp => 0,
        ResidualMode::Absolute => 1,
    });
    out.push(match params.input_mode {
        InputMode::Augmented => 0,
        InputMode::Raw => 1,
    });
    out.push(0);
    out.extend_from_slice(&(params.axes.len() as u32).to_le_bytes());
    for axis in &params.axes {
        out.extend_from_slice(&(axis.layers.len() as u32).to_le_bytes());
        for layer in &axis.layers {
            out.extend_from_slice(&(layer.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(layer.outputs as u32).to_le_bytes());
        }
    }
    for axis in &params.axes {
        for layer in &axis.layers {
            for o in 0..layer.outputs {
                for i in 0..layer.inputs {
                    out.extend_from_slice(&layer.weight(o, i).to_le_bytes());
                }
            }
            for b in &layer.bias {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GainNetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, GainNetError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, GainNetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64, GainNetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_params(bytes: &[u8]) -> Result<GainNetParams, GainNetError> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(MAGIC.len())? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = rd.u8()?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let residual_mode = match rd.u8()? {
        0 => ResidualMode::SignedClamp,
        1 => ResidualMode::Absolute,
        b => return Err(format_err(format!("unknown residual mode {b}"))),
    };
    let input_mode = match rd.u8()? {
        0 => InputMode::Augmented,
        1 => InputMode::Raw,
        b => return Err(format_err(format!("unknown input mode {b}"))),
    };
    rd.u8()?;
    let n_axes = rd.u32()?;
    if n_axes != 3 {
        return Err(format_err(format!("expected 3 axes, found {n_axes}")));
    }

    let mut params = GainNetParams::zeros(input_mode, residual_mode);
    for axis in 0..3 {
        let n_layers = rd.u32()?;
        if n_layers != LAYER_SIZES.len() {
            return Err(format_err(format!("axis {axis}: expected {} layers, found {n_layers}", LAYER_SIZES.len())));
        }
        let mut layers = Vec::with_capacity(n_layers);
        let mut expected_in = input_mode.input_dim();
        for (l, &expected_out) in LAYER_SIZES.iter().enumerate() {
            let (inputs, outputs) = (rd.u32()?, rd.u32()?);
            if (inputs, outputs) != (expected_in, expected_out) {
                return Err(format_err(format!(
                    "axis {axis} layer {l}: shape {inputs}x{outputs}, expected {expected_in}x{expected_out}"
                )));
            }
            layers.push(Dense::zeros(inputs, outputs));
            expected_in = outputs;
        }
        params.axes[axis] = AxisNet { layers };
    }

    for axis in params.axes.iter_mut() {
        for layer in axis.layers.iter_mut() {
            for o in 0..layer.outputs {
                for i in 0..layer.inputs {
                    *layer.weight_mut(o, i) = rd.f64()?;
                }
            }
            for b in layer.bias.iter_mut() {
                *b = rd.f64()?;
            }
        }
    }
    if rd.pos != bytes.len() {
        return Err(format_err(format!("{} trailing bytes", bytes.len() - rd.pos)));
    }
    Ok(params)
}

pub fn write_params_file(path: &Path, params: &GainNetParams) -> Result<(), GainNetError> {
    fs::write(path, save_params(params)).map_err(|e| GainNetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_params_file(path: &Path) -> Result<GainNetParams, GainNetError> {
    let bytes = fs::read(path).map_err(|e| GainNetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    load_params(&bytes)
}
