//! Per-axis gain network: three independent scalar-input MLPs mapping one
//! residual component each to an accelerometer weight in `(0, 1)`.
//!
//! Each axis: powers `[u^-3 .. u^5]` of `u = r / FEATURE_SCALE` (9 inputs), dense layers
//! `9 -> 16 -> 32 -> 64 -> 32 -> 1` with `tanh` between them, and a soft
//! threshold on the scalar output.

mod io;
mod kernels;

pub use kernels::tanh;
pub use io::{load_params, read_params_file, save_params, write_params_file, FORMAT_VERSION, MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FilterError, GainNetError};
use crate::filter::{GainMatrix, GainProvider};
use crate::so3::Vec3;

/// Hidden and output widths of every axis network.
pub const LAYER_SIZES: [usize; 5] = [16, 32, 64, 32, 1];

pub const MIN_POWER: i32 = -3;
pub const MAX_POWER: i32 = 5;
pub const AUGMENTED_DIM: usize = (MAX_POWER - MIN_POWER + 1) as usize;

/// Residual magnitudes are floored here before the negative powers.
pub const RESIDUAL_FLOOR: f64 = 1e-4;

/// Scale applied to the output layer's initial weights so a fresh network
/// starts close to the mid-range gain.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Residuals are divided by this before entering the network. The powers of
/// `r / FEATURE_SCALE` stay within a few decades of 1 over typical walking
/// residuals, which keeps plain SGD steps on the first layer comparable
/// across inputs.
pub const FEATURE_SCALE: f64 = 0.05;

const MAX_WIDTH: usize = 64;

/// How a residual component is turned into the network input scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualMode {
    /// `sign(r) * max(|r|, floor)`.
    #[default]
    SignedClamp,
    /// `max(|r|, floor)`.
    Absolute,
}

/// Network input layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InputMode {
    /// Powers `-3..=5` of the clamped residual.
    #[default]
    Augmented,
    /// The residual itself as a single input (no floor).
    Raw,
}

impl InputMode {
    pub fn input_dim(&self) -> usize {
        match self {
            InputMode::Augmented => AUGMENTED_DIM,
            InputMode::Raw => 1,
        }
    }
}

/// `tanh((x - 0.5) * 5) * 0.5 + 0.5`
pub fn soft_threshold(x: f64) -> f64 {
    ((x - 0.5) * 5.0).tanh() * 0.5 + 0.5
}

pub fn soft_threshold_derivative(x: f64) -> f64 {
    let t = ((x - 0.5) * 5.0).tanh();
    2.5 * (1.0 - t * t)
}

/// Applies the residual mode and floor; returns the value and its derivative.
pub fn clamp_residual(r: f64, mode: ResidualMode) -> (f64, f64) {
    let (sign, mag) = match mode {
        ResidualMode::SignedClamp => (if r < 0.0 { -1.0 } else { 1.0 }, r.abs()),
        ResidualMode::Absolute => (1.0, r.abs()),
    };
    let d_mag = if r < 0.0 { -1.0 } else { 1.0 };
    if mag < RESIDUAL_FLOOR {
        (sign * RESIDUAL_FLOOR, 0.0)
    } else {
        (sign * mag, sign * d_mag)
    }
}

/// Powers `r^-3 .. r^5` of the sign-preserving clamped residual.
pub fn augment(r: f64) -> [f64; AUGMENTED_DIM] {
    augment_clamped(clamp_residual(r, ResidualMode::SignedClamp).0)
}

fn augment_clamped(c: f64) -> [f64; AUGMENTED_DIM] {
    let mut u = [0.0; AUGMENTED_DIM];
    for (i, slot) in u.iter_mut().enumerate() {
        *slot = c.powi(MIN_POWER + i as i32);
    }
    u
}

/// Fully connected layer. `weights` is stored input-major:
/// `weights[i * outputs + o]` multiplies input `i` into output `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weight from input `i` to output `o`.
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[i * self.outputs + o]
    }

    pub fn weight_mut(&mut self, o: usize, i: usize) -> &mut f64 {
        &mut self.weights[i * self.outputs + o]
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        kernels::affine(self.inputs, self.outputs, &self.weights, &self.bias, x, out);
    }

    /// Accumulates parameter gradients into `grad` and writes the input
    /// gradient into `x_bar`.
    fn backward(&self, x: &[f64], z_bar: &[f64], grad: &mut Dense, x_bar: &mut [f64]) {
        kernels::affine_backward(
            self.inputs,
            self.outputs,
            &self.weights,
            x,
            z_bar,
            &mut grad.weights,
            &mut grad.bias,
            x_bar,
        );
    }
}

/// One axis: a stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisNet {
    pub layers: Vec<Dense>,
}

struct AxisTape {
    /// `acts[0]` is the network input, `acts[l + 1]` the output of layer `l`
    /// (after `tanh` for hidden layers, linear for the last).
    acts: [[f64; MAX_WIDTH]; 6],
    input_slope: [f64; AUGMENTED_DIM],
}

impl AxisNet {
    pub fn zeros(input_dim: usize) -> Self {
        let mut layers = Vec::with_capacity(LAYER_SIZES.len());
        let mut inputs = input_dim;
        for &outputs in &LAYER_SIZES {
            layers.push(Dense::zeros(inputs, outputs));
            inputs = outputs;
        }
        AxisNet { layers }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Network input for residual component `r`; returns the input width.
    fn input(r: f64, modes: (InputMode, ResidualMode), x: &mut [f64]) -> usize {
        match modes.0 {
            InputMode::Augmented => {
                let u = augment_clamped(clamp_residual(r, modes.1).0 / FEATURE_SCALE);
                x[..AUGMENTED_DIM].copy_from_slice(&u);
                AUGMENTED_DIM
            }
            InputMode::Raw => {
                x[0] = match modes.1 {
                    ResidualMode::SignedClamp => r,
                    ResidualMode::Absolute => r.abs(),
                } / FEATURE_SCALE;
                1
            }
        }
    }

    /// Derivative of each network input with respect to `r`.
    fn input_slope(r: f64, modes: (InputMode, ResidualMode)) -> [f64; AUGMENTED_DIM] {
        let mut slope = [0.0; AUGMENTED_DIM];
        match modes.0 {
            InputMode::Augmented => {
                let (c, dc) = clamp_residual(r, modes.1);
                if dc != 0.0 {
                    let s = FEATURE_SCALE;
                    let c = c / s;
                    for (i, slot) in slope.iter_mut().enumerate() {
                        let k = MIN_POWER + i as i32;
                        *slot = k as f64 * c.powi(k - 1) * dc / s;
                    }
                }
            }
            InputMode::Raw => {
                slope[0] = match modes.1 {
                    ResidualMode::SignedClamp => 1.0,
                    ResidualMode::Absolute => {
                        if r < 0.0 {
                            -1.0
                        } else {
                            1.0
                        }
                    }
                } / FEATURE_SCALE;
            }
        }
        slope
    }

    /// Forward pass keeping only the scalar output.
    fn logit(&self, r: f64, modes: (InputMode, ResidualMode), axis: usize) -> Result<f64, GainNetError> {
        let mut x = [0.0; MAX_WIDTH];
        let mut y = [0.0; MAX_WIDTH];
        Self::input(r, modes, &mut x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let out = &mut y[..layer.outputs];
            layer.forward(&x, out);
            if l < last {
                kernels::tanh_in_place(out);
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(GainNetError::NonFiniteActivation { axis, layer: l });
            }
            std::mem::swap(&mut x, &mut y);
        }
        Ok(x[0])
    }

    /// Forward pass recording every activation.
    fn run(&self, r: f64, modes: (InputMode, ResidualMode), axis: usize) -> Result<AxisTape, GainNetError> {
        let mut tape = AxisTape {
            acts: [[0.0; MAX_WIDTH]; 6],
            input_slope: Self::input_slope(r, modes),
        };
        Self::input(r, modes, &mut tape.acts[0]);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = tape.acts.split_at_mut(l + 1);
            let out = &mut tail[0][..layer.outputs];
            layer.forward(&head[l], out);
            if l < last {
                kernels::tanh_in_place(out);
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(GainNetError::NonFiniteActivation { axis, layer: l });
            }
        }
        Ok(tape)
    }

    fn output(&self, tape: &AxisTape) -> f64 {
        tape.acts[self.layers.len()][0]
    }

    /// Back-propagates `d gain`; returns `d residual`.
    fn backward(&self, tape: &AxisTape, gain_bar: f64, grad: &mut AxisNet) -> f64 {
        let depth = self.layers.len();
        let mut delta = [0.0; MAX_WIDTH];
        delta[0] = gain_bar * soft_threshold_derivative(self.output(tape));
        let mut below = [0.0; MAX_WIDTH];
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            layer.backward(&tape.acts[l], &delta[..layer.outputs], &mut grad.layers[l], &mut below);
            if l > 0 {
                for i in 0..layer.inputs {
                    let a = tape.acts[l][i];
                    delta[i] = below[i] * (1.0 - a * a);
                }
            }
        }
        let n = self.layers[0].inputs;
        below[..n].iter().zip(&tape.input_slope[..n]).map(|(b, s)| b * s).sum()
    }
}

/// Weights and biases of the three axis networks plus their input layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GainNetParams {
    pub axes: [AxisNet; 3],
    pub input_mode: InputMode,
    pub residual_mode: ResidualMode,
}

impl GainNetParams {
    pub fn zeros(input_mode: InputMode, residual_mode: ResidualMode) -> Self {
        let axis = AxisNet::zeros(input_mode.input_dim());
        GainNetParams {
            axes: [axis.clone(), axis.clone(), axis],
            input_mode,
            residual_mode,
        }
    }

    /// Same shapes and modes, all parameters zero (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|v| *v = 0.0);
        out
    }

    /// Deterministic fan-in uniform initialization with the default layout.
    pub fn init(seed: u64) -> Self {
        Self::init_with(seed, InputMode::default(), ResidualMode::default())
    }

    /// Weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases, output
    /// bias 0.5, output weights shrunk by `OUTPUT_INIT_SCALE`.
    pub fn init_with(seed: u64, input_mode: InputMode, residual_mode: ResidualMode) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(input_mode, residual_mode);
        for axis in params.axes.iter_mut() {
            let depth = axis.layers.len();
            for (l, layer) in axis.layers.iter_mut().enumerate() {
                let mut bound = 1.0 / (layer.inputs as f64).sqrt();
                if l + 1 == depth {
                    bound *= OUTPUT_INIT_SCALE;
                }
                for w in layer.weights.iter_mut() {
                    *w = rng.gen_range(-bound..bound);
                }
                if l + 1 == depth {
                    layer.bias.iter_mut().for_each(|b| *b = 0.5);
                }
            }
        }
        params
    }

    pub fn num_params(&self) -> usize {
        self.axes.iter().map(AxisNet::num_params).sum()
    }

    /// Visits every parameter in storage order (axis, layer, weights then bias).
    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        for axis in &self.axes {
            for layer in &axis.layers {
                layer.weights.iter().chain(&layer.bias).for_each(|&v| f(v));
            }
        }
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for axis in self.axes.iter_mut() {
            for layer in axis.layers.iter_mut() {
                layer.weights.iter_mut().chain(layer.bias.iter_mut()).for_each(&mut f);
            }
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.for_each(|v| out.push(v));
        out
    }

    /// Mutable access to the `index`-th parameter in storage order.
    pub fn param_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for axis in self.axes.iter_mut() {
            for layer in axis.layers.iter_mut() {
                if index < layer.weights.len() {
                    return Some(&mut layer.weights[index]);
                }
                index -= layer.weights.len();
                if index < layer.bias.len() {
                    return Some(&mut layer.bias[index]);
                }
                index -= layer.bias.len();
            }
        }
        None
    }

    /// `self += alpha * other`; shapes must match.
    pub fn axpy(&mut self, alpha: f64, other: &GainNetParams) {
        let flat = other.to_flat();
        let mut it = flat.iter();
        self.for_each_mut(|v| *v += alpha * it.next().expect("shape mismatch"));
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_mut(|v| *v *= factor);
    }

    pub fn norm(&self) -> f64 {
        let mut sum = 0.0;
        self.for_each(|v| sum += v * v);
        sum.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }

    /// Network output before the soft threshold for one axis.
    pub fn axis_logit(&self, axis: usize, r: f64) -> Result<f64, GainNetError> {
        self.axes[axis].logit(r, self.modes(), axis)
    }

    /// Gain for one axis.
    pub fn axis_gain(&self, axis: usize, r: f64) -> Result<f64, GainNetError> {
        self.axis_logit(axis, r).map(soft_threshold)
    }

    pub fn forward(&self, residual: &Vec3) -> Result<GainMatrix, GainNetError> {
        let k = [
            self.axis_gain(0, residual.x)?,
            self.axis_gain(1, residual.y)?,
            self.axis_gain(2, residual.z)?,
        ];
        Ok(GainMatrix {
            k_fx: k[0],
            k_fy: k[1],
            k_fz: k[2],
        })
    }

    /// Reverse-mode pass for `upstream = d loss / d gains`. Parameter
    /// gradients are added into `grads`; the return value is
    /// `d loss / d residual`.
    pub fn backward(
        &self,
        residual: &Vec3,
        upstream: &Vec3,
        grads: &mut GainNetParams,
    ) -> Result<Vec3, GainNetError> {
        let mut r_bar = Vec3::zeros();
        for axis in 0..3 {
            if upstream[axis] == 0.0 {
                continue;
            }
            let net = &self.axes[axis];
            let tape = net.run(residual[axis], self.modes(), axis)?;
            r_bar[axis] = net.backward(&tape, upstream[axis], &mut grads.axes[axis]);
        }
        Ok(r_bar)
    }

    fn modes(&self) -> (InputMode, ResidualMode) {
        (self.input_mode, self.residual_mode)
    }
}

impl GainProvider for GainNetParams {
    fn gains(&self, residual: &Vec3) -> Result<GainMatrix, FilterError> {
        Ok(self.forward(residual)?)
    }
}
