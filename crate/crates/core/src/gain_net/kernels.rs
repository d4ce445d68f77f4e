//! Dense-layer arithmetic. Shapes of the fixed architecture get
//! monomorphized loops; anything else takes the generic path.

const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// `exp(y)` for `y` in `[-40, 0]`, branch free so it vectorizes across a layer.
#[inline(always)]
fn exp_nonpositive(y: f64) -> f64 {
    let n = (y * std::f64::consts::LOG2_E).round_ties_even();
    let r = (y - n * LN2_HI) - n * LN2_LO;
    // Taylor series to degree 13; |r| <= ln2 / 2.
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    p * f64::from_bits(((n as i64 + 1023) as u64) << 52)
}

/// Hyperbolic tangent with absolute error below 1e-15.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let a = if a > 20.0 { 20.0 } else { a };
    let e = exp_nonpositive(-2.0 * a);
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

pub fn tanh_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = tanh(*x);
    }
}

#[inline(always)]
fn affine_fixed<const I: usize, const O: usize>(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let y: &mut [f64; O] = (&mut y[..O]).try_into().unwrap();
    y.copy_from_slice(&b[..O]);
    let x: &[f64; I] = x[..I].try_into().unwrap();
    for (i, xi) in x.iter().enumerate() {
        let col: &[f64; O] = w[i * O..(i + 1) * O].try_into().unwrap();
        for o in 0..O {
            y[o] += xi * col[o];
        }
    }
}

fn affine_dyn(inputs: usize, outputs: usize, w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let y = &mut y[..outputs];
    y.copy_from_slice(&b[..outputs]);
    for (i, xi) in x[..inputs].iter().enumerate() {
        for (yo, wo) in y.iter_mut().zip(&w[i * outputs..(i + 1) * outputs]) {
            *yo += xi * wo;
        }
    }
}

/// `y = b + Wᵀx` with `w` stored input-major (`w[i * outputs + o]`).
pub fn affine(inputs: usize, outputs: usize, w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    match (inputs, outputs) {
        (9, 16) => affine_fixed::<9, 16>(w, b, x, y),
        (1, 16) => affine_fixed::<1, 16>(w, b, x, y),
        (16, 32) => affine_fixed::<16, 32>(w, b, x, y),
        (32, 64) => affine_fixed::<32, 64>(w, b, x, y),
        (64, 32) => affine_fixed::<64, 32>(w, b, x, y),
        (32, 1) => affine_fixed::<32, 1>(w, b, x, y),
        _ => affine_dyn(inputs, outputs, w, b, x, y),
    }
}

#[inline(always)]
fn affine_backward_fixed<const I: usize, const O: usize>(
    w: &[f64],
    x: &[f64],
    dz: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
) {
    let dz: &[f64; O] = dz[..O].try_into().unwrap();
    for (g, d) in gb[..O].iter_mut().zip(dz) {
        *g += d;
    }
    for i in 0..I {
        let col: &[f64; O] = w[i * O..(i + 1) * O].try_into().unwrap();
        let gcol: &mut [f64; O] = (&mut gw[i * O..(i + 1) * O]).try_into().unwrap();
        let xi = x[i];
        let mut acc = 0.0;
        for o in 0..O {
            gcol[o] += xi * dz[o];
            acc += col[o] * dz[o];
        }
        dx[i] = acc;
    }
}

fn affine_backward_dyn(
    inputs: usize,
    outputs: usize,
    w: &[f64],
    x: &[f64],
    dz: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
) {
    for (g, d) in gb[..outputs].iter_mut().zip(dz) {
        *g += d;
    }
    for i in 0..inputs {
        let mut acc = 0.0;
        for o in 0..outputs {
            gw[i * outputs + o] += x[i] * dz[o];
            acc += w[i * outputs + o] * dz[o];
        }
        dx[i] = acc;
    }
}

/// Accumulates `gw += x dzᵀ`, `gb += dz` and writes `dx = W dz`.
#[allow(clippy::too_many_arguments)]
pub fn affine_backward(
    inputs: usize,
    outputs: usize,
    w: &[f64],
    x: &[f64],
    dz: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
) {
    match (inputs, outputs) {
        (9, 16) => affine_backward_fixed::<9, 16>(w, x, dz, gw, gb, dx),
        (1, 16) => affine_backward_fixed::<1, 16>(w, x, dz, gw, gb, dx),
        (16, 32) => affine_backward_fixed::<16, 32>(w, x, dz, gw, gb, dx),
        (32, 64) => affine_backward_fixed::<32, 64>(w, x, dz, gw, gb, dx),
        (64, 32) => affine_backward_fixed::<64, 32>(w, x, dz, gw, gb, dx),
        (32, 1) => affine_backward_fixed::<32, 1>(w, x, dz, gw, gb, dx),
        _ => affine_backward_dyn(inputs, outputs, w, x, dz, gw, gb, dx),
    }
}
