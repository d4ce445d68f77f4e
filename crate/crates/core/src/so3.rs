//! Rotation-matrix algebra used by the attitude filters.
//!
//! All attitudes are body-to-reference rotations: `v_r = R * v_b`, with the
//! reference frame north-east-down. Euler angles follow the aerospace z-y-x
//! sequence, `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::So3Error;

/// Three-component real vector (angular rate, specific force or direction).
pub type Vec3 = Vector3<f64>;

/// Plain 3x3 real matrix, not necessarily orthogonal.
pub type Mat3 = Matrix3<f64>;

/// Smallest admissible eigenvalue of `RᵀR` before orthogonalization refuses.
pub const SINGULAR_EIGEN_FLOOR: f64 = 1e-12;

/// `|cos(pitch)|` below which the Euler decomposition is degenerate.
pub const GIMBAL_LOCK_COS: f64 = 1e-6;

/// Skew-symmetric cross-product matrix: `skew(w) * v == w.cross(&v)`.
pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(
        0.0, -w.z, w.y, //
        w.z, 0.0, -w.x, //
        -w.y, w.x, 0.0,
    )
}

/// Body-to-reference attitude. Orthogonal with determinant +1.
#[derive(Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    /// Wraps a matrix the caller guarantees to be a proper rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        RotationMatrix(m)
    }

    /// Projects an arbitrary full-rank matrix onto the nearest rotation.
    pub fn from_matrix(m: &Mat3) -> Result<Self, So3Error> {
        orthogonalize(m)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `|v|` radians about `v` (Rodrigues).
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        let k = skew(&(v / angle));
        RotationMatrix(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
    }

    /// Unit quaternion `(w, x, y, z)` to rotation. The quaternion is normalized first.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        RotationMatrix(Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    /// Unit quaternion `(w, x, y, z)` with `w >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let r = &self.0;
        let trace = r.trace();
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            [0.25 * s, (r[(2, 1)] - r[(1, 2)]) / s, (r[(0, 2)] - r[(2, 0)]) / s, (r[(1, 0)] - r[(0, 1)]) / s]
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            [(r[(2, 1)] - r[(1, 2)]) / s, 0.25 * s, (r[(0, 1)] + r[(1, 0)]) / s, (r[(0, 2)] + r[(2, 0)]) / s]
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            [(r[(0, 2)] - r[(2, 0)]) / s, (r[(0, 1)] + r[(1, 0)]) / s, 0.25 * s, (r[(1, 2)] + r[(2, 1)]) / s]
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            [(r[(1, 0)] - r[(0, 1)]) / s, (r[(0, 2)] + r[(2, 0)]) / s, (r[(1, 2)] + r[(2, 1)]) / s, 0.25 * s]
        };
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        q.map(|v| sign * v / n)
    }

    pub fn from_euler(e: &EulerAngles) -> Self {
        Self::rot_z(e.yaw) * Self::rot_y(e.pitch) * Self::rot_x(e.roll)
    }

    /// z-y-x decomposition. At gimbal lock roll is set to zero.
    pub fn to_euler(&self) -> EulerAngles {
        let r = &self.0;
        let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        if self.is_gimbal_locked() {
            return EulerAngles {
                roll: 0.0,
                pitch,
                yaw: wrap_pi(f64::atan2(-r[(0, 1)], r[(1, 1)])),
            };
        }
        EulerAngles {
            roll: wrap_pi(f64::atan2(r[(2, 1)], r[(2, 2)])),
            pitch,
            yaw: wrap_pi(f64::atan2(r[(1, 0)], r[(0, 0)])),
        }
    }

    /// True when pitch is within `GIMBAL_LOCK_COS` of +-90 degrees.
    pub fn is_gimbal_locked(&self) -> bool {
        let r = &self.0;
        (r[(0, 0)].powi(2) + r[(1, 0)].powi(2)).sqrt() < GIMBAL_LOCK_COS
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// Reference-frame vector expressed in the body frame (`Rᵀ v`).
    pub fn to_body(&self, v_ref: &Vec3) -> Vec3 {
        self.0.tr_mul(v_ref)
    }

    /// Body-frame vector expressed in the reference frame (`R v`).
    pub fn to_reference(&self, v_body: &Vec3) -> Vec3 {
        self.0 * v_body
    }

    /// Rotation angle of `selfᵀ * other`, in radians.
    pub fn angle_to(&self, other: &RotationMatrix) -> f64 {
        let rel = self.0.tr_mul(&other.0);
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Largest absolute entry of `RᵀR - I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.tr_mul(&self.0) - Mat3::identity()).amax()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for RotationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RotationMatrix{:?}", self.0.transpose().as_slice())
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles { roll, pitch, yaw }
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Intermediates of `X (XᵀX)^(-1/2)` kept for the adjoint.
#[derive(Clone, Debug)]
pub struct PolarFactor {
    pub input: Mat3,
    pub eigenvectors: Mat3,
    pub eigenvalues: Vec3,
    pub inv_sqrt: Mat3,
    pub output: RotationMatrix,
}

/// Nearest rotation `X (XᵀX)^(-1/2)`, via the symmetric eigendecomposition of `XᵀX`.
pub fn orthogonalize(raw: &Mat3) -> Result<RotationMatrix, So3Error> {
    polar_factor(raw).map(|p| p.output)
}

pub fn polar_factor(raw: &Mat3) -> Result<PolarFactor, So3Error> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(So3Error::NonFinite);
    }
    let (eigenvalues, v) = symmetric_eigen(&raw.tr_mul(raw));
    let min = eigenvalues.min();
    if min < SINGULAR_EIGEN_FLOOR {
        return Err(So3Error::SingularInput { min_eigenvalue: min });
    }
    let d = Mat3::from_diagonal(&eigenvalues.map(|l| 1.0 / l.sqrt()));
    let inv_sqrt = v * d * v.transpose();
    let out = raw * inv_sqrt;
    if out.determinant() <= 0.0 {
        return Err(So3Error::Reflection);
    }
    Ok(PolarFactor {
        input: *raw,
        eigenvectors: v,
        eigenvalues,
        inv_sqrt,
        output: RotationMatrix(out),
    })
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns. Jacobi
/// keeps full relative accuracy for clustered eigenvalues, which is the
/// normal case here (`RᵀR` of a nearly orthogonal matrix is close to `I`).
pub fn symmetric_eigen(m: &Mat3) -> (Vec3, Mat3) {
    let mut a = *m;
    let mut v = Mat3::identity();
    for _sweep in 0..50 {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        if off <= 1e-40 * a.diagonal().norm_squared() {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Mat3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= rot;
        }
    }
    (a.diagonal(), v)
}

impl PolarFactor {
    /// Pulls a gradient on the orthogonalized output back to the raw input.
    pub fn adjoint(&self, out_bar: &Mat3) -> Mat3 {
        let v = &self.eigenvectors;
        let sq = self.eigenvalues.map(f64::sqrt);
        // Divided differences of l^(-1/2); finite even for repeated eigenvalues.
        let w_bar = self.input.tr_mul(out_bar);
        let mut inner = v.tr_mul(&w_bar) * v;
        for i in 0..3 {
            for j in 0..3 {
                inner[(i, j)] *= -1.0 / (sq[i] * sq[j] * (sq[i] + sq[j]));
            }
        }
        let gram_bar = v * inner * v.transpose();
        out_bar * self.inv_sqrt + self.input * (gram_bar + gram_bar.transpose())
    }
}
