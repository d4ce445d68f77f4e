//! Two-vector (Triad) attitude construction from gravity and a pseudo
//! magnetic direction.

use crate::error::FilterError;
use crate::so3::{Mat3, RotationMatrix, Vec3};

/// Smallest `|g x m|` accepted when building a Triad frame.
pub const DEGENERATE_TRIAD_CROSS: f64 = 1e-6;

/// Choice of the secondary (pseudo magnetic) vector pair.
///
/// Both anchors give the same updated gravity direction, so roll, pitch and
/// every later gravity prediction agree; they differ only in how yaw is
/// carried through the update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TriadAnchor {
    /// Body x axis `(1,0,0)` paired with its gyro-propagated image `R_g e_x`.
    /// Leaves the z-y-x yaw of `R_g` unchanged.
    #[default]
    BodyForward,
    /// Reference north `(1,0,0)` paired with its body-frame image `R_gᵀ e_x`.
    /// Keeps the gyro-estimated north inside the vertical north plane, which
    /// is close to but not exactly a yaw-preserving update.
    ReferenceNorth,
}

impl TriadAnchor {
    /// `(m_ref, m_body)` for a gyro-propagated attitude.
    pub fn pseudo_vectors(&self, r_g: &RotationMatrix) -> (Vec3, Vec3) {
        match self {
            TriadAnchor::BodyForward => (r_g.to_reference(&Vec3::x()), Vec3::x()),
            TriadAnchor::ReferenceNorth => (Vec3::x(), r_g.to_body(&Vec3::x())),
        }
    }
}

/// Orthonormal frame `[x | y | z]` with `x = g`, `y ∝ g × m`, `z ∝ x × y`,
/// plus the intermediates needed to differentiate it.
#[derive(Clone, Copy, Debug)]
pub struct TriadFrame {
    pub axes: Mat3,
    g: Vec3,
    m: Vec3,
    cross_norm: f64,
    z_norm: f64,
}

impl TriadFrame {
    pub fn new(g: &Vec3, m: &Vec3) -> Result<Self, FilterError> {
        let c1 = g.cross(m);
        let cross_norm = c1.norm();
        if !(cross_norm >= DEGENERATE_TRIAD_CROSS) {
            return Err(FilterError::DegenerateTriad { cross_norm });
        }
        let y = c1 / cross_norm;
        let c2 = g.cross(&y);
        let z_norm = c2.norm();
        let z = c2 / z_norm;
        Ok(TriadFrame {
            axes: Mat3::from_columns(&[*g, y, z]),
            g: *g,
            m: *m,
            cross_norm,
            z_norm,
        })
    }

    /// Pulls a gradient on the frame columns back to `(g, m)`.
    pub fn adjoint(&self, axes_bar: &Mat3) -> (Vec3, Vec3) {
        let x = self.g;
        let y = self.axes.column(1).into_owned();
        let z = self.axes.column(2).into_owned();
        let mut x_bar = axes_bar.column(0).into_owned();
        let mut y_bar = axes_bar.column(1).into_owned();
        let z_bar = axes_bar.column(2).into_owned();

        // z = normalize(x × y)
        let c2_bar = (z_bar - z * z.dot(&z_bar)) / self.z_norm;
        x_bar += y.cross(&c2_bar);
        y_bar += c2_bar.cross(&x);

        // y = normalize(g × m)
        let c1_bar = (y_bar - y * y.dot(&y_bar)) / self.cross_norm;
        let g_bar = x_bar + self.m.cross(&c1_bar);
        let m_bar = c1_bar.cross(&self.g);
        (g_bar, m_bar)
    }
}

/// Intermediates of a full Triad solve.
#[derive(Clone, Copy, Debug)]
pub struct TriadFrames {
    pub reference: TriadFrame,
    pub body: TriadFrame,
    pub attitude: RotationMatrix,
}

impl TriadFrames {
    pub fn solve(g_ref: &Vec3, m_ref: &Vec3, g_body: &Vec3, m_body: &Vec3) -> Result<Self, FilterError> {
        let reference = TriadFrame::new(g_ref, m_ref)?;
        let body = TriadFrame::new(g_body, m_body)?;
        let attitude = RotationMatrix::from_matrix_unchecked(reference.axes * body.axes.transpose());
        Ok(TriadFrames { reference, body, attitude })
    }

    /// Gradient on the attitude pulled back to `(g_ref, m_ref, g_body, m_body)`.
    pub fn adjoint(&self, attitude_bar: &Mat3) -> [Vec3; 4] {
        let ref_bar = attitude_bar * self.body.axes;
        let body_bar = attitude_bar.transpose() * self.reference.axes;
        let (g_ref_bar, m_ref_bar) = self.reference.adjoint(&ref_bar);
        let (g_body_bar, m_body_bar) = self.body.adjoint(&body_bar);
        [g_ref_bar, m_ref_bar, g_body_bar, m_body_bar]
    }
}

/// Rotation taking `g_body -> g_ref` exactly and `m_body` into the half plane
/// spanned by `g_ref` and `m_ref`. Both `g` vectors must be unit length.
pub fn triad(g_ref: &Vec3, m_ref: &Vec3, g_body: &Vec3, m_body: &Vec3) -> Result<RotationMatrix, FilterError> {
    TriadFrames::solve(g_ref, m_ref, g_body, m_body).map(|f| f.attitude)
}

/// Rebuilds the attitude from an updated unit gravity direction, taking the
/// remaining degree of freedom from the gyro-propagated attitude.
pub fn triad_reconstruct(
    g_updated_b: &Vec3,
    r_g: &RotationMatrix,
    g_r: &Vec3,
    anchor: TriadAnchor,
) -> Result<RotationMatrix, FilterError> {
    let (m_ref, m_body) = anchor.pseudo_vectors(r_g);
    triad(g_r, &m_ref, g_updated_b, &m_body)
}
