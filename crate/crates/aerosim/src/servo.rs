//! Image-based visual servoing: feature error, interaction matrices
//! (full 2x6 and reduced 2x4), and the stacked pseudo-inverse velocity
//! law with convergence detection.
//!
//! Feature points are normalized image coordinates x = (u - cx)/fx,
//! y = (v - cy)/fy with a depth estimate Z. The reduced twist controls
//! (Xdot, Ydot, Zdot, psidot): linear camera velocity plus rotation
//! about the optical axis, which is all an underactuated quadrotor can
//! track.

use crate::math::Vec3;
use crate::sensing::{CameraIntrinsics, CameraPose, PixelPoint};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ServoError {
    #[error("feature depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("feature/goal length mismatch: {features} vs {goals}")]
    LengthMismatch { features: usize, goals: usize },
    #[error("at least two feature points required, got {0}")]
    InsufficientFeatures(usize),
    #[error("interaction matrix is rank deficient")]
    Degenerate,
    #[error("gain must be positive")]
    BadGain,
}

/// Normalized image feature with a depth estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFeature {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl NormalizedFeature {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        NormalizedFeature { x, y, z }
    }

    pub fn from_pixel(intr: &CameraIntrinsics, p: PixelPoint, depth: f64) -> Self {
        NormalizedFeature {
            x: (p.u - intr.cx) / intr.fx,
            y: (p.v - intr.cy) / intr.fy,
            z: depth,
        }
    }
}

/// Stacked feature error e = s - s*, 2k entries for k points.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureError(pub Vec<f64>);

impl FeatureError {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// e = s - s*, pairs concatenated in feature order (the corner-sort
/// contract fixes that order upstream).
pub fn feature_error(s: &[NormalizedFeature], s_star: &[(f64, f64)]) -> Result<FeatureError, ServoError> {
    if s.len() != s_star.len() {
        return Err(ServoError::LengthMismatch { features: s.len(), goals: s_star.len() });
    }
    let mut e = Vec::with_capacity(2 * s.len());
    for (f, g) in s.iter().zip(s_star) {
        e.push(f.x - g.0);
        e.push(f.y - g.1);
    }
    Ok(FeatureError(e))
}

/// Full 2x6 interaction block for one feature; twist columns are
/// (vx, vy, vz, wx, wy, wz) in the camera frame.
pub fn interaction_row_full(f: &NormalizedFeature) -> Result<[[f64; 6]; 2], ServoError> {
    if f.z <= 0.0 {
        return Err(ServoError::NonPositiveDepth(f.z));
    }
    let (x, y, z) = (f.x, f.y, f.z);
    Ok([
        [-1.0 / z, 0.0, x / z, x * y, -(1.0 + x * x), y],
        [0.0, -1.0 / z, y / z, 1.0 + y * y, -x * y, -x],
    ])
}

/// Reduced 2x4 block: columns (vx, vy, vz, psidot), i.e. columns
/// {1, 2, 3, 6} of the full block.
pub fn interaction_row_reduced(f: &NormalizedFeature) -> Result<[[f64; 4]; 2], ServoError> {
    if f.z <= 0.0 {
        return Err(ServoError::NonPositiveDepth(f.z));
    }
    let (x, y, z) = (f.x, f.y, f.z);
    Ok([[-1.0 / z, 0.0, x / z, y], [0.0, -1.0 / z, y / z, -x]])
}

/// Camera twist solved by the reduced IBVS law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraTwist {
    /// Linear velocity in the camera frame (x right, y down, z forward).
    pub linear: Vec3,
    /// Rotation rate about the optical axis.
    pub psi_dot: f64,
}

impl CameraTwist {
    pub const ZERO: CameraTwist = CameraTwist { linear: Vec3::ZERO, psi_dot: 0.0 };

    pub fn norm(&self) -> f64 {
        (self.linear.dot(self.linear) + self.psi_dot * self.psi_dot).sqrt()
    }

    /// Map into a world-frame velocity command and yaw rate through the
    /// commanded camera orientation.
    pub fn to_world(&self, cam: &CameraPose) -> (Vec3, f64) {
        let v_world = cam.camera_to_world_dir(self.linear);
        let omega_world = cam.camera_to_world_dir(Vec3::new(0.0, 0.0, self.psi_dot));
        (v_world, omega_world.z)
    }
}

/// Smallest singular value below which the stack is declared DEGENERATE.
const MIN_SINGULAR_VALUE: f64 = 1e-6;
/// Tikhonov damping on L^T L; one refinement step removes its bias.
const DAMPING: f64 = 1e-9;

/// v_c = -lambda * pinv(L) * e over the stacked reduced blocks.
///
/// Over-constrained stacks give the least-squares twist; the solve uses
/// damped normal equations with one iterative-refinement step so the
/// least-squares residual stays orthogonal to the column space at
/// machine precision.
pub fn ibvs_velocity(
    features: &[NormalizedFeature],
    goals: &[(f64, f64)],
    lambda: f64,
) -> Result<CameraTwist, ServoError> {
    if features.len() < 2 {
        return Err(ServoError::InsufficientFeatures(features.len()));
    }
    if lambda <= 0.0 {
        return Err(ServoError::BadGain);
    }
    let e = feature_error(features, goals)?;

    let rows = 2 * features.len();
    let mut l = DMatrix::<f64>::zeros(rows, 4);
    for (i, f) in features.iter().enumerate() {
        let block = interaction_row_reduced(f)?;
        for (r, row) in block.iter().enumerate() {
            for (c, value) in row.iter().enumerate() {
                l[(2 * i + r, c)] = *value;
            }
        }
    }
    let e_vec = DVector::from_vec(e.0.clone());

    let lt_l: Matrix4<f64> = (l.transpose() * &l).fixed_view::<4, 4>(0, 0).into_owned();
    let eigen = lt_l.symmetric_eigen();
    let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < MIN_SINGULAR_VALUE * MIN_SINGULAR_VALUE {
        return Err(ServoError::Degenerate);
    }

    let rhs4: Vector4<f64> = {
        let r = l.transpose() * (&e_vec * (-lambda));
        Vector4::new(r[0], r[1], r[2], r[3])
    };
    let damped = lt_l + Matrix4::identity() * DAMPING;
    let chol = damped.cholesky().ok_or(ServoError::Degenerate)?;
    let mut v = chol.solve(&rhs4);
    // one refinement step against the undamped normal equations
    let residual = rhs4 - lt_l * v;
    v += chol.solve(&residual);

    Ok(CameraTwist { linear: Vec3::new(v[0], v[1], v[2]), psi_dot: v[3] })
}

/// True when every per-point pixel-equivalent error component is
/// strictly inside the tolerance.
pub fn servo_converged(e: &FeatureError, tol_px: f64, intr: &CameraIntrinsics) -> bool {
    e.0.chunks_exact(2)
        .all(|pair| (pair[0] * intr.fx).abs() < tol_px && (pair[1] * intr.fy).abs() < tol_px)
}
