//! Synthetic sensors: pinhole camera with a parametric detection channel,
//! thermal imager, and 1-D range sensors.
//!
//! Camera frame convention: +Z forward along the optical axis, +X right,
//! +Y down (pixel v grows downward).

mod detect;
mod range;
mod render;
mod thermal;

pub use detect::{
    detect, largest_of_class, ClassChannel, Detection, DetectionClass, DetectorChannel,
};
pub use range::{range_down, range_forward, range_short, RangeFaults, RangeParams, RangeReading};
pub use render::{render_rgb, RenderParams};
pub use thermal::{render_thermal, ThermalParams};

use crate::math::{Mat3, Vec3};
use crate::world::Pose;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.u < self.width as f64 && p.v >= 0.0 && p.v < self.height as f64
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        PixelPoint { u, v }
    }
}

/// Camera pose: position plus camera-to-world rotation.
#[derive(Debug, Clone, Copy)]
pub struct CameraPose {
    pub position: Vec3,
    pub rot: Mat3,
}

impl CameraPose {
    /// Camera frame from a UAV pose and a downward gimbal pitch, using
    /// the *actual* camera heading (including any injected
    /// `gimbal_offset_yaw`). Sensing uses this frame.
    pub fn actual(pose: &Pose, pitch_down: f64) -> Self {
        Self::from_yaw_pitch(pose.position, pose.yaw + pose.gimbal_offset_yaw, pitch_down)
    }

    /// Camera frame the control software *believes* it has: body yaw
    /// only, no offset. Command mapping uses this frame, which is what
    /// makes a gimbal offset fault servo in the wrong direction.
    pub fn nominal(pose: &Pose, pitch_down: f64) -> Self {
        Self::from_yaw_pitch(pose.position, pose.yaw, pitch_down)
    }

    /// Build from explicit yaw and downward pitch (0 = level,
    /// pi/2 = straight down).
    pub fn from_yaw_pitch(position: Vec3, yaw: f64, pitch_down: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch_down.sin_cos();
        let z_c = Vec3::new(cp * cy, cp * sy, -sp);
        let x_c = Vec3::new(sy, -cy, 0.0);
        let y_c = z_c.cross(x_c);
        CameraPose { position, rot: Mat3::from_columns(x_c, y_c, z_c) }
    }

    /// Identity orientation: camera axes coincide with world axes
    /// (looking along world +Z). Convenient in unit tests.
    pub fn world_aligned(position: Vec3) -> Self {
        CameraPose { position, rot: Mat3::IDENTITY }
    }

    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.rot.tr_mul_vec(p - self.position)
    }

    pub fn camera_to_world_dir(&self, d: Vec3) -> Vec3 {
        self.rot.mul_vec(d)
    }

    /// Optical axis direction in the world frame.
    pub fn forward(&self) -> Vec3 {
        self.rot.col(2)
    }
}

/// Pinhole projection result. A point at or behind the image plane is a
/// value, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel(PixelPoint),
    Behind,
}

impl Projection {
    pub fn pixel(self) -> Option<PixelPoint> {
        match self {
            Projection::Pixel(p) => Some(p),
            Projection::Behind => None,
        }
    }
}

/// Project a world point through the camera: u = fx X/Z + cx,
/// v = fy Y/Z + cy in the camera frame; `Behind` when Z <= 0.
pub fn project(intr: &CameraIntrinsics, cam: &CameraPose, world_point: Vec3) -> Projection {
    let p = cam.world_to_camera(world_point);
    if p.z <= 0.0 {
        return Projection::Behind;
    }
    Projection::Pixel(PixelPoint::new(
        intr.fx * p.x / p.z + intr.cx,
        intr.fy * p.y / p.z + intr.cy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let intr = CameraIntrinsics::default();
        let cam = CameraPose::from_yaw_pitch(Vec3::new(3.0, -2.0, 5.0), 0.7, 0.3);
        for dist in [0.5, 2.0, 40.0] {
            let p = cam.position + cam.forward() * dist;
            let px = project(&intr, &cam, p).pixel().unwrap();
            assert_relative_eq!(px.u, intr.cx, epsilon = 1e-9);
            assert_relative_eq!(px.v, intr.cy, epsilon = 1e-9);
        }
    }

    #[test]
    fn direct_substitution_example() {
        // camera at origin looking along world +Z, point (1, 0, 2):
        // u = 600 * 1/2 + 320 = 620
        let intr = CameraIntrinsics::default();
        let cam = CameraPose::world_aligned(Vec3::ZERO);
        let px = project(&intr, &cam, Vec3::new(1.0, 0.0, 2.0)).pixel().unwrap();
        assert_relative_eq!(px.u, 620.0, epsilon = 1e-12);
        assert_relative_eq!(px.v, 240.0, epsilon = 1e-12);
        // inverse ray check: pixel back through the model
        let x = (px.u - intr.cx) / intr.fx * 2.0;
        assert_relative_eq!(x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_a_value() {
        let intr = CameraIntrinsics::default();
        let cam = CameraPose::world_aligned(Vec3::ZERO);
        assert_eq!(project(&intr, &cam, Vec3::new(0.0, 0.0, -1.0)), Projection::Behind);
        assert_eq!(project(&intr, &cam, Vec3::new(0.0, 0.0, 0.0)), Projection::Behind);
    }

    #[test]
    fn downward_camera_orientation() {
        // straight-down camera with yaw 0: world +x (forward) maps to
        // image up (decreasing v), world -y maps to image right.
        let pose = Pose::new(Vec3::new(0.0, 0.0, 5.0), 0.0);
        let cam = CameraPose::actual(&pose, std::f64::consts::FRAC_PI_2);
        let intr = CameraIntrinsics::default();
        let ahead = project(&intr, &cam, Vec3::new(1.0, 0.0, 0.0)).pixel().unwrap();
        assert!(ahead.v < intr.cy);
        assert_relative_eq!(ahead.u, intr.cx, epsilon = 1e-9);
        let right = project(&intr, &cam, Vec3::new(0.0, -1.0, 0.0)).pixel().unwrap();
        assert!(right.u > intr.cx);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let cam = CameraPose::from_yaw_pitch(Vec3::ZERO, 1.1, 0.6);
        for i in 0..3 {
            for j in 0..3 {
                let d = cam.rot.col(i).dot(cam.rot.col(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(d, expected, epsilon = 1e-12);
            }
        }
        let handed = cam.rot.col(0).cross(cam.rot.col(1)).dot(cam.rot.col(2));
        assert_relative_eq!(handed, 1.0, epsilon = 1e-12);
    }
}
