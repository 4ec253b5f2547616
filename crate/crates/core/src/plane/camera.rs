use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::PlaneError;
use crate::geometry::RigidTransform;

/// Minimum camera-frame depth accepted by [`project`].
pub(crate) const MIN_DEPTH: f64 = 1e-9;

/// Ideal pinhole intrinsics (no distortion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, PlaneError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), PlaneError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(PlaneError::InvalidCamera(format!("{self:?}")))
        }
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x <= self.width as f64 && pixel.y <= self.height as f64
    }

    /// Projects a point given in the camera frame.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Result<Vector2<f64>, PlaneError> {
        if !(p.z > MIN_DEPTH) {
            return Err(PlaneError::NonPositiveDepth(p.z));
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Normalized image coordinates `K^-1 [u v 1]^T`, as a ray with z = 1.
    pub fn normalize(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0)
    }
}

impl Default for PinholeCamera {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

/// One feature correspondence between frame `i` and frame `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMatch {
    pub p_i: Vector2<f64>,
    pub p_next: Vector2<f64>,
}

impl PixelMatch {
    pub fn new(p_i: Vector2<f64>, p_next: Vector2<f64>) -> Self {
        Self { p_i, p_next }
    }

    pub fn in_bounds(&self, camera: &PinholeCamera) -> bool {
        camera.contains(&self.p_i) && camera.contains(&self.p_next)
    }
}

/// Projects `point` (expressed in the frame `pose` maps into) to pixels.
/// `pose` is the camera pose: it maps camera coordinates to the point's frame.
pub fn project(
    camera: &PinholeCamera,
    pose: &RigidTransform,
    point: &Vector3<f64>,
) -> Result<Vector2<f64>, PlaneError> {
    let p_cam = pose.inverse().transform_point(point);
    camera.project_camera_point(&p_cam)
}
