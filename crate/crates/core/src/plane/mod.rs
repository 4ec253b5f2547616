//! Ground plane detection and validation.
//!
//! Pixel matches between consecutive frames are triangulated into the
//! pattern frame, the dominant plane is extracted with RANSAC, and the
//! plane is accepted as ground only if its normal, rotated into the world
//! frame, is close to world z. Accepted planes yield camera height
//! measurements.

mod align;
mod camera;
mod detect;
mod ransac;
mod triangulate;

pub use align::{align_trajectories, kabsch_rotation};
pub use camera::{project, PinholeCamera, PixelMatch};
pub use detect::{detect_heights, DetectionConfig, DetectionMode, GroundDetection};
pub use ransac::{ransac_plane, RansacConfig};
pub use triangulate::triangulate_dlt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),
    #[error("point has non-positive depth {0} in the camera frame")]
    NonPositiveDepth(f64),
    #[error("baseline {0} m is below the triangulation threshold")]
    DegenerateBaseline(f64),
    #[error("triangulated point lies behind a camera")]
    BehindCamera,
    #[error("need at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("all sampled point triples are collinear")]
    DegenerateGeometry,
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("point configuration is degenerate for rigid alignment")]
    DegenerateConfiguration,
}

/// Plane `n . p + d = 0` with unit normal, canonicalized so that `d >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneEquation {
    normal: Vector3<f64>,
    offset: f64,
}

impl PlaneEquation {
    /// Normalizes `(normal, offset)` jointly and flips the sign so `d >= 0`.
    /// Returns `None` for a zero or non-finite normal.
    pub fn new(normal: Vector3<f64>, offset: f64) -> Option<Self> {
        let norm = normal.norm();
        if !(norm.is_finite() && offset.is_finite()) || norm < 1e-300 {
            return None;
        }
        let (mut n, mut d) = (normal / norm, offset / norm);
        if d < 0.0 {
            n = -n;
            d = -d;
        }
        Some(Self { normal: n, offset: d })
    }

    /// Plane through `point` with the given normal.
    pub fn from_point_normal(point: &Vector3<f64>, normal: &Vector3<f64>) -> Option<Self> {
        Self::new(*normal, -normal.dot(point))
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.signed_distance(p).abs()
    }
}

/// A camera height above ground, gated by `chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightMeasurement {
    pub z_bar: f64,
    pub chi: bool,
    pub pose_index: usize,
}

impl HeightMeasurement {
    pub fn valid(z_bar: f64, pose_index: usize) -> Self {
        Self {
            z_bar,
            chi: true,
            pose_index,
        }
    }

    pub fn rejected(pose_index: usize) -> Self {
        Self {
            z_bar: 0.0,
            chi: false,
            pose_index,
        }
    }
}

/// Accepts the plane as ground if its world-frame normal is within
/// `angle_tol_deg` of world z, then measures the camera height as the
/// point-to-plane distance of the camera center.
pub fn validate_and_measure(
    plane: &PlaneEquation,
    r_world_pattern: &Matrix3<f64>,
    camera_center_in_pattern: &Vector3<f64>,
    angle_tol_deg: f64,
    pose_index: usize,
) -> HeightMeasurement {
    let n_world = r_world_pattern * plane.normal();
    let angle = n_world.z.abs().clamp(0.0, 1.0).acos().to_degrees();
    if angle > angle_tol_deg {
        return HeightMeasurement::rejected(pose_index);
    }
    let z_bar = plane.distance(camera_center_in_pattern);
    if z_bar > 0.0 && z_bar.is_finite() {
        HeightMeasurement::valid(z_bar, pose_index)
    } else {
        HeightMeasurement::rejected(pose_index)
    }
}

/// Angle in degrees between the world-frame plane normal and world z.
pub fn normal_tilt_deg(plane: &PlaneEquation, r_world_pattern: &Matrix3<f64>) -> f64 {
    (r_world_pattern * plane.normal())
        .z
        .abs()
        .clamp(0.0, 1.0)
        .acos()
        .to_degrees()
}
