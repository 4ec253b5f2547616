use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    align_trajectories, normal_tilt_deg, project, ransac_plane, triangulate_dlt, validate_and_measure,
    HeightMeasurement, PinholeCamera, PixelMatch, PlaneEquation, RansacConfig,
};
use crate::geometry::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Triangulate every consecutive pair, then fit one plane.
    #[default]
    Accumulate,
    /// Fit one plane per consecutive pair.
    PerPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub ransac: RansacConfig,
    /// Maximum angle between the world-frame plane normal and world z (degrees).
    pub angle_tol_deg: f64,
    pub mode: DetectionMode,
    /// Triangulated points reprojecting further than this (pixels) from
    /// either observation are discarded before plane fitting.
    pub max_reprojection_px: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            ransac: RansacConfig::default(),
            angle_tol_deg: 5.0,
            mode: DetectionMode::Accumulate,
            max_reprojection_px: 3.0,
        }
    }
}

/// Outcome of ground detection for one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundDetection {
    /// Largest plane found, in the pattern frame (accumulate mode only).
    pub plane: Option<PlaneEquation>,
    /// Tilt of `plane` against world z (degrees).
    pub tilt_deg: Option<f64>,
    /// Rotation world <- pattern from trajectory alignment.
    pub r_world_pattern: Option<Matrix3<f64>>,
    pub triangulated: usize,
    pub inliers: usize,
    /// One entry per pose with a camera pose; rejected poses carry `chi = false`.
    pub heights: Vec<HeightMeasurement>,
}

impl GroundDetection {
    pub fn valid_count(&self) -> usize {
        self.heights.iter().filter(|h| h.chi).count()
    }

    /// Mean of the accepted heights.
    pub fn mean_height(&self) -> Option<f64> {
        let valid: Vec<f64> = self.heights.iter().filter(|h| h.chi).map(|h| h.z_bar).collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

fn triangulate_pair(
    camera: &PinholeCamera,
    b_i: &RigidTransform,
    b_next: &RigidTransform,
    matches: &[PixelMatch],
    max_reprojection_px: f64,
) -> Vec<Vector3<f64>> {
    let reprojects = |pose: &RigidTransform, p: &Vector3<f64>, px: &Vector2<f64>| {
        project(camera, pose, p).is_ok_and(|q| (q - px).norm() <= max_reprojection_px)
    };
    matches
        .iter()
        .filter(|m| m.in_bounds(camera))
        .filter_map(|m| {
            let p = triangulate_dlt(camera, b_i, b_next, m).ok()?;
            (reprojects(b_i, &p, &m.p_i) && reprojects(b_next, &p, &m.p_next)).then_some(p)
        })
        .collect()
}

/// Runs triangulation, RANSAC, trajectory alignment and validation for one
/// camera.
///
/// `robot_poses[i]` is the odometry pose `A_i`, `camera_poses[i]` the camera
/// pose in the pattern frame `B_i` (absent when the pattern was not seen),
/// and `matches[i]` the correspondences between frames `i` and `i + 1`.
pub fn detect_heights(
    camera: &PinholeCamera,
    robot_poses: &[RigidTransform],
    camera_poses: &[Option<RigidTransform>],
    matches: &[Vec<PixelMatch>],
    config: &DetectionConfig,
) -> GroundDetection {
    let visible: Vec<usize> = (0..camera_poses.len().min(robot_poses.len()))
        .filter(|&i| camera_poses[i].is_some())
        .collect();
    let a: Vec<_> = visible.iter().map(|&i| *robot_poses[i].translation()).collect();
    let b: Vec<_> = visible
        .iter()
        .filter_map(|&i| camera_poses[i].map(|p| *p.translation()))
        .collect();
    let r_world_pattern = align_trajectories(&a, &b).ok().map(|t| *t.rotation());

    let pairs: Vec<(usize, &RigidTransform, &RigidTransform, &[PixelMatch])> =
        (0..camera_poses.len().saturating_sub(1))
            .filter_map(|i| {
                let (Some(b_i), Some(b_next)) = (camera_poses[i].as_ref(), camera_poses[i + 1].as_ref()) else {
                    return None;
                };
                let m = matches.get(i).map(Vec::as_slice).unwrap_or(&[]);
                Some((i, b_i, b_next, m))
            })
            .collect();

    let mut detection = GroundDetection {
        plane: None,
        tilt_deg: None,
        r_world_pattern,
        triangulated: 0,
        inliers: 0,
        heights: Vec::new(),
    };

    match config.mode {
        DetectionMode::Accumulate => {
            let points: Vec<_> = pairs
                .iter()
                .flat_map(|(_, b_i, b_next, m)| triangulate_pair(camera, b_i, b_next, m, config.max_reprojection_px))
                .collect();
            detection.triangulated = points.len();
            let fitted = ransac_plane(&points, &config.ransac).ok();
            if let Some((plane, inliers)) = &fitted {
                detection.plane = Some(*plane);
                detection.inliers = inliers.len();
                detection.tilt_deg = r_world_pattern.map(|r| normal_tilt_deg(plane, &r));
            }
            for &i in &visible {
                let h = match (&fitted, &r_world_pattern, camera_poses[i]) {
                    (Some((plane, _)), Some(r), Some(b)) => {
                        validate_and_measure(plane, r, b.translation(), config.angle_tol_deg, i)
                    }
                    _ => HeightMeasurement::rejected(i),
                };
                detection.heights.push(h);
            }
        }
        DetectionMode::PerPair => {
            for &i in &visible {
                let pair = pairs.iter().find(|(k, ..)| *k == i);
                let h = pair
                    .and_then(|(k, b_i, b_next, m)| {
                        let points = triangulate_pair(camera, b_i, b_next, m, config.max_reprojection_px);
                        detection.triangulated += points.len();
                        let ransac = RansacConfig {
                            seed: config.ransac.seed.wrapping_add(*k as u64),
                            ..config.ransac
                        };
                        let (plane, inliers) = ransac_plane(&points, &ransac).ok()?;
                        detection.inliers += inliers.len();
                        let r = r_world_pattern.as_ref()?;
                        Some(validate_and_measure(
                            &plane,
                            r,
                            b_i.translation(),
                            config.angle_tol_deg,
                            i,
                        ))
                    })
                    .unwrap_or(HeightMeasurement::rejected(i));
                detection.heights.push(h);
            }
        }
    }
    detection
}
