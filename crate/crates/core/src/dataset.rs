//! In-memory calibration dataset shared by the simulator, the file loader
//! and the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::MotionPair;
use crate::geometry::{relative_motion, PlanarPose, RigidTransform};
use crate::plane::{PinholeCamera, PixelMatch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no cameras")]
    NoCameras,
    #[error("camera {camera}: {found} poses, odometry has {expected}")]
    PoseCount {
        camera: usize,
        expected: usize,
        found: usize,
    },
    #[error("camera {camera}: {found} match lists, expected {expected}")]
    MatchCount {
        camera: usize,
        expected: usize,
        found: usize,
    },
    #[error("ground truth has {found} transforms for {expected} cameras")]
    GroundTruthCount { expected: usize, found: usize },
    #[error("{0} camera intrinsics for {1} cameras")]
    IntrinsicsCount(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub cameras: Vec<PinholeCamera>,
    /// Robot poses `A_i` from odometry, relative to the start pose.
    pub odometry: Vec<PlanarPose>,
    /// Per camera, camera pose in the pattern frame `B_i` when the pattern was seen.
    pub camera_poses: Vec<Vec<Option<RigidTransform>>>,
    /// Per camera, matches between frames `i` and `i + 1` (`len = poses - 1`).
    pub matches: Vec<Vec<Vec<PixelMatch>>>,
    /// Camera poses in the robot frame, when known.
    pub ground_truth: Option<Vec<RigidTransform>>,
}

impl CalibrationDataset {
    pub fn num_cameras(&self) -> usize {
        self.camera_poses.len()
    }

    pub fn num_poses(&self) -> usize {
        self.odometry.len()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let m = self.num_cameras();
        if m == 0 {
            return Err(DatasetError::NoCameras);
        }
        if self.cameras.len() != m {
            return Err(DatasetError::IntrinsicsCount(self.cameras.len(), m));
        }
        let n = self.num_poses();
        for (camera, poses) in self.camera_poses.iter().enumerate() {
            if poses.len() != n {
                return Err(DatasetError::PoseCount {
                    camera,
                    expected: n,
                    found: poses.len(),
                });
            }
        }
        if self.matches.len() != m {
            return Err(DatasetError::MatchCount {
                camera: self.matches.len(),
                expected: m,
                found: self.matches.len(),
            });
        }
        for (camera, lists) in self.matches.iter().enumerate() {
            if lists.len() != n.saturating_sub(1) {
                return Err(DatasetError::MatchCount {
                    camera,
                    expected: n.saturating_sub(1),
                    found: lists.len(),
                });
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != m {
                return Err(DatasetError::GroundTruthCount {
                    expected: m,
                    found: gt.len(),
                });
            }
        }
        Ok(())
    }

    pub fn robot_poses(&self) -> Vec<RigidTransform> {
        self.odometry.iter().map(PlanarPose::lift).collect()
    }

    /// Relative motions between consecutive poses.
    pub fn motion_pairs(&self) -> Vec<MotionPair> {
        let robot = self.robot_poses();
        (0..self.num_poses().saturating_sub(1))
            .map(|i| {
                let cams = self
                    .camera_poses
                    .iter()
                    .map(|poses| match (&poses[i], &poses[i + 1]) {
                        (Some(b_i), Some(b_next)) => Some(relative_motion(b_i, b_next)),
                        _ => None,
                    })
                    .collect();
                MotionPair::new(relative_motion(&robot[i], &robot[i + 1]), cams)
            })
            .collect()
    }

    /// Keeps the first `k` poses at which at least one camera saw the
    /// pattern. Matches survive only between poses that were adjacent in
    /// the original sequence.
    pub fn first_visible(&self, k: usize) -> CalibrationDataset {
        let keep: Vec<usize> = (0..self.num_poses())
            .filter(|&i| self.camera_poses.iter().any(|p| p[i].is_some()))
            .take(k)
            .collect();
        let camera_poses = self
            .camera_poses
            .iter()
            .map(|poses| keep.iter().map(|&i| poses[i]).collect())
            .collect();
        let matches = self
            .matches
            .iter()
            .map(|lists| {
                keep.windows(2)
                    .map(|w| {
                        if w[1] == w[0] + 1 {
                            lists[w[0]].clone()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect();
        CalibrationDataset {
            cameras: self.cameras.clone(),
            odometry: keep.iter().map(|&i| self.odometry[i]).collect(),
            camera_poses,
            matches,
            ground_truth: self.ground_truth.clone(),
        }
    }

    /// Number of poses at which camera `c` saw the pattern.
    pub fn visible_count(&self, c: usize) -> usize {
        self.camera_poses[c].iter().filter(|p| p.is_some()).count()
    }
}
