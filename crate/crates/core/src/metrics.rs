//! Error metrics against ground truth and their aggregation over trials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{CalibrationResult, ResidualRms, Termination};
use crate::geometry::{pose_error, PoseError, RigidTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("camera index {index} out of range for {len} cameras")]
    Index { index: usize, len: usize },
    #[error("{estimated} estimated transforms for {truth} ground-truth transforms")]
    LengthMismatch { estimated: usize, truth: usize },
    #[error("nothing to aggregate")]
    EmptyInput,
}

/// Error of the estimated relative pose `X_j^-1 X_k` between two cameras.
///
/// The relative pose does not depend on the choice of robot frame, so this
/// error is unaffected by a common rigid change applied to all estimates.
pub fn camera_to_camera_error(
    estimated: &[RigidTransform],
    truth: &[RigidTransform],
    j: usize,
    k: usize,
) -> Result<PoseError, MetricsError> {
    let len = estimated.len().min(truth.len());
    for index in [j, k] {
        if index >= len {
            return Err(MetricsError::Index { index, len });
        }
    }
    let rel = |xs: &[RigidTransform]| xs[j].inverse().compose(&xs[k]);
    Ok(pose_error(&rel(estimated), &rel(truth)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub j: usize,
    pub k: usize,
    pub error: PoseError,
}

/// Per-camera and camera-to-camera errors for one calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_camera: Vec<PoseError>,
    /// All `j < k`, in lexicographic order.
    pub per_pair: Vec<PairError>,
}

pub fn evaluate(estimated: &[RigidTransform], truth: &[RigidTransform]) -> Result<Evaluation, MetricsError> {
    if estimated.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            estimated: estimated.len(),
            truth: truth.len(),
        });
    }
    let per_camera = estimated.iter().zip(truth).map(|(e, t)| pose_error(e, t)).collect();
    let m = estimated.len();
    let mut per_pair = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for j in 0..m {
        for k in j + 1..m {
            per_pair.push(PairError {
                j,
                k,
                error: camera_to_camera_error(estimated, truth, j, k)?,
            });
        }
    }
    Ok(Evaluation { per_camera, per_pair })
}

/// Mean of per-axis errors.
pub fn mean_error(errors: &[PoseError]) -> Result<PoseError, MetricsError> {
    Ok(aggregate(errors)?.mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: PoseError,
    /// Population standard deviation.
    pub std: PoseError,
}

pub fn aggregate(errors: &[PoseError]) -> Result<Aggregate, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = errors.len() as f64;
    let mut mean = [0.0; 6];
    for e in errors {
        for (m, v) in mean.iter_mut().zip(e.as_array()) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 6];
    for e in errors {
        for ((s, v), m) in var.iter_mut().zip(e.as_array()).zip(mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    Ok(Aggregate {
        count: errors.len(),
        mean: PoseError::from_array(mean),
        std: PoseError::from_array(var.map(f64::sqrt)),
    })
}

/// Solver state worth keeping next to the errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Vec<Termination>,
    pub per_residual_rms: ResidualRms,
    pub init_fallback: bool,
    /// Valid height measurements per camera.
    pub valid_heights: Vec<usize>,
    /// Motion pairs seen by each camera.
    pub visible_pairs: Vec<usize>,
}

impl Diagnostics {
    pub fn from_result(result: &CalibrationResult, valid_heights: Vec<usize>, visible_pairs: Vec<usize>) -> Self {
        Self {
            final_cost: result.final_cost,
            iterations: result.iterations,
            converged: result.converged,
            termination: result.termination.clone(),
            per_residual_rms: result.per_residual_rms,
            init_fallback: result.init_fallback,
            valid_heights,
            visible_pairs,
        }
    }
}
