//! End-to-end calibration of a dataset: ground detection per camera, then
//! the least-squares solve, then evaluation when ground truth is known.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{calibrate, CalibError, CalibProblem, SolveMode, SolverConfig, Weights};
use crate::dataset::{CalibrationDataset, DatasetError};
use crate::geometry::RigidTransform;
use crate::metrics::{evaluate, Diagnostics, Evaluation, MetricsError};
use crate::plane::{detect_heights, DetectionConfig, GroundDetection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detection: DetectionConfig,
    pub weights: Weights,
    pub solver: SolverConfig,
    pub mode: SolveMode,
    pub full_dof: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            weights: Weights::default(),
            solver: SolverConfig::default(),
            mode: SolveMode::Independent,
            full_dof: true,
        }
    }
}

/// Ground detection summary for one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSummary {
    pub triangulated: usize,
    pub inliers: usize,
    pub valid: usize,
    pub rejected: usize,
    pub tilt_deg: Option<f64>,
    pub mean_height: Option<f64>,
}

impl From<&GroundDetection> for HeightSummary {
    fn from(d: &GroundDetection) -> Self {
        Self {
            triangulated: d.triangulated,
            inliers: d.inliers,
            valid: d.valid_count(),
            rejected: d.heights.len() - d.valid_count(),
            tilt_deg: d.tilt_deg,
            mean_height: d.mean_height(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    /// Joint mode was requested but no camera pair saw the pattern together.
    pub joint_fallback: bool,
    pub extrinsics: Vec<RigidTransform>,
    pub initial: Vec<RigidTransform>,
    pub ground: Vec<HeightSummary>,
    pub diagnostics: Diagnostics,
    /// Present when the dataset has ground truth.
    pub evaluation: Option<Evaluation>,
}

/// Detects the ground for every camera.
pub fn detect_all(dataset: &CalibrationDataset, config: &DetectionConfig) -> Vec<GroundDetection> {
    let robot = dataset.robot_poses();
    (0..dataset.num_cameras())
        .map(|c| {
            detect_heights(
                &dataset.cameras[c],
                &robot,
                &dataset.camera_poses[c],
                &dataset.matches[c],
                config,
            )
        })
        .collect()
}

/// Builds the least-squares problem for a dataset.
pub fn build_problem(
    dataset: &CalibrationDataset,
    config: &PipelineConfig,
) -> Result<(CalibProblem, Vec<GroundDetection>), PipelineError> {
    dataset.validate()?;
    let detections = detect_all(dataset, &config.detection);
    let heights = detections.iter().map(|d| d.heights.clone()).collect();
    let mut problem = CalibProblem::new(dataset.motion_pairs(), heights, dataset.num_cameras());
    problem.weights = config.weights;
    problem.solver = config.solver;
    problem.mode = config.mode;
    problem.full_dof = config.full_dof;
    Ok((problem, detections))
}

pub fn run(dataset: &CalibrationDataset, config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let (problem, detections) = build_problem(dataset, config)?;
    let result = calibrate(&problem)?;
    let evaluation = dataset
        .ground_truth
        .as_ref()
        .map(|gt| evaluate(&result.extrinsics, gt))
        .transpose()?;
    let visible_pairs = (0..problem.num_cameras)
        .map(|c| problem.pairs.iter().filter(|p| p.camera(c).is_some()).count())
        .collect();
    let valid_heights = detections.iter().map(GroundDetection::valid_count).collect();
    Ok(RunReport {
        config: *config,
        joint_fallback: config.mode == SolveMode::Joint && !(problem.num_cameras > 1 && problem.has_covisible_pairs()),
        diagnostics: Diagnostics::from_result(&result, valid_heights, visible_pairs),
        ground: detections.iter().map(HeightSummary::from).collect(),
        extrinsics: result.extrinsics,
        initial: result.initial,
        evaluation,
    })
}
