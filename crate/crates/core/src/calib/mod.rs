//! Camera-to-robot calibration by nonlinear least squares.
//!
//! For each consecutive pair of poses the robot increment `A` and the
//! camera increment `B` satisfy `A X = X B`, with `X` the camera pose in the
//! robot frame. The solver minimizes
//!
//! - the Frobenius norm of `A X_c - X_c B_c` for every camera seeing the pattern,
//! - `chi * ([X_c]_z - z_bar)^2` for every height measurement,
//! - in joint mode, `B_j X_jk - X_jk B_k` with `X_jk = X_j^-1 X_k` for every
//!   pair of cameras seeing the pattern at both steps.

mod init;
mod residual;
mod solver;

pub use init::{initialize, InitMode};
pub use residual::{residual_height, residual_joint, residual_motion, total_cost, Block, ResidualKind};
pub use solver::{DiffScheme, Termination, JACOBIAN_STEP};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PlanarPose, RigidTransform};
use crate::plane::HeightMeasurement;
use residual::{assemble, Scope};

/// Minimum spread of robot yaw increments (radians) for rotation about z
/// to be observable.
pub const MIN_YAW_SPREAD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("camera {0} did not see the pattern in this motion pair")]
    CameraNotVisible(usize),
    #[error("cameras {0} and {1} are not a co-visible pair")]
    PairNotVisible(usize, usize),
    #[error("camera {0}: need at least two motions with yaw increments differing by more than 1e-3 rad")]
    Observability(usize),
    #[error("camera {0} has no valid height measurement; its z is unobservable")]
    NoHeightMeasurement(usize),
    #[error("cost is not finite; the input is corrupt")]
    NonFiniteCost,
    #[error("camera {0}: rotation axes are degenerate for the closed-form initialization")]
    DegenerateAxes(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// One step `i -> i+1` of the robot and of every camera that saw the
/// pattern at both steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPair {
    /// Robot increment `A`, planar.
    pub robot_rel: RigidTransform,
    /// Camera increment `B` per camera, `None` if not visible at both steps.
    camera_rel: Vec<Option<RigidTransform>>,
}

impl MotionPair {
    pub fn new(robot_rel: RigidTransform, camera_rel: Vec<Option<RigidTransform>>) -> Self {
        Self { robot_rel, camera_rel }
    }

    pub fn camera(&self, cam: usize) -> Option<&RigidTransform> {
        self.camera_rel.get(cam).and_then(Option::as_ref)
    }

    pub fn num_cameras(&self) -> usize {
        self.camera_rel.len()
    }

    pub fn visible(&self) -> impl Iterator<Item = usize> + '_ {
        self.camera_rel
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|_| i))
    }

    /// All `(j, k)` with `j < k` that are both visible.
    pub fn covisible_pairs(&self) -> Vec<(usize, usize)> {
        let vis: Vec<usize> = self.visible().collect();
        let mut out = Vec::new();
        for (a, &j) in vis.iter().enumerate() {
            for &k in &vis[a + 1..] {
                out.push((j, k));
            }
        }
        out
    }

    pub fn robot_yaw(&self) -> f64 {
        PlanarPose::project(&self.robot_rel).yaw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub motion: f64,
    pub height: f64,
    pub joint: f64,
    /// Multiplier on translation entries of matrix residuals (1 m weighs as 1 rad).
    pub translation: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            motion: 1.0,
            height: 10.0,
            joint: 1.0,
            translation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tol: f64,
    /// Stop when the chart update norm drops below this.
    pub step_tol: f64,
    pub init_mode: InitMode,
    /// Initial damping, relative to the largest diagonal entry of `J^T J`.
    pub damping_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            cost_tol: 1e-12,
            step_tol: 1e-12,
            init_mode: InitMode::ClosedForm,
            damping_init: 1e-3,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), CalibError> {
        if self.cost_tol > 0.0 && self.step_tol > 0.0 && self.damping_init > 0.0 && self.max_iters > 0 {
            Ok(())
        } else {
            Err(CalibError::InvalidProblem("solver tolerances must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Each camera against the robot only.
    #[default]
    Independent,
    /// Adds pairwise constraints between co-visible cameras.
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibProblem {
    pub pairs: Vec<MotionPair>,
    /// Height measurements per camera.
    pub heights: Vec<Vec<HeightMeasurement>>,
    pub num_cameras: usize,
    pub weights: Weights,
    pub solver: SolverConfig,
    pub mode: SolveMode,
    /// Require a valid height for each camera (full 6-DoF output).
    pub full_dof: bool,
}

impl CalibProblem {
    pub fn new(pairs: Vec<MotionPair>, heights: Vec<Vec<HeightMeasurement>>, num_cameras: usize) -> Self {
        Self {
            pairs,
            heights,
            num_cameras,
            weights: Weights::default(),
            solver: SolverConfig::default(),
            mode: SolveMode::Independent,
            full_dof: true,
        }
    }

    pub fn has_covisible_pairs(&self) -> bool {
        self.pairs.iter().any(|p| !p.covisible_pairs().is_empty())
    }

    /// Checks structure, observability and height availability.
    pub fn check(&self) -> Result<(), CalibError> {
        self.solver.validate()?;
        if self.num_cameras == 0 {
            return Err(CalibError::InvalidProblem("no cameras".into()));
        }
        if self.heights.len() > self.num_cameras {
            return Err(CalibError::InvalidProblem("more height lists than cameras".into()));
        }
        if let Some(p) = self.pairs.iter().find(|p| p.num_cameras() > self.num_cameras) {
            return Err(CalibError::InvalidProblem(format!(
                "motion pair references {} cameras, problem has {}",
                p.num_cameras(),
                self.num_cameras
            )));
        }
        for cam in 0..self.num_cameras {
            let yaws: Vec<f64> = self
                .pairs
                .iter()
                .filter(|p| p.camera(cam).is_some())
                .map(MotionPair::robot_yaw)
                .collect();
            let lo = yaws.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = yaws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if yaws.len() < 2 || !(hi - lo > MIN_YAW_SPREAD) {
                return Err(CalibError::Observability(cam));
            }
            if self.full_dof && !self.heights.get(cam).is_some_and(|hs| hs.iter().any(|h| h.chi)) {
                return Err(CalibError::NoHeightMeasurement(cam));
            }
        }
        Ok(())
    }
}

/// RMS of each residual family (0 when a family is empty).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualRms {
    pub motion: f64,
    pub height: f64,
    pub joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub extrinsics: Vec<RigidTransform>,
    pub initial: Vec<RigidTransform>,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Vec<Termination>,
    pub per_residual_rms: ResidualRms,
    /// Accepted-step cost sequence of each solve.
    pub cost_history: Vec<Vec<f64>>,
    /// Whether the closed-form initialization fell back to identity.
    pub init_fallback: bool,
}

pub fn residual_rms(problem: &CalibProblem, xs: &[RigidTransform]) -> Result<ResidualRms, CalibError> {
    let mut r = Vec::new();
    let mut kinds = Vec::new();
    assemble(problem, xs, Scope::All, &mut r, Some(&mut kinds))?;
    let rms = |kind: ResidualKind| {
        let (sum, n) = r
            .iter()
            .zip(&kinds)
            .filter(|(_, k)| **k == kind)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v * v, n + 1));
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    };
    Ok(ResidualRms {
        motion: rms(ResidualKind::Motion),
        height: rms(ResidualKind::Height),
        joint: rms(ResidualKind::Joint),
    })
}

/// Stacked residual vector of the whole problem.
pub fn residual_vector(problem: &CalibProblem, xs: &[RigidTransform]) -> Result<Vec<f64>, CalibError> {
    let mut r = Vec::new();
    assemble(problem, xs, Scope::All, &mut r, None)?;
    Ok(r)
}

/// Numeric Jacobian of [`residual_vector`] with respect to the local chart
/// `X_c * exp(delta_c)` at `xs`, columns ordered `(t, omega)` per camera.
pub fn jacobian(
    problem: &CalibProblem,
    xs: &[RigidTransform],
    scheme: DiffScheme,
) -> Result<nalgebra::DMatrix<f64>, CalibError> {
    let f = |x: &[RigidTransform], out: &mut Vec<f64>| assemble(problem, x, Scope::All, out, None);
    solver::numeric_jacobian(&f, xs, scheme)
}

fn initial_guess(problem: &CalibProblem) -> (Vec<RigidTransform>, bool) {
    match problem.solver.init_mode {
        InitMode::Identity => (initialize(problem, InitMode::Identity).unwrap_or_default(), false),
        InitMode::ClosedForm => {
            let identity = initialize(problem, InitMode::Identity).unwrap_or_default();
            let mut fallback = false;
            let xs = (0..problem.num_cameras)
                .map(|cam| match init::closed_form(problem, cam) {
                    Ok(x) => x,
                    Err(_) => {
                        fallback = true;
                        identity[cam]
                    }
                })
                .collect();
            (xs, fallback)
        }
    }
}

/// Solves for every camera's pose in the robot frame.
pub fn calibrate(problem: &CalibProblem) -> Result<CalibrationResult, CalibError> {
    problem.check()?;
    let (initial, init_fallback) = initial_guess(problem);
    calibrate_from(problem, initial, init_fallback)
}

/// Like [`calibrate`] but starting from the given extrinsics.
pub fn calibrate_from(
    problem: &CalibProblem,
    initial: Vec<RigidTransform>,
    init_fallback: bool,
) -> Result<CalibrationResult, CalibError> {
    problem.check()?;
    if initial.len() != problem.num_cameras {
        return Err(CalibError::InvalidProblem("initial guess has the wrong length".into()));
    }
    let joint = problem.mode == SolveMode::Joint && problem.num_cameras > 1 && problem.has_covisible_pairs();
    let (extrinsics, iterations, termination, cost_history) = if joint {
        let f = |x: &[RigidTransform], out: &mut Vec<f64>| assemble(problem, x, Scope::All, out, None);
        let out = solver::levenberg_marquardt(f, initial.clone(), &problem.solver)?;
        (out.xs, out.iterations, vec![out.termination], vec![out.history])
    } else {
        let mut xs = Vec::with_capacity(problem.num_cameras);
        let (mut iters, mut terms, mut hist) = (0, Vec::new(), Vec::new());
        for cam in 0..problem.num_cameras {
            let f = |x: &[RigidTransform], out: &mut Vec<f64>| {
                let mut full = initial.clone();
                full[cam] = x[0];
                assemble(problem, &full, Scope::Camera(cam), out, None)
            };
            let out = solver::levenberg_marquardt(f, vec![initial[cam]], &problem.solver)?;
            xs.push(out.xs[0]);
            iters += out.iterations;
            terms.push(out.termination);
            hist.push(out.history);
        }
        (xs, iters, terms, hist)
    };
    let final_cost = total_cost(problem, &extrinsics)?;
    if !final_cost.is_finite() {
        return Err(CalibError::NonFiniteCost);
    }
    Ok(CalibrationResult {
        per_residual_rms: residual_rms(problem, &extrinsics)?,
        converged: termination.iter().all(Termination::converged),
        extrinsics,
        initial,
        final_cost,
        iterations,
        termination,
        cost_history,
        init_fallback,
    })
}

#[cfg(test)]
mod tests;
