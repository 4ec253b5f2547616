//! Residual blocks of the calibration cost.
//!
//! Each matrix residual is the top 3x4 block of a homogeneous difference,
//! flattened row-major: entries 3, 7 and 11 are translation entries and are
//! multiplied by the translation weight.

use super::{CalibError, CalibProblem, MotionPair, SolveMode, Weights};
use crate::geometry::RigidTransform;
use crate::plane::HeightMeasurement;

pub type Block = [f64; 12];

fn difference(lhs: &RigidTransform, rhs: &RigidTransform, scale: f64, translation_weight: f64) -> Block {
    let l = lhs.top_rows();
    let r = rhs.top_rows();
    let mut out = [0.0; 12];
    for i in 0..12 {
        let w = if i % 4 == 3 { scale * translation_weight } else { scale };
        out[i] = w * (l[i] - r[i]);
    }
    out
}

/// `A X - X B` for camera `cam`.
pub fn residual_motion(
    pair: &MotionPair,
    cam: usize,
    x: &RigidTransform,
    weights: &Weights,
) -> Result<Block, CalibError> {
    let b = pair.camera(cam).ok_or(CalibError::CameraNotVisible(cam))?;
    let ax = pair.robot_rel.compose(x);
    let xb = x.compose(b);
    Ok(difference(&ax, &xb, weights.motion.sqrt(), weights.translation))
}

/// `sqrt(w_height) * chi * ([x]_z - z_bar)`.
pub fn residual_height(x: &RigidTransform, h: &HeightMeasurement, weights: &Weights) -> f64 {
    if !h.chi {
        return 0.0;
    }
    weights.height.sqrt() * (x.translation().z - h.z_bar)
}

/// `B_j X_jk - X_jk B_k` with `X_jk = x_j^-1 x_k`.
pub fn residual_joint(
    pair: &MotionPair,
    j: usize,
    k: usize,
    x_j: &RigidTransform,
    x_k: &RigidTransform,
    weights: &Weights,
) -> Result<Block, CalibError> {
    let (Some(b_j), Some(b_k)) = (pair.camera(j), pair.camera(k)) else {
        return Err(CalibError::PairNotVisible(j, k));
    };
    if j >= k {
        return Err(CalibError::PairNotVisible(j, k));
    }
    let x_jk = x_j.inverse().compose(x_k);
    Ok(difference(
        &b_j.compose(&x_jk),
        &x_jk.compose(b_k),
        weights.joint.sqrt(),
        weights.translation,
    ))
}

/// Which residual family an entry of the stacked residual vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Motion,
    Joint,
    Height,
}

/// Restricts assembly to the residuals touching a set of cameras.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Scope {
    All,
    Camera(usize),
}

impl Scope {
    fn includes(&self, cam: usize) -> bool {
        match self {
            Scope::All => true,
            Scope::Camera(c) => *c == cam,
        }
    }
}

/// Appends every residual of `problem` at `xs` to `out`, optionally tagging
/// each entry with its kind.
pub(crate) fn assemble(
    problem: &CalibProblem,
    xs: &[RigidTransform],
    scope: Scope,
    out: &mut Vec<f64>,
    mut kinds: Option<&mut Vec<ResidualKind>>,
) -> Result<(), CalibError> {
    let w = &problem.weights;
    let mut push_block = |block: Block, kind: ResidualKind, out: &mut Vec<f64>| {
        out.extend_from_slice(&block);
        if let Some(k) = kinds.as_deref_mut() {
            k.extend(std::iter::repeat_n(kind, 12));
        }
    };
    for pair in &problem.pairs {
        for cam in pair.visible().filter(|&c| scope.includes(c)) {
            push_block(residual_motion(pair, cam, &xs[cam], w)?, ResidualKind::Motion, out);
        }
        if problem.mode == SolveMode::Joint && matches!(scope, Scope::All) {
            for (j, k) in pair.covisible_pairs() {
                push_block(residual_joint(pair, j, k, &xs[j], &xs[k], w)?, ResidualKind::Joint, out);
            }
        }
    }
    for (cam, heights) in problem.heights.iter().enumerate() {
        if !scope.includes(cam) {
            continue;
        }
        for h in heights.iter().filter(|h| h.chi) {
            out.push(residual_height(&xs[cam], h, w));
            if let Some(k) = kinds.as_deref_mut() {
                k.push(ResidualKind::Height);
            }
        }
    }
    Ok(())
}

/// Sum of squared residuals over every block of the problem.
pub fn total_cost(problem: &CalibProblem, xs: &[RigidTransform]) -> Result<f64, CalibError> {
    if xs.len() != problem.num_cameras {
        return Err(CalibError::InvalidProblem(format!(
            "expected {} extrinsics, got {}",
            problem.num_cameras,
            xs.len()
        )));
    }
    let mut r = Vec::new();
    assemble(problem, xs, Scope::All, &mut r, None)?;
    Ok(r.iter().map(|v| v * v).sum())
}
