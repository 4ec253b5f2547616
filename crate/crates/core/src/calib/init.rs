//! Initial guesses for the extrinsics.
//!
//! The closed form works in two stages. Camera rotation axes are aligned with
//! the robot rotation axes, which for planar motion all point along z and so
//! fix the rotation only up to a twist about z. The twist and the xy
//! translation then come out of a linear least-squares solve of the
//! translation part of `A X = X B`:
//!
//! `(R_A - I) t_X - Rz(psi) R0 t_B = -t_A`, linear in `(t_x, t_y, cos psi, sin psi)`.
//!
//! z is unobservable from planar motion and is pinned to the first valid height.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::{CalibError, CalibProblem};
use crate::geometry::RigidTransform;
use crate::plane::kabsch_rotation;

/// Rotation angles at or below this (radians) carry no usable axis.
const MIN_AXIS_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Identity,
    #[default]
    ClosedForm,
}

fn first_height(problem: &CalibProblem, cam: usize) -> f64 {
    problem
        .heights
        .get(cam)
        .and_then(|hs| hs.iter().find(|h| h.chi))
        .map_or(0.0, |h| h.z_bar)
}

pub fn initialize(problem: &CalibProblem, mode: InitMode) -> Result<Vec<RigidTransform>, CalibError> {
    (0..problem.num_cameras)
        .map(|cam| match mode {
            InitMode::Identity => Ok(RigidTransform::from_translation(Vector3::new(
                0.0,
                0.0,
                first_height(problem, cam),
            ))),
            InitMode::ClosedForm => closed_form(problem, cam),
        })
        .collect()
}

pub(crate) fn closed_form(problem: &CalibProblem, cam: usize) -> Result<RigidTransform, CalibError> {
    let motions: Vec<(&RigidTransform, &RigidTransform)> = problem
        .pairs
        .iter()
        .filter_map(|p| p.camera(cam).map(|b| (&p.robot_rel, b)))
        .collect();

    let (src, dst): (Vec<_>, Vec<_>) = motions
        .iter()
        .filter(|(a, b)| a.rotation_angle() > MIN_AXIS_ANGLE && b.rotation_angle() > MIN_AXIS_ANGLE)
        .map(|(a, b)| (b.axis_angle(), a.axis_angle()))
        .unzip();
    if src.is_empty() {
        return Err(CalibError::DegenerateAxes(cam));
    }
    let (r0, _) = kabsch_rotation(&src, &dst).ok_or(CalibError::DegenerateAxes(cam))?;

    // Normal equations for u = (t_x, t_y, cos psi, sin psi).
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Vector4::<f64>::zeros();
    for (a, b) in &motions {
        let ra = a.rotation();
        let ta = a.translation();
        let v = r0 * b.translation();
        let rows = [
            (Vector4::new(ra[(0, 0)] - 1.0, ra[(0, 1)], -v.x, v.y), -ta.x),
            (Vector4::new(ra[(1, 0)], ra[(1, 1)] - 1.0, -v.y, -v.x), -ta.y),
        ];
        for (row, rhs) in rows {
            ata += row * row.transpose();
            atb += row * rhs;
        }
    }
    let eig = ata.symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(CalibError::DegenerateAxes(cam));
    }
    let u = ata.cholesky().ok_or(CalibError::DegenerateAxes(cam))?.solve(&atb);
    let psi = u[3].atan2(u[2]);
    let (s, c) = psi.sin_cos();
    #[rustfmt::skip]
    let rz = Matrix3::new(
        c, -s, 0.0,
        s, c, 0.0,
        0.0, 0.0, 1.0,
    );
    let rotation = rz * r0;
    RigidTransform::new(rotation, Vector3::new(u[0], u[1], first_height(problem, cam)))
        .map_err(|_| CalibError::DegenerateAxes(cam))
}
