//! Damped Gauss-Newton (Levenberg-Marquardt) over stacked SE(3) charts.
//!
//! Every parameter block is an extrinsic `X_c`. Each iteration linearizes
//! around the current estimate with the local chart `X_c * exp(delta_c)`,
//! where `delta_c` is a [`Pose6`] increment, so the chart is always used
//! near the origin and never meets the axis-angle singularity at pi.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CalibError, SolverConfig};
use crate::geometry::{Pose6, RigidTransform};

/// Central-difference step for the numeric Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    CostTolerance,
    StepTolerance,
    ZeroCost,
    MaxIterations,
}

impl Termination {
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffScheme {
    Central,
    Forward,
    Backward,
}

pub(crate) struct LmOutcome {
    pub xs: Vec<RigidTransform>,
    pub iterations: usize,
    pub termination: Termination,
    /// Cost after every accepted step, starting with the initial cost.
    pub history: Vec<f64>,
}

pub(crate) fn retract(xs: &[RigidTransform], delta: &[f64]) -> Vec<RigidTransform> {
    xs.iter()
        .enumerate()
        .map(|(c, x)| x.compose(&Pose6::from_slice(&delta[6 * c..6 * c + 6]).to_transform()))
        .collect()
}

fn eval<F>(f: &F, xs: &[RigidTransform]) -> Result<DVector<f64>, CalibError>
where
    F: Fn(&[RigidTransform], &mut Vec<f64>) -> Result<(), CalibError>,
{
    let mut r = Vec::new();
    f(xs, &mut r)?;
    Ok(DVector::from_vec(r))
}

/// Numeric Jacobian of the residual with respect to the local chart at `xs`.
pub(crate) fn numeric_jacobian<F>(f: &F, xs: &[RigidTransform], scheme: DiffScheme) -> Result<DMatrix<f64>, CalibError>
where
    F: Fn(&[RigidTransform], &mut Vec<f64>) -> Result<(), CalibError>,
{
    let n = 6 * xs.len();
    let r0 = eval(f, xs)?;
    let mut jac = DMatrix::zeros(r0.len(), n);
    let mut delta = vec![0.0; n];
    for p in 0..n {
        let column = match scheme {
            DiffScheme::Central => {
                delta[p] = JACOBIAN_STEP;
                let plus = eval(f, &retract(xs, &delta))?;
                delta[p] = -JACOBIAN_STEP;
                let minus = eval(f, &retract(xs, &delta))?;
                (plus - minus) / (2.0 * JACOBIAN_STEP)
            }
            DiffScheme::Forward => {
                delta[p] = JACOBIAN_STEP;
                (eval(f, &retract(xs, &delta))? - &r0) / JACOBIAN_STEP
            }
            DiffScheme::Backward => {
                delta[p] = -JACOBIAN_STEP;
                (&r0 - eval(f, &retract(xs, &delta))?) / JACOBIAN_STEP
            }
        };
        delta[p] = 0.0;
        jac.set_column(p, &column);
    }
    Ok(jac)
}

pub(crate) fn levenberg_marquardt<F>(
    f: F,
    x0: Vec<RigidTransform>,
    config: &SolverConfig,
) -> Result<LmOutcome, CalibError>
where
    F: Fn(&[RigidTransform], &mut Vec<f64>) -> Result<(), CalibError>,
{
    let n = 6 * x0.len();
    let mut xs = x0;
    let mut r = eval(&f, &xs)?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(CalibError::NonFiniteCost);
    }
    let mut history = vec![cost];
    if cost == 0.0 {
        return Ok(LmOutcome {
            xs,
            iterations: 0,
            termination: Termination::ZeroCost,
            history,
        });
    }

    let mut jac = numeric_jacobian(&f, &xs, DiffScheme::Central)?;
    let mut jtj = jac.transpose() * &jac;
    let mut grad = jac.transpose() * &r;
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
    let mut mu = config.damping_init * max_diag.max(1e-12);
    let mut nu = 2.0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let mut damped = jtj.clone();
        for i in 0..n {
            damped[(i, i)] += mu;
        }
        let Some(chol) = damped.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let step = chol.solve(&(-&grad));
        if step.norm() <= config.step_tol {
            termination = Termination::StepTolerance;
            break;
        }
        let candidate = retract(&xs, step.as_slice());
        let r_new = eval(&f, &candidate)?;
        let cost_new = r_new.norm_squared();
        // Predicted decrease of the quadratic model, for cost = |r|^2.
        let predicted = -(2.0 * step.dot(&grad) + (&jac * &step).norm_squared());
        let actual = cost - cost_new;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
        if cost_new.is_finite() && actual > 0.0 && rho > 0.0 {
            xs = candidate;
            r = r_new;
            let previous = cost;
            cost = cost_new;
            history.push(cost);
            mu *= (1.0_f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if cost == 0.0 {
                termination = Termination::ZeroCost;
                break;
            }
            if actual <= config.cost_tol * previous {
                termination = Termination::CostTolerance;
                break;
            }
            jac = numeric_jacobian(&f, &xs, DiffScheme::Central)?;
            jtj = jac.transpose() * &jac;
            grad = jac.transpose() * &r;
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() {
                termination = Termination::StepTolerance;
                break;
            }
        }
    }

    let xs = xs
        .iter()
        .map(|x| RigidTransform::new(*x.rotation(), *x.translation()).map_err(|_| CalibError::NonFiniteCost))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LmOutcome {
        xs,
        iterations,
        termination,
        history,
    })
}
