use nalgebra::{Matrix3, Vector3, SVD};

use super::PlaneError;
use crate::geometry::RigidTransform;

/// Relative singular-value threshold for the rank test on the cross-covariance.
const RANK_EPS: f64 = 1e-12;

/// Rotation minimizing `sum |R * src_i - dst_i|^2` (no centering, no scale),
/// with the determinant correction that keeps the result in SO(3).
///
/// Returns the rotation and the singular values of the cross-covariance.
pub fn kabsch_rotation(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let h = src
        .iter()
        .zip(dst)
        .fold(Matrix3::zeros(), |acc, (s, d)| acc + s * d.transpose());
    let svd = SVD::new(h, true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    // Flip the axis of the smallest singular value.
    let min_idx = svd.singular_values.imin();
    let mut correction = Matrix3::identity();
    correction[(min_idx, min_idx)] = d;
    let r = v * correction * u.transpose();
    Some((r, svd.singular_values))
}

/// Rigid transform `(R, t)` minimizing `sum |(R b_i + t) - a_i|^2`.
pub fn align_trajectories(a_points: &[Vector3<f64>], b_points: &[Vector3<f64>]) -> Result<RigidTransform, PlaneError> {
    if a_points.len() != b_points.len() {
        return Err(PlaneError::LengthMismatch(a_points.len(), b_points.len()));
    }
    if a_points.len() < 3 {
        return Err(PlaneError::DegenerateConfiguration);
    }
    let n = a_points.len() as f64;
    let ca = a_points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let cb = b_points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let a_c: Vec<_> = a_points.iter().map(|p| p - ca).collect();
    let b_c: Vec<_> = b_points.iter().map(|p| p - cb).collect();
    let (r, sv) = kabsch_rotation(&b_c, &a_c).ok_or(PlaneError::DegenerateConfiguration)?;
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|x, y| y.total_cmp(x));
    if !(sorted[0] > 0.0) || sorted[1] <= RANK_EPS * sorted[0] {
        return Err(PlaneError::DegenerateConfiguration);
    }
    let t = ca - r * cb;
    RigidTransform::new(r, t).map_err(|_| PlaneError::DegenerateConfiguration)
}
