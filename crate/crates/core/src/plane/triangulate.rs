use nalgebra::{Matrix3x4, Matrix4, RowVector4, Vector3, SVD};

use super::camera::{PinholeCamera, PixelMatch, MIN_DEPTH};
use super::PlaneError;
use crate::geometry::RigidTransform;

/// Baselines at or below this length (meters) are rejected.
pub const MIN_BASELINE: f64 = 1e-6;

/// `[R^T | -R^T t]` for a camera pose mapping camera to pattern coordinates.
fn extrinsic_rows(pose: &RigidTransform) -> Matrix3x4<f64> {
    let rt = pose.rotation().transpose();
    let mut p = Matrix3x4::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    p.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(rt * pose.translation())));
    p
}

/// Two-view linear triangulation. `b_i` and `b_next` are camera poses in the
/// pattern frame; the returned point is expressed in the pattern frame.
///
/// Rows `x * P3 - P1` and `y * P3 - P2` of both views are stacked into a
/// 4x4 system, each row scaled to unit norm, and solved for its smallest
/// right singular vector. Pixels are first mapped to normalized image
/// coordinates so the system is well conditioned.
pub fn triangulate_dlt(
    camera: &PinholeCamera,
    b_i: &RigidTransform,
    b_next: &RigidTransform,
    m: &PixelMatch,
) -> Result<Vector3<f64>, PlaneError> {
    let baseline = (b_i.translation() - b_next.translation()).norm();
    if !(baseline > MIN_BASELINE) {
        return Err(PlaneError::DegenerateBaseline(baseline));
    }
    let mut a = Matrix4::<f64>::zeros();
    for (view, (pose, pixel)) in [(b_i, &m.p_i), (b_next, &m.p_next)].into_iter().enumerate() {
        let p = extrinsic_rows(pose);
        let x = camera.normalize(pixel);
        let rows: [RowVector4<f64>; 2] = [x.x * p.row(2) - p.row(0), x.y * p.row(2) - p.row(1)];
        for (k, row) in rows.iter().enumerate() {
            let norm = row.norm();
            let row = if norm > 0.0 { row / norm } else { *row };
            a.set_row(view * 2 + k, &row);
        }
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.ok_or(PlaneError::BehindCamera)?;
    let (min_idx, _) =
        svd.singular_values.iter().enumerate().fold(
            (0, f64::INFINITY),
            |best, (i, &s)| if s < best.1 { (i, s) } else { best },
        );
    let h = v_t.row(min_idx);
    if h[3].abs() < 1e-15 {
        // Point at infinity.
        return Err(PlaneError::BehindCamera);
    }
    let point = Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    for pose in [b_i, b_next] {
        let depth = pose.inverse().transform_point(&point).z;
        if !(depth > MIN_DEPTH) {
            return Err(PlaneError::BehindCamera);
        }
    }
    Ok(point)
}
