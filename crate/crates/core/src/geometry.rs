//! Rigid-body transforms in SE(3), planar robot poses, and per-axis pose errors.
//!
//! Conventions:
//! - `RigidTransform` maps points from a child frame into a parent frame:
//!   `p_parent = R * p_child + t`.
//! - `compose(a, b)` is the homogeneous product `a * b`.
//! - Per-axis rotation errors use the intrinsic XYZ Euler decomposition,
//!   `R = Rx(r_x) * Ry(r_y) * Rz(r_z)`.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality error above which a rotation is re-projected onto SO(3).
const ORTHONORMAL_DRIFT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation or translation contains non-finite values")]
    NonFinite,
    #[error("matrix is not a proper rotation (det = {0})")]
    NotARotation(f64),
}

/// An element of SE(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", try_from = "TransformRepr")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, re-orthonormalizing the rotation (polar
    /// decomposition) if it drifted more than 1e-6 from SO(3).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(GeometryError::NotARotation(det));
        }
        let drift = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let rotation = if drift > ORTHONORMAL_DRIFT || (det - 1.0).abs() > ORTHONORMAL_DRIFT {
            orthonormalize(&rotation)?
        } else {
            rotation
        };
        Ok(Self { rotation, translation })
    }

    /// Internal constructor for products of valid rotations.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_rotation(rotation: &Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self::from_parts(*rotation.matrix(), translation)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), translation)
    }

    /// Rotation about the z-axis by `angle` radians, no translation.
    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(&Rotation3::from_axis_angle(&Vector3::z_axis(), angle), Vector3::zeros())
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(&Rotation3::from_axis_angle(&Vector3::x_axis(), angle), Vector3::zeros())
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(&Rotation3::from_axis_angle(&Vector3::y_axis(), angle), Vector3::zeros())
    }

    /// Exponential-map rotation (axis-angle vector) plus translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::from_rotation(&Rotation3::new(axis_angle), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self::from_parts(self.rotation, translation)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Top 3x4 block `[R | t]`, row-major.
    pub fn top_rows(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 4 + c] = self.rotation[(r, c)];
            }
            out[r * 4 + 3] = self.translation[r];
        }
        out
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        compose(self, other)
    }

    pub fn inverse(&self) -> RigidTransform {
        invert(self)
    }

    /// Scaled rotation axis (axis * angle).
    pub fn axis_angle(&self) -> Vector3<f64> {
        Rotation3::from_matrix_unchecked(self.rotation).scaled_axis()
    }

    /// Rotation angle in [0, pi], accurate near zero.
    pub fn rotation_angle(&self) -> f64 {
        let r = &self.rotation;
        let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
        v.norm().atan2(r.trace() - 1.0)
    }
}

/// Serialized form: row-major rotation rows and translation.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = GeometryError;

    fn try_from(repr: TransformRepr) -> Result<Self, Self::Error> {
        let r = repr.rotation;
        RigidTransform::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(repr.translation),
        )
    }
}

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
fn orthonormalize(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let svd = SVD::new(*m, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::NonFinite),
    };
    let r = u * v_t;
    let det = r.determinant();
    if det <= 0.0 {
        return Err(GeometryError::NotARotation(det));
    }
    Ok(r)
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform::from_parts(a.rotation * b.rotation, a.rotation * b.translation + a.translation)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform::from_parts(rt, -(rt * t.translation))
}

/// Incremental motion from `t_i` to `t_next`, both expressed in the same
/// fixed frame: `invert(t_i) * t_next`.
pub fn relative_motion(t_i: &RigidTransform, t_next: &RigidTransform) -> RigidTransform {
    compose(&invert(t_i), t_next)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// A robot pose in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    /// Embeds the pose in SE(3): z = 0 and rotation about world z.
    pub fn lift(&self) -> RigidTransform {
        let (s, c) = self.yaw.sin_cos();
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            c, -s, 0.0,
            s, c, 0.0,
            0.0, 0.0, 1.0,
        );
        RigidTransform::from_parts(rotation, Vector3::new(self.x, self.y, 0.0))
    }

    /// Projects a transform onto the ground plane, dropping z, roll and pitch.
    pub fn project(t: &RigidTransform) -> Self {
        let r = t.rotation();
        Self::new(t.translation().x, t.translation().y, r[(1, 0)].atan2(r[(0, 0)]))
    }

    /// `self * other` in SE(2).
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let (s, c) = self.yaw.sin_cos();
        PlanarPose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )
    }

    pub fn inverse(&self) -> PlanarPose {
        let (s, c) = self.yaw.sin_cos();
        PlanarPose::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.yaw)
    }
}

/// Minimal 6-parameter chart of SE(3): translation plus axis-angle rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6 {
    pub translation: Vector3<f64>,
    pub rotation: Vector3<f64>,
}

impl Pose6 {
    pub fn zero() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Vector3::zeros(),
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            translation: Vector3::new(v[0], v[1], v[2]),
            rotation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
        ]
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_axis_angle(self.rotation, self.translation)
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        Self {
            translation: *t.translation(),
            rotation: t.axis_angle(),
        }
    }
}

/// Intrinsic XYZ Euler angles `(r_x, r_y, r_z)` with `R = Rx * Ry * Rz`.
pub fn euler_xyz(r: &Matrix3<f64>) -> Vector3<f64> {
    let sy = r[(0, 2)].clamp(-1.0, 1.0);
    let ry = sy.asin();
    if sy.abs() < 1.0 - 1e-12 {
        let rx = (-r[(1, 2)]).atan2(r[(2, 2)]);
        let rz = (-r[(0, 1)]).atan2(r[(0, 0)]);
        Vector3::new(rx, ry, rz)
    } else {
        // Gimbal lock: only rx + rz (or rx - rz) is defined.
        let rx = r[(2, 1)].atan2(r[(1, 1)]);
        Vector3::new(rx, ry, 0.0)
    }
}

/// Absolute per-axis pose error: translation in centimeters, rotation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseError {
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub r_z: f64,
}

impl PoseError {
    pub fn as_array(&self) -> [f64; 6] {
        [self.t_x, self.t_y, self.t_z, self.r_x, self.r_y, self.r_z]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            t_x: v[0],
            t_y: v[1],
            t_z: v[2],
            r_x: v[3],
            r_y: v[4],
            r_z: v[5],
        }
    }

    /// Euclidean norm of the translation error, in centimeters.
    pub fn translation_norm(&self) -> f64 {
        (self.t_x * self.t_x + self.t_y * self.t_y + self.t_z * self.t_z).sqrt()
    }

    pub fn max_translation(&self) -> f64 {
        self.t_x.max(self.t_y).max(self.t_z)
    }

    pub fn max_rotation(&self) -> f64 {
        self.r_x.max(self.r_y).max(self.r_z)
    }
}

/// Translation: `|t_est - t_truth|` per axis (cm). Rotation: absolute XYZ
/// Euler angles of `R_truth^T * R_est` (deg).
pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform) -> PoseError {
    let dt = (estimate.translation() - truth.translation()) * 100.0;
    let delta = truth.rotation().transpose() * estimate.rotation();
    let e = euler_xyz(&delta).map(|a| a.abs().to_degrees());
    PoseError {
        t_x: dt.x.abs(),
        t_y: dt.y.abs(),
        t_z: dt.z.abs(),
        r_x: e.x,
        r_y: e.y,
        r_z: e.z,
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::Rng;

    pub fn random_transform<R: Rng>(rng: &mut R, max_translation: f64) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-3 {
            Vector3::z()
        } else {
            axis.normalize()
        };
        let angle = rng.random_range(0.0..std::f64::consts::PI * 0.999);
        let t = Vector3::new(
            rng.random_range(-max_translation..max_translation),
            rng.random_range(-max_translation..max_translation),
            rng.random_range(-max_translation..max_translation),
        );
        RigidTransform::from_axis_angle(axis * angle, t)
    }

    pub fn max_abs_diff(a: &RigidTransform, b: &RigidTransform) -> f64 {
        (a.to_homogeneous() - b.to_homogeneous()).abs().max()
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deg(a: f64) -> f64 {
        a.to_radians()
    }

    #[test]
    fn compose_with_identity() {
        let t = RigidTransform::from_axis_angle(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(compose(&RigidTransform::identity(), &t), t);
        assert!(max_abs_diff(&compose(&t, &invert(&t)), &RigidTransform::identity()) < 1e-12);
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let a = RigidTransform::rot_z(deg(30.0)).with_translation(Vector3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::rot_z(deg(60.0)).with_translation(Vector3::new(0.0, 1.0, 0.0));
        // Hand-built 4x4 oracle.
        let (s30, c30) = deg(30.0).sin_cos();
        let (s60, c60) = deg(60.0).sin_cos();
        #[rustfmt::skip]
        let ma = Matrix4::new(
            c30, -s30, 0.0, 1.0,
            s30, c30, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let mb = Matrix4::new(
            c60, -s60, 0.0, 0.0,
            s60, c60, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let mut expected = Matrix4::zeros();
        for r in 0..4 {
            for c in 0..4 {
                for k in 0..4 {
                    expected[(r, c)] += ma[(r, k)] * mb[(k, c)];
                }
            }
        }
        let got = compose(&a, &b).to_homogeneous();
        assert!((got - expected).abs().max() < 1e-12);
        // Rz(90) with translation (1 - sin30, cos30, 0).
        assert!((got[(0, 3)] - (1.0 - 0.5)).abs() < 1e-12);
        assert!((got[(1, 3)] - c30).abs() < 1e-12);
    }

    #[test]
    fn invert_cases() {
        assert_eq!(invert(&RigidTransform::identity()), RigidTransform::identity());
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(*invert(&t).translation(), Vector3::new(-1.0, -2.0, -3.0));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let t = random_transform(&mut rng, 5.0);
            let id = compose(&t, &invert(&t));
            assert!(max_abs_diff(&id, &RigidTransform::identity()) < 1e-9);
        }
    }

    #[test]
    fn associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = random_transform(&mut rng, 3.0);
            let b = random_transform(&mut rng, 3.0);
            let c = random_transform(&mut rng, 3.0);
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            assert!(max_abs_diff(&left, &right) < 1e-9);
        }
    }

    #[test]
    fn relative_motion_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_transform(&mut rng, 2.0);
        assert!(max_abs_diff(&relative_motion(&t, &t), &RigidTransform::identity()) < 1e-12);
        assert!(max_abs_diff(&relative_motion(&RigidTransform::identity(), &t), &t) < 1e-15);
        let t_next = random_transform(&mut rng, 2.0);
        let rel = relative_motion(&t, &t_next);
        assert!(max_abs_diff(&compose(&t, &rel), &t_next) < 1e-9);
    }

    #[test]
    fn relative_motion_chain_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let poses: Vec<_> = (0..=100).map(|_| random_transform(&mut rng, 2.0)).collect();
        let chain = poses
            .windows(2)
            .map(|w| relative_motion(&w[0], &w[1]))
            .fold(RigidTransform::identity(), |acc, m| compose(&acc, &m));
        let direct = compose(&invert(&poses[0]), &poses[100]);
        assert!(max_abs_diff(&chain, &direct) < 1e-8);
    }

    #[test]
    fn planar_lift_and_project() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        for _ in 0..1000 {
            let p = PlanarPose::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let lifted = p.lift();
            assert_eq!(lifted.translation().z, 0.0);
            let axis = lifted.axis_angle();
            assert_eq!(axis.x, 0.0);
            assert_eq!(axis.y, 0.0);
            let back = PlanarPose::project(&lifted);
            assert!((back.x - p.x).abs() <= 1e-12);
            assert!((back.y - p.y).abs() <= 1e-12);
            assert!(wrap_angle(back.yaw - p.yaw).abs() <= 1e-12);
        }
    }

    #[test]
    fn planar_compose_agrees_with_se3() {
        let a = PlanarPose::new(1.0, -0.5, 0.7);
        let b = PlanarPose::new(0.3, 2.0, -1.9);
        let via_se3 = PlanarPose::project(&compose(&a.lift(), &b.lift()));
        let direct = a.compose(&b);
        assert!((via_se3.x - direct.x).abs() < 1e-12);
        assert!((via_se3.y - direct.y).abs() < 1e-12);
        assert!(wrap_angle(via_se3.yaw - direct.yaw).abs() < 1e-12);
        let id = a.compose(&a.inverse());
        assert!(id.x.abs() < 1e-12 && id.y.abs() < 1e-12 && id.yaw.abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn pose6_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = random_transform(&mut rng, 3.0);
            let p = Pose6::from_transform(&t);
            let back = p.to_transform();
            assert!(max_abs_diff(&t, &back) < 1e-9);
            let p2 = Pose6::from_transform(&back);
            assert!((p2.rotation - p.rotation).norm() < 1e-9);
        }
    }

    #[test]
    fn construction_repairs_drift_and_rejects_reflections() {
        let mut m = *RigidTransform::rot_z(0.3).rotation();
        m[(0, 0)] += 1e-4;
        let t = RigidTransform::new(m, Vector3::zeros()).unwrap();
        let r = t.rotation();
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);

        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(reflection, Vector3::zeros()),
            Err(GeometryError::NotARotation(_))
        ));
        assert_eq!(
            RigidTransform::new(Matrix3::identity(), Vector3::new(f64::NAN, 0.0, 0.0)),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn euler_xyz_recovers_known_angles() {
        let (a, b, c) = (0.3, -0.4, 1.1);
        let r = RigidTransform::rot_x(a)
            .compose(&RigidTransform::rot_y(b))
            .compose(&RigidTransform::rot_z(c));
        let e = euler_xyz(r.rotation());
        assert!((e - Vector3::new(a, b, c)).norm() < 1e-12);
    }

    #[test]
    fn pose_error_cases() {
        let truth = RigidTransform::from_axis_angle(Vector3::new(0.2, -1.0, 0.4), Vector3::new(0.3, 0.1, 0.5));
        let zero = pose_error(&truth, &truth);
        assert_eq!([zero.t_x, zero.t_y, zero.t_z], [0.0; 3]);
        assert!(zero.max_rotation() < 1e-9);

        let shifted = truth.with_translation(truth.translation() + Vector3::new(0.005, 0.0, 0.0));
        let e = pose_error(&shifted, &truth);
        assert!((e.t_x - 0.5).abs() < 1e-12);
        assert!(e.t_y < 1e-12 && e.t_z < 1e-12 && e.max_rotation() < 1e-9);

        let rotated = truth.compose(&RigidTransform::rot_z(deg(0.5)));
        let e = pose_error(&rotated, &truth);
        assert!((e.r_z - 0.5).abs() < 1e-9);
        assert!(e.r_x < 1e-9 && e.r_y < 1e-9);
    }
}
