//! Synthetic calibration scenarios.
//!
//! A rig of cameras rides on a planar robot that is driven to poses in front
//! of a vertical checkerboard. For every pose the simulator reports noisy
//! odometry, noisy camera-to-pattern poses for the cameras that see the whole
//! board, and pixel matches of ground points between consecutive frames.
//!
//! Frames: world `W` is the robot start pose (z up, ground at z = 0); robot
//! `R` has x forward, z up; camera `C` has z along the optical axis, y down;
//! pattern `P` has the board in its xy-plane.

mod sweep;

pub use sweep::{sweep, SweepAxis, SweepConfig, SweepRow, SweepSummary, SweepTable};

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CalibrationDataset;
use crate::geometry::{wrap_angle, PlanarPose, RigidTransform};
use crate::plane::{project, PinholeCamera, PixelMatch};

/// Odometry translation noise per unit of lambda (meters).
pub const ODOM_SIGMA_T_PER_LAMBDA: f64 = 0.002;
/// Odometry yaw noise per unit of lambda (radians).
pub const ODOM_SIGMA_R_PER_LAMBDA: f64 = 0.01;

/// Camera pose rotation noise at 0.5 px (degrees).
pub const POSE_SIGMA_R: f64 = 0.05;
/// Camera pose translation noise at 0.5 px (meters).
pub const POSE_SIGMA_T: f64 = 0.001;

/// Attempts per pose before the trajectory sampler gives up.
const MAX_POSE_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub cols: usize,
    pub rows: usize,
    /// Square edge length (meters).
    pub square: f64,
}

impl Default for Board {
    fn default() -> Self {
        Self {
            cols: 5,
            rows: 4,
            square: 0.10,
        }
    }
}

impl Board {
    /// The `(cols + 1) x (rows + 1)` grid corners in the pattern frame.
    pub fn corners(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity((self.cols + 1) * (self.rows + 1));
        for r in 0..=self.rows {
            for c in 0..=self.cols {
                out.push(Vector3::new(c as f64 * self.square, r as f64 * self.square, 0.0));
            }
        }
        out
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            self.cols as f64 * self.square / 2.0,
            self.rows as f64 * self.square / 2.0,
            0.0,
        )
    }
}

/// Region of robot poses around the board.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Planar distance from the robot to the board center (meters).
    pub min_range: f64,
    pub max_range: f64,
    /// Largest bearing of the robot as seen from the board (degrees).
    pub max_bearing_deg: f64,
    /// Uniform heading jitter around facing the board (degrees).
    pub heading_jitter_deg: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            min_range: 1.0,
            max_range: 4.0,
            max_bearing_deg: 60.0,
            heading_jitter_deg: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_cameras: usize,
    /// Ground-truth camera poses in the robot frame.
    pub rig: Vec<RigidTransform>,
    pub num_poses: usize,
    pub board: Board,
    pub camera: PinholeCamera,
    /// Odometry noise scale, in [0, 10].
    pub lambda: f64,
    /// Pixel noise (pixels); also scales the camera pose noise.
    pub pixel_sigma: f64,
    pub ground_points_per_pair: usize,
    /// Fraction of matches replaced by random pixel pairs.
    pub outlier_fraction: f64,
    pub seed: u64,
    /// Board pose in the world frame.
    pub pattern_in_world: RigidTransform,
    pub trajectory: TrajectoryConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::with_cameras(3)
    }
}

/// Camera looking along robot +x, image y pointing down.
fn forward_camera() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Default rig: front-facing cameras with overlapping views.
pub fn default_rig(num_cameras: usize) -> Vec<RigidTransform> {
    // (x, y, z, yaw deg, pitch-down deg, roll deg)
    const LAYOUT: [(f64, f64, f64, f64, f64, f64); 3] = [
        (0.30, 0.00, 0.50, 0.0, 10.0, 0.0),
        (0.25, 0.18, 0.45, 6.0, 8.0, 1.5),
        (0.25, -0.18, 0.55, -6.0, 12.0, -1.0),
    ];
    (0..num_cameras)
        .map(|i| {
            let (x, y, z, yaw, pitch, roll) = LAYOUT[i % LAYOUT.len()];
            // Extra cameras beyond the layout are stacked higher.
            let z = z + 0.1 * (i / LAYOUT.len()) as f64;
            let base = RigidTransform::new(forward_camera(), Vector3::zeros()).expect("rotation");
            let r = RigidTransform::rot_z(yaw.to_radians())
                .compose(&base)
                .compose(&RigidTransform::rot_x(-pitch.to_radians()))
                .compose(&RigidTransform::rot_z(roll.to_radians()));
            r.with_translation(Vector3::new(x, y, z))
        })
        .collect()
}

/// Board standing upright 2.5 m ahead of the start pose, centered at 0.5 m.
pub fn default_pattern_in_world(board: &Board) -> RigidTransform {
    // Pattern x -> world -y, pattern y -> world -z, pattern z -> world +x.
    let r = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let center = Vector3::new(2.5, 0.0, 0.5);
    let t = center - r * board.center();
    RigidTransform::new(r, t).expect("rotation")
}

impl ScenarioConfig {
    pub fn with_cameras(num_cameras: usize) -> Self {
        let board = Board::default();
        Self {
            num_cameras,
            rig: default_rig(num_cameras),
            num_poses: 100,
            board,
            camera: PinholeCamera::default(),
            lambda: 0.0,
            pixel_sigma: 0.5,
            ground_points_per_pair: 200,
            outlier_fraction: 0.05,
            seed: 0,
            pattern_in_world: default_pattern_in_world(&board),
            trajectory: TrajectoryConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::Config(m.to_string()));
        if !(0.0..=10.0).contains(&self.lambda) {
            return fail("lambda must lie in [0, 10]");
        }
        if self.num_cameras == 0 || self.rig.len() != self.num_cameras {
            return fail("rig length must equal num_cameras (> 0)");
        }
        if self.rig.iter().any(|x| !(x.translation().z > 0.0)) {
            return fail("every camera must sit above the ground (z > 0)");
        }
        if self.num_poses < 2 {
            return fail("need at least 2 poses");
        }
        if !(self.pixel_sigma >= 0.0 && self.pixel_sigma.is_finite()) {
            return fail("pixel_sigma must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return fail("outlier_fraction must lie in [0, 1)");
        }
        if self.board.cols == 0 || self.board.rows == 0 || !(self.board.square > 0.0) {
            return fail("board must have positive size");
        }
        let t = &self.trajectory;
        if !(t.min_range > 0.0 && t.max_range >= t.min_range) {
            return fail("trajectory ranges must satisfy 0 < min <= max");
        }
        self.camera.validate().map_err(|e| SimError::Config(e.to_string()))
    }
}

/// Zero-mean Gaussian noise on planar odometry increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryNoise {
    pub sigma_t: f64,
    pub sigma_r: f64,
}

impl OdometryNoise {
    pub fn from_lambda(lambda: f64) -> Self {
        Self {
            sigma_t: lambda * ODOM_SIGMA_T_PER_LAMBDA,
            sigma_r: lambda * ODOM_SIGMA_R_PER_LAMBDA,
        }
    }

    /// Noise `(dx, dy, dyaw)` for one increment.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64, f64) {
        let g = |rng: &mut R, s: f64| {
            if s > 0.0 {
                Normal::new(0.0, s).expect("sigma").sample(rng)
            } else {
                0.0
            }
        };
        (g(rng, self.sigma_t), g(rng, self.sigma_t), g(rng, self.sigma_r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub dataset: CalibrationDataset,
    pub true_robot_poses: Vec<PlanarPose>,
    /// Noise-free `B_i`, present exactly where `dataset.camera_poses` is.
    pub true_camera_poses: Vec<Vec<Option<RigidTransform>>>,
    pub pattern_in_world: RigidTransform,
}

impl SyntheticDataset {
    pub fn ground_truth(&self) -> &[RigidTransform] {
        self.dataset.ground_truth.as_deref().unwrap_or(&[])
    }
}

/// True if every board corner projects inside the image with positive depth.
pub fn visibility(camera: &PinholeCamera, b_pose: &RigidTransform, board: &Board) -> bool {
    board.corners().iter().all(|c| match project(camera, b_pose, c) {
        Ok(px) => px.x > 0.0 && px.y > 0.0 && px.x < camera.width as f64 && px.y < camera.height as f64,
        Err(_) => false,
    })
}

fn camera_pose_in_pattern(config: &ScenarioConfig, robot: &PlanarPose, cam: usize) -> RigidTransform {
    config
        .pattern_in_world
        .inverse()
        .compose(&robot.lift())
        .compose(&config.rig[cam])
}

fn sample_pose(config: &ScenarioConfig, rng: &mut ChaCha8Rng, anchor: Option<f64>) -> PlanarPose {
    let t = &config.trajectory;
    let center = config.pattern_in_world.transform_point(&config.board.center());
    let range = rng.random_range(t.min_range..=t.max_range);
    let max_b = t.max_bearing_deg.to_radians();
    let (bearing, jitter) = match anchor {
        Some(b) => (b * max_b, 0.0),
        None => {
            let j = t.heading_jitter_deg.to_radians();
            (
                rng.random_range(-max_b..=max_b),
                if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 },
            )
        }
    };
    let x = center.x - range * bearing.cos();
    let y = center.y - range * bearing.sin();
    // Facing the board center, then jittered.
    let facing = (center.y - y).atan2(center.x - x);
    PlanarPose::new(x, y, wrap_angle(facing + jitter))
}

fn sample_trajectory(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<PlanarPose>, SimError> {
    let sees_board = |p: &PlanarPose| {
        (0..config.num_cameras)
            .any(|c| visibility(&config.camera, &camera_pose_in_pattern(config, p, c), &config.board))
    };
    let start = PlanarPose::default();
    if !sees_board(&start) {
        return Err(SimError::Config("no camera sees the board from the start pose".into()));
    }
    let mut poses = vec![start];
    while poses.len() < config.num_poses {
        // Poses 1 and 2 sit at the bearing extremes so the yaw spread is wide.
        let anchor = match poses.len() {
            1 => Some(-1.0),
            2 => Some(1.0),
            _ => None,
        };
        let mut found = None;
        for _ in 0..MAX_POSE_ATTEMPTS {
            let p = sample_pose(config, rng, anchor);
            if sees_board(&p) {
                found = Some(p);
                break;
            }
        }
        match found {
            Some(p) => poses.push(p),
            None if anchor.is_some() => {
                // Extreme bearing not viewable at any sampled range; fall back.
                let p = (0..MAX_POSE_ATTEMPTS)
                    .map(|_| sample_pose(config, rng, None))
                    .find(|p| sees_board(p));
                poses.push(p.ok_or_else(|| SimError::Config("board not visible from the pose region".into()))?);
            }
            None => return Err(SimError::Config("board not visible from the pose region".into())),
        }
    }
    Ok(poses)
}

fn accumulate_odometry(truth: &[PlanarPose], noise: &OdometryNoise, rng: &mut ChaCha8Rng) -> Vec<PlanarPose> {
    if noise.sigma_t == 0.0 && noise.sigma_r == 0.0 {
        return truth.to_vec();
    }
    let mut out = vec![truth[0]];
    for w in truth.windows(2) {
        let inc = w[0].inverse().compose(&w[1]);
        let (nx, ny, nr) = noise.sample(rng);
        let noisy = PlanarPose::new(inc.x + nx, inc.y + ny, inc.yaw + nr);
        let last = *out.last().expect("non-empty");
        out.push(last.compose(&noisy));
    }
    out
}

fn perturb_pose(b: &RigidTransform, sigma_r: f64, sigma_t: f64, rng: &mut ChaCha8Rng) -> RigidTransform {
    if sigma_r == 0.0 && sigma_t == 0.0 {
        return *b;
    }
    let mut g = |s: f64| {
        if s > 0.0 {
            Normal::new(0.0, s).expect("sigma").sample(rng)
        } else {
            0.0
        }
    };
    let w = Vector3::new(g(sigma_r), g(sigma_r), g(sigma_r));
    let t = Vector3::new(g(sigma_t), g(sigma_t), g(sigma_t));
    b.compose(&RigidTransform::from_axis_angle(w, t))
}

fn pixel_noise(rng: &mut ChaCha8Rng, sigma: f64) -> Vector2<f64> {
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("sigma");
        Vector2::new(n.sample(rng), n.sample(rng))
    } else {
        Vector2::zeros()
    }
}

/// Matches of ground points (plus a few off-plane distractors) seen by
/// `cam` at both `pose_i` and `pose_next`.
fn sample_matches(
    config: &ScenarioConfig,
    pose_i: &PlanarPose,
    pose_next: &PlanarPose,
    cam: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<PixelMatch> {
    let cam_i = pose_i.lift().compose(&config.rig[cam]);
    let cam_next = pose_next.lift().compose(&config.rig[cam]);
    let camera = &config.camera;
    let inside =
        |px: &Vector2<f64>| px.x >= 0.0 && px.y >= 0.0 && px.x < camera.width as f64 && px.y < camera.height as f64;
    let observe = |p: &Vector3<f64>| -> Option<(Vector2<f64>, Vector2<f64>)> {
        let a = project(camera, &cam_i, p).ok().filter(inside)?;
        let b = project(camera, &cam_next, p).ok().filter(inside)?;
        Some((a, b))
    };
    let robot = pose_i.lift();
    let target = config.ground_points_per_pair;
    let distractors = target / 10;
    let mut out = Vec::with_capacity(target + distractors);
    let mut attempts = 0;
    while out.len() < target && attempts < 50 * target {
        attempts += 1;
        // Near-field ground footprint in the robot frame at pose i.
        let local = Vector3::new(rng.random_range(0.3..3.0), rng.random_range(-4.0..4.0), 0.0);
        let world = robot.transform_point(&local);
        let world = Vector3::new(world.x, world.y, 0.0);
        if let Some((a, b)) = observe(&world) {
            out.push(PixelMatch::new(a, b));
        }
    }
    let mut placed = 0;
    attempts = 0;
    while placed < distractors && attempts < 50 * distractors.max(1) {
        attempts += 1;
        let local = Vector3::new(
            rng.random_range(0.5..6.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(0.15..1.5),
        );
        if let Some((a, b)) = observe(&robot.transform_point(&local)) {
            out.push(PixelMatch::new(a, b));
            placed += 1;
        }
    }
    for m in &mut out {
        m.p_i += pixel_noise(rng, config.pixel_sigma);
        m.p_next += pixel_noise(rng, config.pixel_sigma);
    }
    let n_out = (config.outlier_fraction * out.len() as f64).round() as usize;
    for _ in 0..n_out {
        let idx = rng.random_range(0..out.len());
        let mut random_px = || {
            Vector2::new(
                rng.random_range(0.0..camera.width as f64),
                rng.random_range(0.0..camera.height as f64),
            )
        };
        let (a, b) = (random_px(), random_px());
        out[idx] = PixelMatch::new(a, b);
    }
    // Keep everything inside the image after noise.
    for m in &mut out {
        for p in [&mut m.p_i, &mut m.p_next] {
            p.x = p.x.clamp(0.0, camera.width as f64);
            p.y = p.y.clamp(0.0, camera.height as f64);
        }
    }
    out
}

/// Generates a dataset; deterministic for a given configuration and seed.
pub fn generate(config: &ScenarioConfig) -> Result<SyntheticDataset, SimError> {
    config.validate()?;
    // Independent streams so that changing one noise source leaves the
    // others untouched.
    let mut traj_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut odom_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6f64_6f6d);
    let mut pose_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x706e_7000);
    let mut match_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d61_7463);

    let truth = sample_trajectory(config, &mut traj_rng)?;
    let odometry = accumulate_odometry(&truth, &OdometryNoise::from_lambda(config.lambda), &mut odom_rng);

    // Pose noise levels are RMS magnitudes of the perturbation, split evenly
    // over the three axes.
    let scale = config.pixel_sigma / 0.5 / 3f64.sqrt();
    let (sigma_r, sigma_t) = (POSE_SIGMA_R.to_radians() * scale, POSE_SIGMA_T * scale);
    let mut true_camera_poses = Vec::with_capacity(config.num_cameras);
    let mut camera_poses = Vec::with_capacity(config.num_cameras);
    for cam in 0..config.num_cameras {
        let exact: Vec<Option<RigidTransform>> = truth
            .iter()
            .map(|p| {
                let b = camera_pose_in_pattern(config, p, cam);
                visibility(&config.camera, &b, &config.board).then_some(b)
            })
            .collect();
        camera_poses.push(
            exact
                .iter()
                .map(|b| b.map(|b| perturb_pose(&b, sigma_r, sigma_t, &mut pose_rng)))
                .collect::<Vec<_>>(),
        );
        true_camera_poses.push(exact);
    }

    let matches = (0..config.num_cameras)
        .map(|cam| {
            (0..truth.len() - 1)
                .map(|i| {
                    if camera_poses[cam][i].is_some() && camera_poses[cam][i + 1].is_some() {
                        sample_matches(config, &truth[i], &truth[i + 1], cam, &mut match_rng)
                    } else {
                        Vec::new()
                    }
                })
                .collect()
        })
        .collect();

    Ok(SyntheticDataset {
        dataset: CalibrationDataset {
            cameras: vec![config.camera; config.num_cameras],
            odometry,
            camera_poses,
            matches,
            ground_truth: Some(config.rig.clone()),
        },
        true_robot_poses: truth,
        true_camera_poses,
        pattern_in_world: config.pattern_in_world,
    })
}
