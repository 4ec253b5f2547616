use super::*;
use crate::geometry::{pose_error, test_util::random_transform};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn camera_rig(num: usize) -> Vec<RigidTransform> {
    // Camera looking forward along robot x, tilted down a little.
    let base = nalgebra::Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let base = RigidTransform::new(base, Vector3::zeros()).unwrap();
    (0..num)
        .map(|c| {
            let yaw = (c as f64 - 1.0) * 0.2;
            let r = RigidTransform::rot_z(yaw)
                .compose(&base)
                .compose(&RigidTransform::rot_x(-0.1 - 0.02 * c as f64));
            r.with_translation(Vector3::new(
                0.3 - 0.05 * c as f64,
                0.15 * (1.0 - c as f64),
                0.5 + 0.05 * c as f64,
            ))
        })
        .collect()
}

fn random_planar_motion(rng: &mut ChaCha8Rng) -> RigidTransform {
    PlanarPose::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.6..0.6),
    )
    .lift()
}

/// Noiseless problem: B_c = X_c^-1 A X_c, all cameras see everything.
fn noiseless(rig: &[RigidTransform], n: usize, seed: u64) -> CalibProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let a = random_planar_motion(&mut rng);
            let b = rig.iter().map(|x| Some(x.inverse().compose(&a).compose(x))).collect();
            MotionPair::new(a, b)
        })
        .collect();
    let heights = rig
        .iter()
        .map(|x| vec![HeightMeasurement::valid(x.translation().z, 0)])
        .collect();
    CalibProblem::new(pairs, heights, rig.len())
}

fn brute_frobenius(m: &nalgebra::Matrix4<f64>) -> f64 {
    // Bottom row of a homogeneous difference is zero.
    let mut s = 0.0;
    for r in 0..3 {
        for c in 0..4 {
            s += m[(r, c)] * m[(r, c)];
        }
    }
    s
}

#[test]
fn motion_residual_cases() {
    let w = Weights::default();
    let id = MotionPair::new(RigidTransform::identity(), vec![Some(RigidTransform::identity())]);
    let x = random_transform(&mut ChaCha8Rng::seed_from_u64(1), 1.0);
    assert_eq!(residual_motion(&id, 0, &x, &w).unwrap(), [0.0; 12]);

    let rig = camera_rig(1);
    let p = noiseless(&rig, 1, 3);
    let r = residual_motion(&p.pairs[0], 0, &rig[0], &w).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-9));

    let rz = RigidTransform::rot_z(std::f64::consts::FRAC_PI_2);
    let pair = MotionPair::new(rz, vec![Some(rz)]);
    let x = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
    let r = residual_motion(&pair, 0, &x, &w).unwrap();
    let expected = rz.to_homogeneous() * x.to_homogeneous() - x.to_homogeneous() * rz.to_homogeneous();
    for row in 0..3 {
        for col in 0..4 {
            assert!((r[row * 4 + col] - expected[(row, col)]).abs() < 1e-12);
        }
    }
    // Rz(90) (1,0,0) - (1,0,0) = (-1, 1, 0).
    assert!((r[3] + 1.0).abs() < 1e-12 && (r[7] - 1.0).abs() < 1e-12);

    let hidden = MotionPair::new(rz, vec![None]);
    assert_eq!(
        residual_motion(&hidden, 0, &x, &w),
        Err(CalibError::CameraNotVisible(0))
    );
}

#[test]
fn translation_weight_scales_translation_entries_only() {
    let rz = RigidTransform::rot_z(0.7).with_translation(Vector3::new(0.2, 0.1, 0.0));
    let pair = MotionPair::new(rz, vec![Some(RigidTransform::rot_x(0.3))]);
    let x = RigidTransform::from_translation(Vector3::new(1.0, 0.5, 0.2));
    let base = residual_motion(&pair, 0, &x, &Weights::default()).unwrap();
    let w = Weights {
        translation: 3.0,
        ..Weights::default()
    };
    let scaled = residual_motion(&pair, 0, &x, &w).unwrap();
    for i in 0..12 {
        let f = if i % 4 == 3 { 3.0 } else { 1.0 };
        assert!((scaled[i] - f * base[i]).abs() < 1e-12);
    }
}

#[test]
fn height_residual_cases() {
    let w = Weights {
        height: 1.0,
        ..Weights::default()
    };
    let x = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.52));
    assert_eq!(residual_height(&x, &HeightMeasurement::rejected(0), &w), 0.0);
    let exact = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.5));
    assert_eq!(residual_height(&exact, &HeightMeasurement::valid(0.5, 0), &w), 0.0);
    assert!((residual_height(&x, &HeightMeasurement::valid(0.5, 0), &w) - 0.02).abs() < 1e-12);
}

#[test]
fn joint_residual_cases() {
    let w = Weights::default();
    let b = RigidTransform::rot_y(0.3).with_translation(Vector3::new(0.1, 0.0, 0.2));
    let x = random_transform(&mut ChaCha8Rng::seed_from_u64(2), 1.0);
    let pair = MotionPair::new(RigidTransform::identity(), vec![Some(b), Some(b)]);
    assert!(residual_joint(&pair, 0, 1, &x, &x, &w)
        .unwrap()
        .iter()
        .all(|v| v.abs() < 1e-15));
    assert_eq!(
        residual_joint(&pair, 1, 1, &x, &x, &w),
        Err(CalibError::PairNotVisible(1, 1))
    );

    let rig = camera_rig(2);
    let p = noiseless(&rig, 1, 4);
    let r = residual_joint(&p.pairs[0], 0, 1, &rig[0], &rig[1], &w).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-9));

    let perturbed = rig[1].compose(&RigidTransform::from_translation(Vector3::new(0.01, 0.0, 0.0)));
    let r = residual_joint(&p.pairs[0], 0, 1, &rig[0], &perturbed, &w).unwrap();
    let b_j = p.pairs[0].camera(0).unwrap().to_homogeneous();
    let b_k = p.pairs[0].camera(1).unwrap().to_homogeneous();
    let x_jk = rig[0].to_homogeneous().try_inverse().unwrap() * perturbed.to_homogeneous();
    let expected = brute_frobenius(&(b_j * x_jk - x_jk * b_k));
    let got: f64 = r.iter().map(|v| v * v).sum();
    assert!(got > 0.0);
    assert!((got - expected).abs() < 1e-12);

    let hidden = MotionPair::new(RigidTransform::identity(), vec![Some(b), None]);
    assert_eq!(
        residual_joint(&hidden, 0, 1, &x, &x, &w),
        Err(CalibError::PairNotVisible(0, 1))
    );
}

#[test]
fn total_cost_decomposition() {
    let rig = camera_rig(3);
    let mut p = noiseless(&rig, 6, 9);
    p.mode = SolveMode::Joint;
    assert!(total_cost(&p, &rig).unwrap() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let xs: Vec<_> = rig
        .iter()
        .map(|x| x.compose(&random_transform(&mut rng, 0.1)))
        .collect();
    let mut brute = 0.0;
    for pair in &p.pairs {
        for c in pair.visible() {
            brute += residual_motion(pair, c, &xs[c], &p.weights)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
        }
        for (j, k) in pair.covisible_pairs() {
            brute += residual_joint(pair, j, k, &xs[j], &xs[k], &p.weights)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
        }
    }
    for (c, hs) in p.heights.iter().enumerate() {
        for h in hs {
            brute += residual_height(&xs[c], h, &p.weights).powi(2);
        }
    }
    let got = total_cost(&p, &xs).unwrap();
    assert!((got - brute).abs() <= 1e-12 * brute.max(1.0));

    // Single pair, single camera, no heights.
    let one = CalibProblem::new(vec![p.pairs[0].clone()], vec![vec![]], 3);
    let motion: f64 = p.pairs[0]
        .visible()
        .map(|c| {
            residual_motion(&p.pairs[0], c, &xs[c], &one.weights)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
        })
        .sum();
    assert!((total_cost(&one, &xs).unwrap() - motion).abs() < 1e-14);
    assert!(total_cost(&one, &xs[..2]).is_err());
}

#[test]
fn noiseless_recovery_from_identity() {
    let rig = camera_rig(1);
    let mut p = noiseless(&rig, 20, 12);
    p.solver.init_mode = InitMode::Identity;
    let res = calibrate(&p).unwrap();
    assert!(res.converged);
    let e = pose_error(&res.extrinsics[0], &rig[0]);
    assert!(e.max_translation() < 1e-2, "{e:?}");
    assert!(e.max_rotation() < 1e-4_f64.to_degrees(), "{e:?}");
}

#[test]
fn noiseless_recovery_many_seeds() {
    let rig = camera_rig(3);
    for seed in 0..50 {
        let p = noiseless(&rig, 10, 100 + seed);
        let res = calibrate(&p).unwrap();
        for (est, truth) in res.extrinsics.iter().zip(&rig) {
            let e = pose_error(est, truth);
            assert!(
                e.max_translation() <= 1e-3 && e.max_rotation() <= 1e-3,
                "seed {seed}: {e:?}"
            );
        }
    }
}

#[test]
fn accepted_steps_never_increase_cost() {
    let rig = camera_rig(2);
    let mut p = noiseless(&rig, 12, 5);
    p.solver.init_mode = InitMode::Identity;
    p.mode = SolveMode::Joint;
    // Corrupt the camera increments a little so the optimum is not zero.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for pair in &mut p.pairs {
        for b in pair.camera_rel.iter_mut().flatten() {
            *b = b.compose(&random_transform(&mut rng, 0.01));
        }
    }
    let res = calibrate(&p).unwrap();
    for hist in &res.cost_history {
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn guards() {
    let rig = camera_rig(1);
    let mut p = noiseless(&rig, 10, 1);
    p.heights = vec![vec![HeightMeasurement::rejected(0); 3]];
    assert_eq!(calibrate(&p), Err(CalibError::NoHeightMeasurement(0)));
    p.full_dof = false;
    assert!(calibrate(&p).is_ok());

    // Pure translation: no yaw diversity.
    let t = |x: f64| RigidTransform::from_translation(Vector3::new(x, 0.2, 0.0));
    let pairs: Vec<_> = (1..5)
        .map(|i| {
            let a = t(i as f64 * 0.1);
            MotionPair::new(a, vec![Some(rig[0].inverse().compose(&a).compose(&rig[0]))])
        })
        .collect();
    let flat = CalibProblem::new(pairs, vec![vec![HeightMeasurement::valid(0.5, 0)]], 1);
    assert_eq!(calibrate(&flat), Err(CalibError::Observability(0)));
    assert_eq!(
        initialize(&flat, InitMode::ClosedForm),
        Err(CalibError::DegenerateAxes(0))
    );

    let mut bad = noiseless(&rig, 5, 2);
    bad.heights[0][0].z_bar = f64::NAN;
    assert_eq!(calibrate(&bad), Err(CalibError::NonFiniteCost));
}

#[test]
fn initialization_modes() {
    let rig = camera_rig(2);
    let p = noiseless(&rig, 15, 21);
    let id = initialize(&p, InitMode::Identity).unwrap();
    for (x, truth) in id.iter().zip(&rig) {
        assert_eq!(*x.rotation(), nalgebra::Matrix3::identity());
        assert_eq!(x.translation().z, truth.translation().z);
    }
    let cf = initialize(&p, InitMode::ClosedForm).unwrap();
    for (x, truth) in cf.iter().zip(&rig) {
        let angle = x.inverse().compose(truth).rotation_angle();
        assert!(angle < 1e-3, "{angle}");
    }
}

#[test]
fn numeric_jacobian_agrees_with_one_sided_differences() {
    let rig = camera_rig(3);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..100 {
        let mut p = noiseless(&rig, 4, 500 + trial);
        p.mode = SolveMode::Joint;
        let xs: Vec<_> = rig
            .iter()
            .map(|x| x.compose(&random_transform(&mut rng, 0.2)))
            .collect();
        let central = jacobian(&p, &xs, DiffScheme::Central).unwrap();
        for scheme in [DiffScheme::Forward, DiffScheme::Backward] {
            let one_sided = jacobian(&p, &xs, scheme).unwrap();
            for c in 0..central.ncols() {
                let a = central.column(c);
                let b = one_sided.column(c);
                let rel = (a - b).norm() / a.norm().max(1e-12);
                assert!(rel < 1e-4, "trial {trial} col {c}: {rel}");
            }
        }
    }
}

#[test]
fn z_is_unobservable_without_height_weight() {
    let rig = camera_rig(1);
    let mut p = noiseless(&rig, 10, 44);
    p.weights.height = 0.0;
    let res = calibrate(&p).unwrap();
    let base = total_cost(&p, &res.extrinsics).unwrap();
    for dz in [-1.0, -0.3, 0.01, 0.5, 1.0] {
        let x = res.extrinsics[0];
        let shifted = x.with_translation(x.translation() + Vector3::new(0.0, 0.0, dz));
        let c = total_cost(&p, &[shifted]).unwrap();
        assert!((c - base).abs() < 1e-12, "dz {dz}: {c} vs {base}");
    }
}
