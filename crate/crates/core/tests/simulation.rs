use nalgebra::Vector3;

use planar_handeye::geometry::RigidTransform;
use planar_handeye::pipeline::{detect_all, run, PipelineConfig};
use planar_handeye::plane::{triangulate_dlt, DetectionConfig, PinholeCamera};
use planar_handeye::sim::{generate, visibility, Board, ScenarioConfig};

fn max_entry(a: &RigidTransform, b: &RigidTransform) -> f64 {
    (a.to_homogeneous() - b.to_homogeneous()).abs().max()
}

fn camera() -> PinholeCamera {
    PinholeCamera::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
}

#[test]
fn camera_poses_follow_pattern_frame() {
    let cfg = ScenarioConfig {
        pixel_sigma: 0.0,
        num_poses: 40,
        ground_points_per_pair: 0,
        seed: 9,
        ..ScenarioConfig::default()
    };
    let sim = generate(&cfg).unwrap();
    let p_inv = sim.pattern_in_world.inverse();
    for (c, x) in sim.ground_truth().iter().enumerate() {
        for (i, a) in sim.true_robot_poses.iter().enumerate() {
            if let Some(b) = &sim.true_camera_poses[c][i] {
                let expected = p_inv.compose(&a.lift()).compose(x);
                assert!(max_entry(b, &expected) < 1e-10, "camera {c} pose {i}");
            }
        }
    }
}

#[test]
fn visibility_cases() {
    let cam = camera();
    let board = Board::default();
    let center = board.center();
    // The camera looks along its own z axis, which is the pattern normal here.
    let facing = RigidTransform::from_translation(Vector3::new(center.x, center.y, -1.0));
    assert!(visibility(&cam, &facing, &board));

    let away = RigidTransform::from_axis_angle(Vector3::new(0.0, std::f64::consts::PI, 0.0), *facing.translation());
    assert!(!visibility(&cam, &away, &board));

    // The board spans 250 px at 1 m; shifting 0.4 m pushes one side past the edge.
    let shifted = RigidTransform::from_translation(Vector3::new(center.x + 0.4, center.y, -1.0));
    assert!(!visibility(&cam, &shifted, &board));
}

#[test]
fn noiseless_ground_matches_triangulate_to_world_floor() {
    let cfg = ScenarioConfig {
        pixel_sigma: 0.0,
        outlier_fraction: 0.0,
        num_poses: 10,
        ground_points_per_pair: 50,
        seed: 4,
        ..ScenarioConfig::with_cameras(1)
    };
    let sim = generate(&cfg).unwrap();
    let d = &sim.dataset;
    let mut on_floor = 0;
    let mut total = 0;
    for i in 0..d.num_poses() - 1 {
        let (Some(b_i), Some(b_next)) = (&d.camera_poses[0][i], &d.camera_poses[0][i + 1]) else {
            continue;
        };
        for m in &d.matches[0][i] {
            let Ok(p) = triangulate_dlt(&d.cameras[0], b_i, b_next, m) else {
                continue;
            };
            total += 1;
            let world = sim.pattern_in_world.transform_point(&p);
            if world.z.abs() < 1e-6 {
                on_floor += 1;
            }
        }
    }
    assert!(total > 0);
    // Everything except the elevated distractors lies on z = 0.
    assert!(on_floor as f64 >= 0.85 * total as f64, "{on_floor}/{total}");
}

#[test]
fn default_pipeline_recovers_noiseless_rig() {
    let cfg = ScenarioConfig {
        pixel_sigma: 0.0,
        num_poses: 30,
        seed: 17,
        ..ScenarioConfig::default()
    };
    let sim = generate(&cfg).unwrap();
    let report = run(&sim.dataset, &PipelineConfig::default()).unwrap();
    assert!(report.diagnostics.converged);
    let ev = report.evaluation.unwrap();
    for e in &ev.per_camera {
        assert!(e.max_translation() < 1e-3 && e.max_rotation() < 1e-3, "{e:?}");
    }
    assert_eq!(ev.per_pair.len(), 3);
}

#[test]
fn tilted_pattern_still_yields_true_heights() {
    let base = ScenarioConfig {
        num_poses: 30,
        seed: 2,
        ..ScenarioConfig::default()
    };
    let center = base.pattern_in_world.transform_point(&base.board.center());
    let tilt = RigidTransform::from_translation(center)
        .compose(&RigidTransform::rot_x(20f64.to_radians()))
        .compose(&RigidTransform::from_translation(-center));
    let cfg = ScenarioConfig {
        pattern_in_world: tilt.compose(&base.pattern_in_world),
        ..base
    };
    let sim = generate(&cfg).unwrap();
    let detections = detect_all(&sim.dataset, &DetectionConfig::default());
    for (c, d) in detections.iter().enumerate() {
        assert!(d.valid_count() > 0, "camera {c}");
        let truth = cfg.rig[c].translation().z;
        let h = d.mean_height().unwrap();
        assert!((h - truth).abs() < 1e-3, "camera {c}: {h} vs {truth}");
    }
}
