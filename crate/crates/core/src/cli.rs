//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
//! converge (the report is still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calib::{SolveMode, Weights};
use crate::io::{load_dataset, save_dataset, save_json, save_report, save_sweep};
use crate::pipeline::{detect_all, run as run_pipeline, HeightSummary, PipelineConfig};
use crate::sim::{generate, sweep, ScenarioConfig, SweepAxis, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "planar-handeye",
    version,
    about = "Camera-to-robot extrinsic calibration for planar mobile robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Calibrate a dataset and write a report.
    Calibrate(CalibrateArgs),
    /// Monte Carlo sweep over noise level or image count, written as CSV.
    Sweep(SweepArgs),
    /// Run ground detection and validation only.
    ValidatePlane(ValidatePlaneArgs),
}

#[derive(Debug, Clone, Args)]
struct ScenarioArgs {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Odometry noise scale in [0, 10].
    #[arg(long, default_value_t = 0.0, value_parser = parse_lambda)]
    lambda: f64,
    /// Number of robot poses.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    num_poses: u64,
    /// Number of cameras on the rig.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    cameras: u64,
    /// Pixel noise; also scales the camera pose noise.
    #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative)]
    pixel_sigma: f64,
}

impl ScenarioArgs {
    fn config(&self) -> ScenarioConfig {
        ScenarioConfig {
            seed: self.seed,
            lambda: self.lambda,
            num_poses: self.num_poses as usize,
            pixel_sigma: self.pixel_sigma,
            ..ScenarioConfig::with_cameras(self.cameras as usize)
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SolveArgs {
    /// Add pairwise constraints between cameras that see the pattern together.
    #[arg(long, action = ArgAction::SetTrue, overrides_with = "independent")]
    joint: bool,
    /// Calibrate every camera on its own (default).
    #[arg(long, action = ArgAction::SetTrue, overrides_with = "joint")]
    independent: bool,
    /// Residual weights `motion,height,joint`.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights>,
    /// Use only the first N poses where some camera saw the pattern.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    num_images: Option<u64>,
    #[command(flatten)]
    detection: DetectionArgs,
}

#[derive(Debug, Clone, Args)]
struct DetectionArgs {
    /// Largest accepted tilt of the ground normal (degrees).
    #[arg(long, default_value_t = 5.0, value_parser = parse_positive)]
    angle_tol: f64,
    /// RANSAC inlier distance (meters).
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    inlier_tol: f64,
    /// RANSAC seed.
    #[arg(long = "ransac-seed", default_value_t = 0)]
    ransac_seed: u64,
}

impl SolveArgs {
    fn pipeline(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            mode: if self.joint {
                SolveMode::Joint
            } else {
                SolveMode::Independent
            },
            weights: self.weights.unwrap_or_default(),
            ..PipelineConfig::default()
        };
        self.detection.apply(&mut cfg);
        cfg
    }
}

impl DetectionArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        cfg.detection.angle_tol_deg = self.angle_tol;
        cfg.detection.ransac.inlier_tol = self.inlier_tol;
        cfg.detection.ransac.seed = self.ransac_seed;
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Dataset manifest, or the directory containing it.
    dataset: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
    /// Report file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Lambda,
    NumImages,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// `start:stop:step` (inclusive) or a comma-separated list. Defaults to
    /// `0:10:1` for lambda and `3,5,10,15,20,50` for num-images.
    #[arg(long, value_parser = parse_values)]
    values: Option<Values>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// CSV output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidatePlaneArgs {
    /// Dataset manifest, or the directory containing it.
    dataset: PathBuf,
    #[command(flatten)]
    detection: DetectionArgs,
    /// Detection summary file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct Values(Vec<f64>);

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=10.0).contains(&v) {
        Ok(v)
    } else {
        Err("lambda must lie in [0, 10]".into())
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be non-negative".into())
    }
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let v: Vec<f64> = s.split(',').map(parse_non_negative).collect::<Result<_, _>>()?;
    match v[..] {
        [motion, height, joint] => Ok(Weights {
            motion,
            height,
            joint,
            ..Weights::default()
        }),
        _ => Err("expected three comma-separated weights `motion,height,joint`".into()),
    }
}

fn parse_values(s: &str) -> Result<Values, String> {
    if s.contains(':') {
        let p: Vec<f64> = s.split(':').map(parse_f64).collect::<Result<_, _>>()?;
        let [start, stop, step] = p[..] else {
            return Err("range must be `start:stop:step`".into());
        };
        if !(step > 0.0) || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err("range has too many values".into());
        }
        Ok(Values((0..n).map(|k| start + k as f64 * step).collect()))
    } else {
        let v: Vec<f64> = s.split(',').map(parse_f64).collect::<Result<_, _>>()?;
        Ok(Values(v))
    }
}

fn print_config<T: Serialize>(out: &mut dyn Write, label: &str, value: &T) {
    let json = serde_json::to_string(value).expect("config serializes");
    let _ = writeln!(out, "{label}: {json}");
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Calibrate(a) => calibrate(a, out, err),
        Command::Sweep(a) => run_sweep(a, out),
        Command::ValidatePlane(a) => validate_plane(a, out),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_DATA
        }
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<i32, String> {
    let cfg = a.scenario.config();
    print_config(out, "scenario", &cfg);
    let _ = writeln!(out, "seed: {}", cfg.seed);
    let sim = generate(&cfg).map_err(|e| e.to_string())?;
    let manifest = save_dataset(&sim.dataset, &a.out).map_err(|e| e.to_string())?;
    save_json(&sim.true_robot_poses, &a.out.join("true_robot_poses.json")).map_err(|e| e.to_string())?;
    let visible: Vec<usize> = (0..sim.dataset.num_cameras())
        .map(|c| sim.dataset.visible_count(c))
        .collect();
    let _ = writeln!(
        out,
        "poses: {}, pattern visible per camera: {visible:?}",
        sim.dataset.num_poses()
    );
    let _ = writeln!(out, "wrote {}", manifest.display());
    Ok(EXIT_OK)
}

fn load(path: &Path, num_images: Option<u64>) -> Result<crate::dataset::CalibrationDataset, String> {
    let d = load_dataset(path).map_err(|e| e.to_string())?;
    Ok(match num_images {
        Some(k) => d.first_visible(k as usize),
        None => d,
    })
}

fn calibrate(a: CalibrateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let cfg = a.solve.pipeline();
    print_config(out, "config", &cfg);
    let _ = writeln!(out, "seed: {}", cfg.detection.ransac.seed);
    let dataset = load(&a.dataset, a.solve.num_images)?;
    let report = run_pipeline(&dataset, &cfg).map_err(|e| e.to_string())?;
    if report.joint_fallback {
        let _ = writeln!(
            out,
            "notice: no camera pairs saw the pattern together; solving cameras independently"
        );
    }
    for (c, (x, g)) in report.extrinsics.iter().zip(&report.ground).enumerate() {
        let t = x.translation();
        let _ = writeln!(
            out,
            "camera {c}: t = [{:.6}, {:.6}, {:.6}] m, valid heights {}/{}",
            t.x,
            t.y,
            t.z,
            g.valid,
            g.valid + g.rejected
        );
    }
    if let Some(ev) = &report.evaluation {
        for (c, e) in ev.per_camera.iter().enumerate() {
            let v = e.as_array();
            let _ = writeln!(
                out,
                "camera {c} error: t = [{:.4}, {:.4}, {:.4}] cm, r = [{:.4}, {:.4}, {:.4}] deg",
                v[0], v[1], v[2], v[3], v[4], v[5]
            );
        }
    }
    if let Some(path) = &a.out {
        save_report(&report, path).map_err(|e| e.to_string())?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    if report.diagnostics.converged {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(err, "solver did not converge: {:?}", report.diagnostics.termination);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn run_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<i32, String> {
    let (axis, default_values) = match a.axis {
        AxisArg::Lambda => (SweepAxis::Lambda, (0..=10).map(f64::from).collect()),
        AxisArg::NumImages => (SweepAxis::NumImages, vec![3.0, 5.0, 10.0, 15.0, 20.0, 50.0]),
    };
    let cfg = SweepConfig {
        scenario: a.scenario.config(),
        pipeline: a.solve.pipeline(),
        axis,
        values: a.values.map_or(default_values, |v| v.0),
        trials: a.trials as usize,
        num_images: a.solve.num_images.map(|k| k as usize),
    };
    print_config(out, "sweep", &cfg);
    let _ = writeln!(out, "seed: {}", cfg.scenario.seed);
    let table = sweep(&cfg).map_err(|e| e.to_string())?;
    save_sweep(&table, &a.out).map_err(|e| e.to_string())?;
    let _ = writeln!(
        out,
        "{:>10}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  failures",
        axis.name(),
        "t_x_cm",
        "t_y_cm",
        "t_z_cm",
        "r_x_deg",
        "r_y_deg",
        "r_z_deg"
    );
    for s in table.summary() {
        let m = s.stats.map(|a| a.mean.as_array()).unwrap_or([f64::NAN; 6]);
        let _ = writeln!(
            out,
            "{:>10}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {}",
            s.axis_value, m[0], m[1], m[2], m[3], m[4], m[5], s.failures
        );
    }
    let _ = writeln!(out, "wrote {} ({} rows)", a.out.display(), table.rows.len());
    Ok(EXIT_OK)
}

fn validate_plane(a: ValidatePlaneArgs, out: &mut dyn Write) -> Result<i32, String> {
    let mut cfg = PipelineConfig::default();
    a.detection.apply(&mut cfg);
    print_config(out, "detection", &cfg.detection);
    let _ = writeln!(out, "seed: {}", cfg.detection.ransac.seed);
    let dataset = load(&a.dataset, None)?;
    dataset.validate().map_err(|e| e.to_string())?;
    let detections = detect_all(&dataset, &cfg.detection);
    let summaries: Vec<HeightSummary> = detections.iter().map(HeightSummary::from).collect();
    for (c, s) in summaries.iter().enumerate() {
        let tilt = s.tilt_deg.map_or("n/a".to_string(), |t| format!("{t:.3} deg"));
        let height = s.mean_height.map_or("n/a".to_string(), |h| format!("{h:.6} m"));
        let _ = writeln!(
            out,
            "camera {c}: {} points, {} inliers, tilt {tilt}, accepted {}/{}, mean height {height}",
            s.triangulated,
            s.inliers,
            s.valid,
            s.valid + s.rejected
        );
    }
    if let Some(path) = &a.out {
        save_json(&summaries, path).map_err(|e| e.to_string())?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(EXIT_OK)
}
