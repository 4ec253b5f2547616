//! On-disk formats: datasets (JSON manifest plus CSV files), run reports
//! (JSON) and sweep tables (CSV). See `docs/FORMATS.md` for the layout.

mod text;

pub use text::{
    parse_matches, parse_odometry, parse_poses, write_matches, write_odometry, write_poses, LineError, FORMAT_VERSION,
    MATCHES_COLUMNS, ODOMETRY_COLUMNS, POSES_COLUMNS, SWEEP_COLUMNS,
};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CalibrationDataset;
use crate::geometry::PoseError;
use crate::pipeline::RunReport;
use crate::plane::PinholeCamera;
use crate::sim::{SweepAxis, SweepRow, SweepTable};

pub const MANIFEST_FORMAT: &str = "planar-handeye-dataset";
pub const REPORT_SCHEMA: &str = "planar-handeye-report";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("inconsistent dataset: {0}")]
    Consistency(String),
    #[error("{}: unsupported version {found} (supported: {supported})", path.display())]
    Version {
        path: PathBuf,
        found: String,
        supported: String,
    },
}

impl IoError {
    fn from_line(path: &Path, e: LineError) -> Self {
        match e.version {
            Some(found) => IoError::Version {
                path: path.to_path_buf(),
                found,
                supported: FORMAT_VERSION.to_string(),
            },
            None => IoError::Parse {
                path: path.to_path_buf(),
                line: e.line,
                message: e.message,
            },
        }
    }

    fn json(path: &Path, e: serde_json::Error) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub length: LengthUnit,
    pub angle: AngleUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthUnit {
    #[serde(rename = "m")]
    Meters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleUnit {
    #[serde(rename = "rad")]
    Radians,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: LengthUnit::Meters,
            angle: AngleUnit::Radians,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub intrinsics: PinholeCamera,
    /// Pose file, one row per odometry row.
    pub poses: String,
    /// Match file for every consecutive pair of poses.
    pub matches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: String,
    pub units: Units,
    pub num_cameras: usize,
    pub odometry: String,
    pub cameras: Vec<CameraEntry>,
    /// Pose file with one row per camera (camera pose in the robot frame).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

/// Parses and checks a manifest's format tag, version and camera count.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, LineError> {
    let m: DatasetManifest = serde_json::from_str(text).map_err(|e| LineError {
        line: e.line(),
        message: e.to_string(),
        version: None,
    })?;
    if m.format != MANIFEST_FORMAT {
        return Err(LineError {
            line: 1,
            message: format!("format is `{}`, expected `{MANIFEST_FORMAT}`", m.format),
            version: None,
        });
    }
    if m.version != FORMAT_VERSION.to_string() {
        return Err(LineError {
            line: 1,
            message: format!("unsupported manifest version {}", m.version),
            version: Some(m.version),
        });
    }
    if m.num_cameras != m.cameras.len() {
        return Err(LineError {
            line: 1,
            message: format!(
                "num_cameras is {} but {} cameras are listed",
                m.num_cameras,
                m.cameras.len()
            ),
            version: None,
        });
    }
    Ok(m)
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| IoError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves `path` to a manifest file: the path itself, then with a
/// `.json` extension, then `manifest.json` inside it when it is a directory.
pub fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_file() {
        return path.to_path_buf();
    }
    let with_ext = path.with_extension("json");
    if with_ext.is_file() {
        return with_ext;
    }
    if path.is_dir() {
        return path.join(MANIFEST_FILE);
    }
    path.to_path_buf()
}

/// Writes a dataset under `dir` and returns the manifest path.
pub fn save_dataset(dataset: &CalibrationDataset, dir: &Path) -> Result<PathBuf, IoError> {
    dataset.validate().map_err(|e| IoError::Consistency(e.to_string()))?;
    write(&dir.join("odometry.csv"), &write_odometry(&dataset.odometry))?;
    let mut cameras = Vec::with_capacity(dataset.num_cameras());
    for c in 0..dataset.num_cameras() {
        let poses = format!("camera{c}/poses.csv");
        write(&dir.join(&poses), &write_poses(&dataset.camera_poses[c]))?;
        let mut matches = Vec::with_capacity(dataset.matches[c].len());
        for (i, m) in dataset.matches[c].iter().enumerate() {
            let name = format!("camera{c}/matches/{i:05}.csv");
            write(&dir.join(&name), &write_matches(m))?;
            matches.push(name);
        }
        cameras.push(CameraEntry {
            intrinsics: dataset.cameras[c],
            poses,
            matches,
        });
    }
    let ground_truth = match &dataset.ground_truth {
        Some(gt) => {
            let rows: Vec<_> = gt.iter().copied().map(Some).collect();
            write(&dir.join("ground_truth.csv"), &write_poses(&rows))?;
            Some("ground_truth.csv".to_string())
        }
        None => None,
    };
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: FORMAT_VERSION.to_string(),
        units: Units::default(),
        num_cameras: dataset.num_cameras(),
        odometry: "odometry.csv".into(),
        cameras,
        ground_truth,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&path, &(json + "\n"))?;
    Ok(path)
}

pub fn load_dataset(path: &Path) -> Result<CalibrationDataset, IoError> {
    let manifest_path = resolve_manifest(path);
    let manifest = parse_manifest(&read(&manifest_path)?).map_err(|e| match e.version {
        Some(found) => IoError::Version {
            path: manifest_path.clone(),
            found,
            supported: FORMAT_VERSION.to_string(),
        },
        None => IoError::Parse {
            path: manifest_path.clone(),
            line: e.line,
            message: e.message,
        },
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let load = |rel: &str| -> (PathBuf, Result<String, IoError>) {
        let p = base.join(rel);
        let r = read(&p).map_err(|e| match e {
            IoError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => IoError::Parse {
                path,
                line: 0,
                message: "file referenced by the manifest does not exist".into(),
            },
            other => other,
        });
        (p, r)
    };

    let (p, text) = load(&manifest.odometry);
    let odometry = parse_odometry(&text?).map_err(|e| IoError::from_line(&p, e))?;
    let n = odometry.len();
    let mut cameras = Vec::new();
    let mut camera_poses = Vec::new();
    let mut matches = Vec::new();
    for (c, entry) in manifest.cameras.iter().enumerate() {
        entry
            .intrinsics
            .validate()
            .map_err(|e| IoError::Consistency(format!("camera {c}: {e}")))?;
        let (p, text) = load(&entry.poses);
        let poses = parse_poses(&text?).map_err(|e| IoError::from_line(&p, e))?;
        if poses.len() != n {
            return Err(IoError::Consistency(format!(
                "camera {c}: {} pose rows, odometry has {n}",
                poses.len()
            )));
        }
        if entry.matches.len() != n.saturating_sub(1) {
            return Err(IoError::Consistency(format!(
                "camera {c}: {} match files for {} consecutive pairs",
                entry.matches.len(),
                n.saturating_sub(1)
            )));
        }
        let lists = entry
            .matches
            .iter()
            .map(|rel| {
                let (p, text) = load(rel);
                parse_matches(&text?).map_err(|e| IoError::from_line(&p, e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        cameras.push(entry.intrinsics);
        camera_poses.push(poses);
        matches.push(lists);
    }
    let ground_truth = match &manifest.ground_truth {
        Some(rel) => {
            let (p, text) = load(rel);
            let rows = parse_poses(&text?).map_err(|e| IoError::from_line(&p, e))?;
            let gt: Option<Vec<_>> = rows.into_iter().collect();
            let gt = gt.ok_or_else(|| IoError::Consistency("ground truth contains null rows".into()))?;
            Some(gt)
        }
        None => None,
    };
    let dataset = CalibrationDataset {
        cameras,
        odometry,
        camera_poses,
        matches,
        ground_truth,
    };
    dataset.validate().map_err(|e| IoError::Consistency(e.to_string()))?;
    Ok(dataset)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    schema: String,
    version: u32,
    report: RunReport,
}

pub fn report_to_json(report: &RunReport) -> String {
    let file = ReportFile {
        schema: REPORT_SCHEMA.into(),
        version: FORMAT_VERSION,
        report: report.clone(),
    };
    serde_json::to_string_pretty(&file).expect("report serializes") + "\n"
}

pub fn report_from_json(text: &str) -> Result<RunReport, LineError> {
    #[derive(Deserialize)]
    struct Head {
        schema: String,
        version: u32,
    }
    let err = |e: serde_json::Error| LineError {
        line: e.line(),
        message: e.to_string(),
        version: None,
    };
    let head: Head = serde_json::from_str(text).map_err(err)?;
    if head.schema != REPORT_SCHEMA {
        return Err(LineError {
            line: 1,
            message: format!("schema is `{}`, expected `{REPORT_SCHEMA}`", head.schema),
            version: None,
        });
    }
    if head.version != FORMAT_VERSION {
        return Err(LineError {
            line: 1,
            message: format!("unsupported report version {}", head.version),
            version: Some(head.version.to_string()),
        });
    }
    let file: ReportFile = serde_json::from_str(text).map_err(err)?;
    Ok(file.report)
}

pub fn save_report(report: &RunReport, path: &Path) -> Result<(), IoError> {
    write(path, &report_to_json(report))
}

pub fn load_report(path: &Path) -> Result<RunReport, IoError> {
    report_from_json(&read(path)?).map_err(|e| IoError::from_line(path, e))
}

/// Sweep table as CSV: comma separated, `.` decimals, LF line endings,
/// errors in centimeters and degrees.
pub fn sweep_to_csv(table: &SweepTable) -> String {
    let mut s = format!("{SWEEP_COLUMNS}\n");
    for r in &table.rows {
        let e = r.error.as_array();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.axis_value, r.trial, r.seed, e[0], e[1], e[2], e[3], e[4], e[5], r.converged
        )
        .expect("write to string");
    }
    s
}

/// Reads rows written by [`sweep_to_csv`].
pub fn sweep_from_csv(text: &str, axis: SweepAxis) -> Result<SweepTable, LineError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == SWEEP_COLUMNS => {}
        _ => {
            return Err(LineError {
                line: 1,
                message: format!("expected header `{SWEEP_COLUMNS}`"),
                version: None,
            })
        }
    }
    let bad = |line: usize, message: String| LineError {
        line,
        message,
        version: None,
    };
    let mut rows = Vec::new();
    for (n, l) in lines.filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 10 {
            return Err(bad(n, format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, format!("`{s}` is not a number")));
        let mut e = [0.0; 6];
        for (k, v) in e.iter_mut().enumerate() {
            *v = num(f[3 + k])?;
        }
        rows.push(SweepRow {
            axis_value: num(f[0])?,
            trial: f[1]
                .parse()
                .map_err(|_| bad(n, format!("trial `{}` is not an integer", f[1])))?,
            seed: f[2]
                .parse()
                .map_err(|_| bad(n, format!("seed `{}` is not an integer", f[2])))?,
            error: PoseError::from_array(e),
            converged: f[9]
                .parse()
                .map_err(|_| bad(n, format!("converged `{}` is not a boolean", f[9])))?,
        });
    }
    Ok(SweepTable { axis, rows })
}

pub fn save_sweep(table: &SweepTable, path: &Path) -> Result<(), IoError> {
    write(path, &sweep_to_csv(table))
}

/// Writes any serializable value as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    write(
        path,
        &(serde_json::to_string_pretty(value).expect("value serializes") + "\n"),
    )
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    serde_json::from_str(&read(path)?).map_err(|e| IoError::json(path, e))
}
