//! Line-oriented CSV formats. Every file starts with a version header
//! (`# planar-handeye <kind> v<N>`) followed by a column header.

use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};

use crate::geometry::{PlanarPose, RigidTransform};
use crate::plane::PixelMatch;

pub const FORMAT_VERSION: u32 = 1;
pub const POSES_COLUMNS: &str = "index,x,y,z,qw,qx,qy,qz";
pub const ODOMETRY_COLUMNS: &str = "index,x,y,yaw";
pub const MATCHES_COLUMNS: &str = "u_i,v_i,u_next,v_next";
pub const SWEEP_COLUMNS: &str = "axis_value,trial,seed,t_x_cm,t_y_cm,t_z_cm,r_x_deg,r_y_deg,r_z_deg,converged";

/// Quaternions whose norm is further than this from 1 are rejected.
const QUAT_NORM_TOL: f64 = 1e-6;

/// A malformed line, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
    /// Set when the version header names an unsupported version.
    pub version: Option<String>,
}

impl LineError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
            version: None,
        }
    }
}

fn header(kind: &str) -> String {
    format!("# planar-handeye {kind} v{FORMAT_VERSION}")
}

/// Checks both header lines and yields the remaining non-empty lines with
/// their line numbers.
fn body<'a>(text: &'a str, kind: &str, columns: &str) -> Result<Vec<(usize, &'a str)>, LineError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let prefix = format!("# planar-handeye {kind} v");
    match lines.next() {
        Some((_, l)) if l.trim() == header(kind) => {}
        Some((n, l)) if l.trim().starts_with(&prefix) => {
            let found = l.trim()[prefix.len()..].to_string();
            return Err(LineError {
                line: n,
                message: format!("unsupported {kind} format version {found}"),
                version: Some(found),
            });
        }
        Some((n, _)) => return Err(LineError::new(n, format!("expected header `{}`", header(kind)))),
        None => return Err(LineError::new(1, "empty file")),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == columns => {}
        Some((n, _)) => return Err(LineError::new(n, format!("expected column header `{columns}`"))),
        None => return Err(LineError::new(2, "missing column header")),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()).collect())
}

fn fields(line: &str, n: usize, expected: usize) -> Result<Vec<&str>, LineError> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != expected {
        return Err(LineError::new(
            n,
            format!("expected {expected} fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn number(s: &str, n: usize, what: &str) -> Result<f64, LineError> {
    let v: f64 = s
        .parse()
        .map_err(|_| LineError::new(n, format!("{what}: `{s}` is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LineError::new(n, format!("{what} is not finite")))
    }
}

fn index(s: &str, n: usize, expected: usize) -> Result<(), LineError> {
    let i: usize = s
        .parse()
        .map_err(|_| LineError::new(n, format!("index `{s}` is not an integer")))?;
    if i != expected {
        return Err(LineError::new(
            n,
            format!("index {i} out of sequence, expected {expected}"),
        ));
    }
    Ok(())
}

/// Parses a pose file; `null` rows are poses where the pattern was not seen.
pub fn parse_poses(text: &str) -> Result<Vec<Option<RigidTransform>>, LineError> {
    let mut out = Vec::new();
    for (n, line) in body(text, "poses", POSES_COLUMNS)? {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        index(parts[0], n, out.len())?;
        if parts.len() == 2 && parts[1] == "null" {
            out.push(None);
            continue;
        }
        let f = fields(line, n, 8)?;
        let v: Vec<f64> = f[1..]
            .iter()
            .zip(["x", "y", "z", "qw", "qx", "qy", "qz"])
            .map(|(s, what)| number(s, n, what))
            .collect::<Result<_, _>>()?;
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > QUAT_NORM_TOL {
            return Err(LineError::new(n, format!("quaternion norm {} is not 1", q.norm())));
        }
        let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        out.push(Some(RigidTransform::from_rotation(&r, Vector3::new(v[0], v[1], v[2]))));
    }
    Ok(out)
}

pub fn write_poses(poses: &[Option<RigidTransform>]) -> String {
    let mut s = format!("{}\n{POSES_COLUMNS}\n", header("poses"));
    for (i, p) in poses.iter().enumerate() {
        match p {
            None => writeln!(s, "{i},null"),
            Some(p) => {
                let q = UnitQuaternion::from_matrix(p.rotation());
                let t = p.translation();
                writeln!(s, "{i},{},{},{},{},{},{},{}", t.x, t.y, t.z, q.w, q.i, q.j, q.k)
            }
        }
        .expect("write to string");
    }
    s
}

pub fn parse_odometry(text: &str) -> Result<Vec<PlanarPose>, LineError> {
    let mut out = Vec::new();
    for (n, line) in body(text, "odometry", ODOMETRY_COLUMNS)? {
        let f = fields(line, n, 4)?;
        index(f[0], n, out.len())?;
        let x = number(f[1], n, "x")?;
        let y = number(f[2], n, "y")?;
        let yaw = number(f[3], n, "yaw")?;
        out.push(PlanarPose { x, y, yaw });
    }
    Ok(out)
}

pub fn write_odometry(poses: &[PlanarPose]) -> String {
    let mut s = format!("{}\n{ODOMETRY_COLUMNS}\n", header("odometry"));
    for (i, p) in poses.iter().enumerate() {
        writeln!(s, "{i},{},{},{}", p.x, p.y, p.yaw).expect("write to string");
    }
    s
}

pub fn parse_matches(text: &str) -> Result<Vec<PixelMatch>, LineError> {
    let mut out = Vec::new();
    for (n, line) in body(text, "matches", MATCHES_COLUMNS)? {
        let f = fields(line, n, 4)?;
        let v: Vec<f64> = f
            .iter()
            .zip(["u_i", "v_i", "u_next", "v_next"])
            .map(|(s, what)| number(s, n, what))
            .collect::<Result<_, _>>()?;
        out.push(PixelMatch::new(Vector2::new(v[0], v[1]), Vector2::new(v[2], v[3])));
    }
    Ok(out)
}

pub fn write_matches(matches: &[PixelMatch]) -> String {
    let mut s = format!("{}\n{MATCHES_COLUMNS}\n", header("matches"));
    for m in matches {
        writeln!(s, "{},{},{},{}", m.p_i.x, m.p_i.y, m.p_next.x, m.p_next.y).expect("write to string");
    }
    s
}
