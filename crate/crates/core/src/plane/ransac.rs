use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PlaneEquation, PlaneError};

/// Cross-product norm below which a sampled triple counts as collinear.
const COLLINEAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Point-to-plane inlier threshold (meters).
    pub inlier_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_tol: 0.01,
            max_iters: 500,
            seed: 0,
        }
    }
}

/// Least-squares plane through `points` (smallest eigenvector of the
/// scatter matrix about the centroid).
pub(crate) fn fit_plane(points: &[Vector3<f64>]) -> Option<PlaneEquation> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(scatter);
    let (min_idx, _) =
        eig.eigenvalues.iter().enumerate().fold(
            (0, f64::INFINITY),
            |best, (i, &v)| if v < best.1 { (i, v) } else { best },
        );
    let normal = eig.eigenvectors.column(min_idx).into_owned();
    PlaneEquation::from_point_normal(&centroid, &normal)
}

/// Finds the plane with the largest consensus set and refits it to those
/// inliers. The hypothesis sequence depends only on `seed` and the number
/// of points, so results are reproducible and the consensus size is
/// monotone in `inlier_tol`.
pub fn ransac_plane(points: &[Vector3<f64>], config: &RansacConfig) -> Result<(PlaneEquation, Vec<usize>), PlaneError> {
    if points.len() < 3 {
        return Err(PlaneError::InsufficientPoints(points.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = points.len();
    let mut best: Option<(usize, PlaneEquation)> = None;
    for _ in 0..config.max_iters.max(1) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for taken in sorted_pair(i, j) {
            if k >= taken {
                k += 1;
            }
        }
        let (a, b, c) = (points[i], points[j], points[k]);
        let normal = (b - a).cross(&(c - a));
        if normal.norm() < COLLINEAR_EPS {
            continue;
        }
        let Some(plane) = PlaneEquation::from_point_normal(&a, &normal) else {
            continue;
        };
        let count = points.iter().filter(|p| plane.distance(p) <= config.inlier_tol).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, plane));
        }
    }
    let (_, hypothesis) = best.ok_or(PlaneError::DegenerateGeometry)?;
    let inliers: Vec<usize> = (0..n)
        .filter(|&i| hypothesis.distance(&points[i]) <= config.inlier_tol)
        .collect();
    let inlier_points: Vec<_> = inliers.iter().map(|&i| points[i]).collect();
    let refit = fit_plane(&inlier_points).unwrap_or(hypothesis);
    Ok((refit, inliers))
}

fn sorted_pair(i: usize, j: usize) -> [usize; 2] {
    if i < j {
        [i, j]
    } else {
        [j, i]
    }
}
