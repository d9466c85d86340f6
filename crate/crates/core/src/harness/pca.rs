use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Principal axes of a point cloud and the projection of its points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Unit eigenvectors, largest eigenvalue first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Projected coordinates, one row per input point.
    pub coords: Vec<Vec<f64>>,
}

impl PcaResult {
    /// Projects an extra point (e.g. an adapted PB) onto the same axes.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(point.iter().zip(&self.mean))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect()
    }
}

/// Centers the points, eigendecomposes the sample covariance and projects
/// onto the leading `out_dim` axes. Each axis is signed so that its
/// largest-magnitude loading is positive.
pub fn pca_project(points: &[Vec<f64>], out_dim: usize) -> Result<PcaResult> {
    if points.len() < 2 {
        return Err(Error::spec("PCA needs at least two points"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::spec("PCA points have inconsistent widths"));
    }
    if out_dim == 0 || out_dim > dim {
        return Err(Error::spec(format!(
            "cannot project {dim}-dimensional points onto {out_dim} components"
        )));
    }
    let n = points.len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, dim, |i, j| points[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = Vec::with_capacity(out_dim);
    let mut eigenvalues = Vec::with_capacity(out_dim);
    for &k in order.iter().take(out_dim) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    let explained_ratio = eigenvalues
        .iter()
        .map(|l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    let mut res = PcaResult {
        mean,
        components,
        eigenvalues,
        explained_ratio,
        coords: Vec::new(),
    };
    res.coords = points.iter().map(|p| res.project(p)).collect();
    Ok(res)
}
