use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of a data set, sorted by decreasing variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-norm component vectors, one per row.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Smallest prefix of components reaching the requested variance ratio.
    pub retained_count: usize,
}

/// Relative eigenvalue cutoff below which a direction is treated as null.
const RANK_TOL: f64 = 1e-10;

pub fn pca_fit(data: &[Vec<f64>], threshold: f64) -> Result<PcaModel> {
    if data.is_empty() {
        return Err(Error::InvalidInput("PCA needs at least one sample".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "variance threshold {threshold} not in (0, 1]"
        )));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(
            "PCA samples must share a non-zero dimension".into(),
        ));
    }
    let n = data.len();
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let xc = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);

    // Eigen-decompose whichever of X Xᵀ and Xᵀ X is smaller.
    let gram_route = n < d;
    let m = if gram_route {
        &xc * xc.transpose()
    } else {
        xc.transpose() * &xc
    };
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = order
        .first()
        .map(|&i| eig.eigenvalues[i])
        .unwrap_or(0.0);
    if top <= f64::EPSILON {
        return Err(Error::Degenerate("data has zero variance".into()));
    }
    let denom = (n.max(2) - 1) as f64;
    let kept: Vec<usize> = order
        .into_iter()
        .take_while(|&i| eig.eigenvalues[i] > top * RANK_TOL)
        .collect();
    let u = DMatrix::from_fn(eig.eigenvalues.len(), kept.len(), |r, c| eig.eigenvectors[(r, kept[c])]);
    // Gram eigenvectors map to data-space ones through Xᵀ; they come out
    // orthogonal already and only need rescaling.
    let basis = if gram_route { xc.transpose() * u } else { u };
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(kept.len());
    let mut variance = Vec::with_capacity(kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let v = basis.column(c);
        let norm = v.norm();
        if norm < 1e-12 {
            continue;
        }
        components.push(v.iter().map(|x| x / norm).collect());
        variance.push(eig.eigenvalues[i] / denom);
    }

    let total: f64 = variance.iter().sum();
    let ratio: Vec<f64> = variance.iter().map(|v| v / total).collect();
    let mut cum = 0.0;
    let mut retained_count = ratio.len();
    for (i, r) in ratio.iter().enumerate() {
        cum += r;
        if cum >= threshold - 1e-12 {
            retained_count = i + 1;
            break;
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variance,
        explained_variance_ratio: ratio,
        retained_count,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Projection onto the retained components.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transform_n(x, self.retained_count)
    }

    pub fn transform_n(&self, x: &[f64], n: usize) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} values, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.components[..n.min(self.components.len())]
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect())
    }

    /// Maps coefficients over the leading components back to data space.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, a) in self.components.iter().zip(coeffs) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += a * ci;
            }
        }
        out
    }
}
