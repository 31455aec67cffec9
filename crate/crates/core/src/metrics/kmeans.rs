use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{pca_fit, PatternLibrary};
use crate::error::{Error, Result};
use crate::par::Executor;
use crate::seed;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Nearest centroid; ties go to the lower index.
fn assign(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until assignments settle.
/// Distance evaluation may run on `exec`; the result does not depend on it.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    exec: &Executor,
) -> Result<KMeansResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} with {n} points")));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch("k-means points differ in length".into()));
    }
    let mut rng = seed::rng(seed);
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next].clone());
        let c = centroids.last().expect("just pushed");
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, c));
        }
    }

    let mut labels: Vec<usize> = Vec::new();
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let assigned = exec.map(points, |p| assign(p, &centroids));
        inertia_history.push(assigned.iter().map(|a| a.1).sum());
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let settled = new_labels == labels;
        labels = new_labels;
        if settled {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    Ok(KMeansResult {
        labels,
        centroids,
        inertia_history,
        iterations,
    })
}

/// Mean silhouette coefficient with Euclidean distance. Samples in singleton
/// clusters score 0.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::InvalidInput("points and labels must be non-empty and aligned".into()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least two clusters".into()));
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let li = labels[i];
        if sizes[li] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[li] / (sizes[li] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != li && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Silhouette of a k-means clustering in the 0.9-variance PCA space of the
/// library's flattened patterns.
pub fn silhouette(lib: &PatternLibrary, k: usize, seed: u64) -> Result<f64> {
    if k < 2 || k >= lib.len() {
        return Err(Error::InvalidInput(format!(
            "silhouette needs 2 <= k < {} (library size), got {k}",
            lib.len()
        )));
    }
    let data: Vec<Vec<f64>> = lib.grids().map(|g| g.to_f64_vec()).collect();
    let model = pca_fit(&data, 0.9)?;
    let emb = data
        .iter()
        .map(|x| model.transform(x))
        .collect::<Result<Vec<_>>>()?;
    let km = kmeans(&emb, k, seed, DEFAULT_MAX_ITER, &Executor::sequential())?;
    silhouette_score(&emb, &km.labels)
}
