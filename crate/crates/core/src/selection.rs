//! Representative selection: density filter, PCA projection, then greedy
//! farthest-point sampling by sum of distances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{density, pca_fit, PatternLibrary};
use crate::par::Executor;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    #[serde(default = "default_ev")]
    pub ev_threshold: f64,
    #[serde(default = "default_density")]
    pub min_density: f64,
    pub seed: u64,
}

fn default_ev() -> f64 {
    0.9
}

fn default_density() -> f64 {
    0.40
}

impl SelectionConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            ev_threshold: default_ev(),
            min_density: default_density(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.ev_threshold > 0.0 && self.ev_threshold <= 1.0) {
            return Err(Error::Config("ev_threshold must be in (0, 1]".into()));
        }
        if !(self.min_density >= 0.0 && self.min_density <= 1.0) {
            return Err(Error::Config("min_density must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Greedy max-sum farthest-point order over `points`, starting from `start`.
/// Ties go to the lowest index.
pub fn farthest_point_order(
    points: &[Vec<f64>],
    k: usize,
    start: usize,
    exec: &Executor,
) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut chosen = vec![start];
    let mut taken = vec![false; n];
    taken[start] = true;
    let mut sums = vec![0.0f64; n];
    while chosen.len() < k {
        let last = *chosen.last().expect("non-empty");
        let add = exec.map_range(n, |i| distance(&points[i], &points[last]));
        for (s, a) in sums.iter_mut().zip(add) {
            *s += a;
        }
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !taken[i] && best.is_none_or(|b| sums[i] > sums[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("k <= n leaves a candidate");
        taken[b] = true;
        chosen.push(b);
    }
    chosen
}

/// Library ids of `cfg.k` representatives, in selection order.
pub fn select_representatives(
    lib: &PatternLibrary,
    cfg: &SelectionConfig,
    exec: &Executor,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let eligible: Vec<usize> = lib
        .entries()
        .iter()
        .filter(|e| density(&e.grid) >= cfg.min_density)
        .map(|e| e.id)
        .collect();
    if eligible.len() < cfg.k {
        return Err(Error::InsufficientEligible {
            eligible: eligible.len(),
            required: cfg.k,
        });
    }
    let data: Vec<Vec<f64>> = eligible
        .iter()
        .map(|&id| lib.entries()[id].grid.to_f64_vec())
        .collect();
    let embeddings = match pca_fit(&data, cfg.ev_threshold) {
        Ok(model) => data
            .iter()
            .map(|x| model.transform(x))
            .collect::<Result<Vec<_>>>()?,
        // All eligible patterns identical (or a single one): every point
        // coincides, so only the tie-break decides.
        Err(Error::Degenerate(_)) => vec![Vec::new(); data.len()],
        Err(e) => return Err(e),
    };
    let start = seed::rng(cfg.seed).gen_range(0..eligible.len());
    Ok(farthest_point_order(&embeddings, cfg.k, start, exec)
        .into_iter()
        .map(|i| eligible[i])
        .collect())
}
