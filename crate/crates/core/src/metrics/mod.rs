//! Pattern library and diversity / quality metrics.

mod kmeans;
mod library;
mod pca;

pub use kmeans::{kmeans, silhouette, silhouette_score, KMeansResult, DEFAULT_MAX_ITER};
pub use library::{
    canonical_hash, hash_hex, InsertOutcome, LibraryEntry, PatternHash, PatternLibrary, Provenance,
};
pub use pca::{pca_fit, PcaModel};

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::drc::{self, RuleSet};
use crate::error::{Error, Result};
use crate::grid::PatternGrid;
use crate::squish::{complexity, encode};

/// Shannon entropy in bits of a distribution given by group sizes.
pub fn entropy_bits<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    // Clamp the -0.0 of a single group.
    h.max(0.0)
}

fn grouped_entropy<K: Hash + Eq>(keys: impl Iterator<Item = K>) -> f64 {
    let mut groups: HashMap<K, usize> = HashMap::new();
    for k in keys {
        *groups.entry(k).or_default() += 1;
    }
    entropy_bits(groups.into_values())
}

/// Entropy of the complexity tuples `(Cx, Cy)` over unique patterns.
pub fn h1(lib: &PatternLibrary) -> Result<f64> {
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    Ok(grouped_entropy(
        lib.entries().iter().map(|e| complexity(&encode(&e.grid))),
    ))
}

/// Entropy of the exact `(Δx, Δy)` geometry vectors over unique patterns.
pub fn h2(lib: &PatternLibrary) -> Result<f64> {
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    Ok(grouped_entropy(lib.entries().iter().map(|e| {
        let sq = encode(&e.grid);
        (sq.delta_x, sq.delta_y)
    })))
}

/// Fraction of metal pixels.
pub fn density(grid: &PatternGrid) -> f64 {
    grid.count_ones() as f64 / (grid.width() * grid.height()) as f64
}

/// Fraction of pixels with at least three of their four orthogonal
/// neighbours holding the opposite value. Off-grid neighbours count as
/// same-valued.
pub fn noise_level(grid: &PatternGrid) -> f64 {
    let (w, h) = (grid.width(), grid.height());
    let mut noisy = 0usize;
    for y in 0..h {
        for x in 0..w {
            let v = grid.get(x, y);
            let mut opposite = 0;
            if x > 0 && grid.get(x - 1, y) != v {
                opposite += 1;
            }
            if x + 1 < w && grid.get(x + 1, y) != v {
                opposite += 1;
            }
            if y > 0 && grid.get(x, y - 1) != v {
                opposite += 1;
            }
            if y + 1 < h && grid.get(x, y + 1) != v {
                opposite += 1;
            }
            if opposite >= 3 {
                noisy += 1;
            }
        }
    }
    noisy as f64 / (w * h) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub k: usize,
    pub score: f64,
}

/// Summary written by `metrics report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryReport {
    pub unique: usize,
    pub legal: usize,
    pub h1_bits: f64,
    pub h2_bits: f64,
    pub mean_density: f64,
    pub mean_noise: f64,
    pub silhouette: Option<SilhouetteReport>,
}

pub fn report(
    lib: &PatternLibrary,
    rules: &RuleSet,
    silhouette_k: Option<(usize, u64)>,
) -> Result<LibraryReport> {
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let n = lib.len() as f64;
    let mut legal = 0;
    for e in lib.entries() {
        if drc::is_legal(&e.grid, rules)? {
            legal += 1;
        }
    }
    let silhouette = match silhouette_k {
        Some((k, seed)) => Some(SilhouetteReport {
            k,
            score: silhouette(lib, k, seed)?,
        }),
        None => None,
    };
    Ok(LibraryReport {
        unique: lib.len(),
        legal,
        h1_bits: h1(lib)?,
        h2_bits: h2(lib)?,
        mean_density: lib.entries().iter().map(|e| density(&e.grid)).sum::<f64>() / n,
        mean_noise: lib.entries().iter().map(|e| noise_level(&e.grid)).sum::<f64>() / n,
        silhouette,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squish::{decode, SquishPattern, Topology};

    fn lib_of(grids: Vec<PatternGrid>) -> PatternLibrary {
        let mut lib = PatternLibrary::new();
        for g in grids {
            lib.insert(g, Provenance::starter("test"));
        }
        lib
    }

    fn block(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> PatternGrid {
        let mut g = PatternGrid::new(w, h, 1).unwrap();
        for y in y0..y1 {
            for x in x0..x1 {
                g.set(x, y, true);
            }
        }
        g
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_bits([4]), 0.0);
        assert!((entropy_bits([1, 1, 1, 1]) - 2.0).abs() < 1e-12);
        let expected = -(0.5 * 0.5f64.log2() + 2.0 * 0.25 * 0.25f64.log2());
        assert!((entropy_bits([2, 1, 1]) - expected).abs() < 1e-12);
        assert!((expected - 1.5).abs() < 1e-12);
    }

    #[test]
    fn h1_h2_examples() {
        // Same complexity (2 columns, 1 row) with four different geometries.
        let lib = lib_of((1..5).map(|x| block(8, 4, 0, x, 0, 4)).collect());
        assert_eq!(h1(&lib).unwrap(), 0.0);
        assert!((h2(&lib).unwrap() - 2.0).abs() < 1e-12);

        let single = lib_of(vec![block(8, 4, 0, 3, 0, 4)]);
        assert_eq!(h2(&single).unwrap(), 0.0);

        // Four distinct complexity tuples.
        let lib = lib_of(vec![
            PatternGrid::new(8, 8, 1).unwrap(),
            block(8, 8, 0, 3, 0, 8),
            block(8, 8, 2, 3, 0, 8),
            block(8, 8, 2, 3, 2, 5),
        ]);
        assert!((h1(&lib).unwrap() - 2.0).abs() < 1e-12);

        assert!(matches!(h1(&PatternLibrary::new()), Err(Error::EmptyLibrary)));
        assert!(matches!(h2(&PatternLibrary::new()), Err(Error::EmptyLibrary)));
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&PatternGrid::new(3, 3, 1).unwrap()), 0.0);
        assert_eq!(density(&block(3, 3, 0, 3, 0, 3)), 1.0);
        assert_eq!(density(&PatternGrid::from_rows(&[[1, 0], [0, 0]])), 0.25);
    }

    #[test]
    fn noise_examples() {
        assert_eq!(noise_level(&PatternGrid::new(5, 5, 1).unwrap()), 0.0);
        let mut g = PatternGrid::new(5, 5, 1).unwrap();
        g.set(2, 2, true);
        assert_eq!(noise_level(&g), 1.0 / 25.0);
        assert_eq!(noise_level(&block(5, 5, 1, 4, 1, 4)), 0.0);
    }

    #[test]
    fn noise_zero_for_wide_cells() {
        let t = Topology::from_nested(&[vec![1, 0, 1], vec![0, 1, 0], vec![1, 1, 0]]).unwrap();
        let sq = SquishPattern::new(t, vec![2, 3, 2], vec![4, 2, 2]).unwrap();
        assert_eq!(noise_level(&decode(&sq, 1).unwrap()), 0.0);
    }

    #[test]
    fn report_fields() {
        let lib = lib_of(vec![block(16, 16, 0, 4, 0, 16), block(16, 16, 6, 10, 0, 16)]);
        let rules = RuleSet::preset("default").unwrap();
        let r = report(&lib, &rules, None).unwrap();
        assert_eq!(r.unique, 2);
        assert_eq!(r.legal, 2);
        assert_eq!(r.mean_density, 0.25);
        assert!(r.silhouette.is_none());
        let j = serde_json::to_value(&r).unwrap();
        for key in ["unique", "legal", "h1_bits", "h2_bits", "mean_density", "mean_noise", "silhouette"] {
            assert!(j.get(key).is_some(), "{key}");
        }
    }
}
