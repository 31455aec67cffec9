//! Template-based denoising.
//!
//! Edge noise in a generated pattern shows up as extra scan lines next to
//! the real ones. Generated lines are chained into clusters; each cluster is
//! snapped to the closest template line when that line is within the
//! threshold, and otherwise collapsed onto one of its own members. The image
//! is then rebuilt cell by cell from the surviving lines. Both axes are
//! handled independently and the procedure is repeated until the line sets
//! stop changing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PatternGrid;
use crate::seed;
use crate::squish::{column_lines, row_lines};

pub const DEFAULT_THRESHOLD: usize = 2;

/// Upper bound on refinement passes. Each pass that changes anything strictly
/// reduces (line count, off-template line count), so this is never reached
/// for real inputs.
const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCluster {
    pub positions: Vec<usize>,
    pub centroid: f64,
    /// Resolved position; the lower median member until resolved.
    pub replacement: usize,
}

/// How a cluster with no template line in reach is collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Uniformly random member, seeded.
    Random { seed: u64 },
    /// Lower median member.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiseOptions {
    pub threshold: usize,
    pub fallback: Fallback,
}

impl DenoiseOptions {
    pub fn seeded(threshold: usize, seed: u64) -> Self {
        Self {
            threshold,
            fallback: Fallback::Random { seed },
        }
    }

    pub fn deterministic(threshold: usize) -> Self {
        Self {
            threshold,
            fallback: Fallback::Median,
        }
    }
}

/// Greedy chaining: consecutive positions at most `threshold` apart share a
/// cluster. Input must be strictly increasing.
pub fn cluster_lines(positions: &[usize], threshold: usize) -> Vec<LineCluster> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &p in positions {
        match out.last_mut() {
            Some(c) if p - c[c.len() - 1] <= threshold => c.push(p),
            _ => out.push(vec![p]),
        }
    }
    out.into_iter()
        .map(|positions| {
            let centroid = positions.iter().sum::<usize>() as f64 / positions.len() as f64;
            let replacement = positions[(positions.len() - 1) / 2];
            LineCluster {
                positions,
                centroid,
                replacement,
            }
        })
        .collect()
}

/// Closest template line to `p`; ties go to the lower line.
fn nearest(template: &[usize], p: f64) -> (usize, f64) {
    let mut best = (template[0], (template[0] as f64 - p).abs());
    for &t in &template[1..] {
        let d = (t as f64 - p).abs();
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

struct Resolver<'a> {
    threshold: usize,
    fallback: Fallback,
    rng: Option<&'a mut ChaCha8Rng>,
}

impl Resolver<'_> {
    fn pick(&mut self, members: &[usize]) -> usize {
        match (self.fallback, self.rng.as_deref_mut()) {
            (Fallback::Random { .. }, Some(rng)) => members[rng.gen_range(0..members.len())],
            _ => members[(members.len() - 1) / 2],
        }
    }

    /// Maps one axis' generated lines (borders included) to resolved lines.
    fn resolve(&mut self, generated: &[usize], template: &[usize]) -> Vec<usize> {
        let extent = *generated.last().expect("border line");
        let interior = &generated[1..generated.len() - 1];
        let t = self.threshold as f64;
        let mut out = vec![0, extent];
        for cluster in cluster_lines(interior, self.threshold) {
            // Template lines claimed by members that sit within reach of them.
            let claims: Vec<Option<usize>> = cluster
                .positions
                .iter()
                .map(|&p| {
                    let (line, d) = nearest(template, p as f64);
                    (d <= t).then_some(line)
                })
                .collect();
            let mut anchors: Vec<usize> = claims.iter().flatten().copied().collect();
            anchors.sort_unstable();
            anchors.dedup();

            if anchors.len() <= 1 {
                let (line, d) = nearest(template, cluster.centroid);
                if d <= t {
                    out.push(line);
                } else {
                    out.push(self.pick(&cluster.positions));
                }
            } else {
                // The chain bridges several template lines: keep each of them
                // and collapse the unclaimed members separately.
                out.extend(&anchors);
                let free: Vec<usize> = cluster
                    .positions
                    .iter()
                    .zip(&claims)
                    .filter(|(_, c)| c.is_none())
                    .map(|(&p, _)| p)
                    .collect();
                if !free.is_empty() {
                    out.push(self.pick(&free));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Rebuilds an image on the given scan lines by majority vote per cell.
/// Ties take the value of the cell's top-left pixel.
pub fn rebuild_on_lines(grid: &PatternGrid, xs: &[usize], ys: &[usize]) -> PatternGrid {
    let (w, h) = (grid.width(), grid.height());
    let mut pixels = vec![0u8; w * h];
    for yw in ys.windows(2) {
        for xw in xs.windows(2) {
            let (x0, x1, y0, y1) = (xw[0], xw[1], yw[0], yw[1]);
            let ones: usize = (y0..y1)
                .map(|y| grid.row(y)[x0..x1].iter().filter(|&&p| p == 1).count())
                .sum();
            let area = (x1 - x0) * (y1 - y0);
            let value = match (2 * ones).cmp(&area) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => grid.get(x0, y0),
            };
            if value == 1 {
                for y in y0..y1 {
                    pixels[y * w + x0..y * w + x1].fill(1);
                }
            }
        }
    }
    PatternGrid::from_pixels(w, h, pixels, grid.pitch_nm()).expect("same shape as input")
}

pub fn denoise(
    generated: &PatternGrid,
    template: &PatternGrid,
    threshold: usize,
    seed: u64,
) -> Result<PatternGrid> {
    denoise_with(generated, template, &DenoiseOptions::seeded(threshold, seed))
}

pub fn denoise_with(
    generated: &PatternGrid,
    template: &PatternGrid,
    opts: &DenoiseOptions,
) -> Result<PatternGrid> {
    if generated.width() != template.width()
        || generated.height() != template.height()
        || generated.pitch_nm() != template.pitch_nm()
    {
        return Err(Error::DimensionMismatch(format!(
            "generated {}x{}@{}nm vs template {}x{}@{}nm",
            generated.width(),
            generated.height(),
            generated.pitch_nm(),
            template.width(),
            template.height(),
            template.pitch_nm()
        )));
    }
    let tx = column_lines(template);
    let ty = row_lines(template);
    let mut rng = match opts.fallback {
        Fallback::Random { seed } => Some(seed::rng(seed)),
        Fallback::Median => None,
    };
    let mut img = generated.clone();
    for _ in 0..MAX_PASSES {
        let gx = column_lines(&img);
        let gy = row_lines(&img);
        let mut resolver = Resolver {
            threshold: opts.threshold,
            fallback: opts.fallback,
            rng: rng.as_mut(),
        };
        let xs = resolver.resolve(&gx, &tx);
        let ys = resolver.resolve(&gy, &ty);
        if xs == gx && ys == gy {
            break;
        }
        img = rebuild_on_lines(&img, &xs, &ys);
    }
    Ok(img)
}
