//! Built-in variation backend: regenerates vertical-track content inside the
//! mask and then roughens shape edges with random pixel flips.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendRequest, VariationBackend};
use crate::drc::{line_runs, Axis, RuleSet};
use crate::error::Result;
use crate::grid::{MaskSpec, PatternGrid, Rect};
use crate::seed;

pub const BACKEND_NAME: &str = "builtin:stochastic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticParams {
    /// Probability of flipping each edge-adjacent pixel inside the mask.
    pub jitter_rate: f64,
    /// Rules used to bias regenerated run lengths and widths.
    #[serde(default)]
    pub rules_hint: Option<RuleSet>,
    /// Chance of placing a new track in each empty column span.
    #[serde(default = "default_new_track_prob")]
    pub new_track_prob: f64,
}

fn default_new_track_prob() -> f64 {
    0.5
}

impl Default for StochasticParams {
    fn default() -> Self {
        Self {
            jitter_rate: 0.1,
            rules_hint: None,
            new_track_prob: default_new_track_prob(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StochasticBackend {
    pub params: StochasticParams,
}

impl StochasticBackend {
    pub fn new(params: StochasticParams) -> Self {
        Self { params }
    }
}

impl VariationBackend for StochasticBackend {
    fn name(&self) -> &str {
        BACKEND_NAME
    }

    fn vary(&self, req: &BackendRequest) -> Result<Vec<PatternGrid>> {
        stochastic_vary(&req.pattern, &req.mask, req.num_variations, req.seed, &self.params)
    }
}

/// Run-length limits in pixels derived from the rules hint.
struct Shape {
    gap: (usize, usize),
    seg: (usize, usize),
    widths: Vec<usize>,
    margin: usize,
    min_gap: usize,
    min_seg: usize,
    hinted: bool,
}

fn px(nm: u64, pitch: u64) -> usize {
    nm.div_ceil(pitch) as usize
}

impl Shape {
    fn new(hint: Option<&RuleSet>, pitch: u64) -> Self {
        let Some(r) = hint else {
            return Self {
                gap: (4, 12),
                seg: (4, 24),
                widths: vec![4, 6, 8],
                margin: 2,
                min_gap: 0,
                min_seg: 0,
                hinted: false,
            };
        };
        let uni = r.is_unidirectional();
        let min_gap = if uni {
            px(r.e2e_min_space.unwrap_or(1), pitch)
        } else {
            px(r.min_space(Axis::V), pitch)
        };
        let min_seg = if uni { 1 } else { px(r.min_width(Axis::V), pitch) };
        let min_w = px(r.min_width(Axis::H), pitch);
        let max_w = r.max_width(Axis::H).map(|m| (m / pitch) as usize);
        // Keep two pixels of slack over every minimum so a one-pixel edge
        // shift does not break a rule.
        let widths: Vec<usize> = match r.discrete_widths(Axis::H) {
            Some(set) => set
                .iter()
                .filter(|&&w| w % pitch == 0)
                .map(|&w| (w / pitch) as usize)
                .filter(|&w| w >= min_w + 2)
                .collect(),
            None => (0..3)
                .map(|k| min_w + 2 + 2 * k)
                .filter(|&w| max_w.is_none_or(|m| w <= m))
                .collect(),
        };
        let area_seg = widths
            .first()
            .map_or(0, |&w| px(r.min_area, pitch * pitch).div_ceil(w.max(1)));
        let seg_lo = [8, min_seg + 2, area_seg + 2].into_iter().max().unwrap_or(8);
        let seg_hi = match (uni, r.max_width(Axis::V)) {
            (false, Some(m)) => ((m / pitch) as usize).saturating_sub(2).max(seg_lo),
            _ => seg_lo + 32,
        };
        let gap_lo = min_gap + 2;
        let gap_hi = match (uni, r.max_space(Axis::V)) {
            (false, Some(m)) => ((m / pitch) as usize).saturating_sub(2).max(gap_lo),
            _ => gap_lo + 12,
        };
        Self {
            gap: (gap_lo, gap_hi),
            seg: (seg_lo, seg_hi),
            widths,
            margin: if uni { 2 } else { px(r.min_space(Axis::H), pitch) + 2 },
            min_gap,
            min_seg,
            hinted: true,
        }
    }

    fn runs(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        let mut metal = rng.gen_bool(0.5);
        while out.len() < len {
            let (lo, hi) = if metal { self.seg } else { self.gap };
            let run = rng.gen_range(lo..=hi);
            out.extend(std::iter::repeat_n(metal as u8, run));
            metal = !metal;
        }
        out.truncate(len);
        out
    }

    /// Checks gaps and segments of a full column against the hint.
    fn column_ok(&self, col: &[u8]) -> bool {
        if !self.hinted {
            return true;
        }
        let runs = line_runs(col);
        runs.iter().enumerate().all(|(k, r)| {
            if r.value == 1 {
                r.len >= self.min_seg
            } else {
                k == 0 || k + 1 == runs.len() || r.len >= self.min_gap
            }
        })
    }
}

/// Column span `[x0, x1)` in rows `[y0, y1)` gets a fresh run sequence,
/// retried until every column passes the hint; left untouched otherwise.
fn regenerate_track(
    img: &mut PatternGrid,
    r: &Rect,
    x0: usize,
    x1: usize,
    shape: &Shape,
    rng: &mut ChaCha8Rng,
) {
    for _ in 0..8 {
        let seq = shape.runs(r.y1 - r.y0, rng);
        let ok = (x0..x1).all(|x| {
            let mut col = img.column(x);
            col[r.y0..r.y1].copy_from_slice(&seq);
            shape.column_ok(&col)
        });
        if ok {
            for (dy, &v) in seq.iter().enumerate() {
                for x in x0..x1 {
                    img.set(x, r.y0 + dy, v == 1);
                }
            }
            return;
        }
    }
}

fn column_occupied(img: &PatternGrid, x: usize, y0: usize, y1: usize) -> bool {
    (y0..y1).any(|y| img.get(x, y) == 1)
}

fn regenerate_rect(img: &mut PatternGrid, r: &Rect, shape: &Shape, new_track_prob: f64, rng: &mut ChaCha8Rng) {
    let w = img.width();
    // Occupancy over the rect columns plus one column of context each side.
    let lo = r.x0.saturating_sub(1);
    let hi = (r.x1 + 1).min(w);
    let occ: Vec<bool> = (lo..hi).map(|x| column_occupied(img, x, r.y0, r.y1)).collect();
    let mut spans: Vec<(usize, usize, bool)> = Vec::new();
    let mut start = lo;
    for x in lo + 1..=hi {
        if x == hi || occ[x - lo] != occ[start - lo] {
            spans.push((start, x, occ[start - lo]));
            start = x;
        }
    }
    for (a, b, occupied) in spans {
        let inside = a >= r.x0 && b <= r.x1;
        if occupied {
            // Tracks reaching outside the rect would be cut; keep them.
            if inside {
                regenerate_track(img, r, a, b, shape, rng);
            }
        } else if shape.hinted && !shape.widths.is_empty() {
            let (s, e) = (a.max(r.x0), b.min(r.x1));
            if e <= s || !rng.gen_bool(new_track_prob) {
                continue;
            }
            let width = shape.widths[rng.gen_range(0..shape.widths.len())];
            let m = shape.margin;
            if e - s >= width + 2 * m {
                let x0 = rng.gen_range(s + m..=e - m - width);
                regenerate_track(img, r, x0, x0 + width, shape, rng);
            }
        }
    }
}

fn jitter(img: &mut PatternGrid, mask: &MaskSpec, rate: f64, rng: &mut ChaCha8Rng) {
    if rate <= 0.0 {
        return;
    }
    let (w, h) = (img.width(), img.height());
    let inside = mask.raster(w, h);
    let src = img.clone();
    for y in 0..h {
        for x in 0..w {
            if !inside[y * w + x] {
                continue;
            }
            let v = src.get(x, y);
            let edge = (x > 0 && src.get(x - 1, y) != v)
                || (x + 1 < w && src.get(x + 1, y) != v)
                || (y > 0 && src.get(x, y - 1) != v)
                || (y + 1 < h && src.get(x, y + 1) != v);
            if edge && rng.gen_bool(rate.min(1.0)) {
                img.set(x, y, v == 0);
            }
        }
    }
}

/// `n` mask-preserving variations of `pattern`. Variation `i` depends only
/// on `(seed, i)`.
pub fn stochastic_vary(
    pattern: &PatternGrid,
    mask: &MaskSpec,
    n: usize,
    seed: u64,
    params: &StochasticParams,
) -> Result<Vec<PatternGrid>> {
    mask.check_within(pattern.width(), pattern.height())?;
    let shape = Shape::new(params.rules_hint.as_ref(), pattern.pitch_nm() as u64);
    Ok((0..n)
        .map(|i| {
            let mut rng = seed::rng(seed::derive_seed(seed, &[i as u64]));
            let mut img = pattern.clone();
            for r in &mask.rects {
                regenerate_rect(&mut img, r, &shape, params.new_track_prob, &mut rng);
            }
            jitter(&mut img, mask, params.jitter_rate, &mut rng);
            img
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assert_mask_preserving, MaskSetId};

    #[test]
    fn empty_region_without_hint_stays_empty() {
        let g = PatternGrid::new(64, 64, 1).unwrap();
        let mask = MaskSpec::single(Rect { x0: 0, y0: 0, x1: 32, y1: 32 }, MaskSetId::Default, 0);
        let params = StochasticParams {
            jitter_rate: 0.0,
            ..Default::default()
        };
        for v in stochastic_vary(&g, &mask, 5, 1, &params).unwrap() {
            assert_eq!(v.count_ones(), 0);
        }
    }

    #[test]
    fn variation_depends_on_seed_and_index_only() {
        let mut g = PatternGrid::new(64, 64, 1).unwrap();
        for y in 0..64 {
            for x in 10..16 {
                g.set(x, y, (y / 12) % 2 == 0);
            }
        }
        let mask = MaskSpec::single(Rect { x0: 0, y0: 16, x1: 64, y1: 32 }, MaskSetId::Horizontal, 1);
        let params = StochasticParams {
            rules_hint: Some(RuleSet::preset("uni7").unwrap()),
            ..Default::default()
        };
        let a = stochastic_vary(&g, &mask, 4, 9, &params).unwrap();
        let b = stochastic_vary(&g, &mask, 2, 9, &params).unwrap();
        assert_eq!(a[..2], b[..]);
        for v in &a {
            assert!(assert_mask_preserving(&g, v, &mask).unwrap());
        }
        assert!(stochastic_vary(&g, &MaskSpec::single(Rect { x0: 0, y0: 0, x1: 65, y1: 2 }, MaskSetId::Custom, 0), 1, 0, &params).is_err());
    }
}
