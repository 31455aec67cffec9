use serde::{Deserialize, Serialize};

use crate::drc::Violation;
use crate::error::{Error, Result};
use crate::grid::{MaskSetId, MaskSpec, Rect};

pub const MASKS_PER_SET: usize = 5;
pub const MIN_MASK_GRID: usize = 64;

/// Five masks of about a quarter of the grid each.
///
/// `Default`: the four quadrants (TL, TR, BL, BR) and a centred block.
/// `Horizontal`: full-width bands of a quarter height, staggered evenly from
/// the top edge to the bottom edge.
pub fn builtin_mask_set(kind: MaskSetId, width: usize, height: usize) -> Result<Vec<MaskSpec>> {
    if width < MIN_MASK_GRID || height < MIN_MASK_GRID {
        return Err(Error::InvalidInput(format!(
            "built-in masks need at least {MIN_MASK_GRID}x{MIN_MASK_GRID}, got {width}x{height}"
        )));
    }
    let rects: Vec<Rect> = match kind {
        MaskSetId::Default => {
            let (hw, hh) = (width / 2, height / 2);
            let (qw, qh) = (width / 4, height / 4);
            vec![
                Rect { x0: 0, y0: 0, x1: hw, y1: hh },
                Rect { x0: hw, y0: 0, x1: width, y1: hh },
                Rect { x0: 0, y0: hh, x1: hw, y1: height },
                Rect { x0: hw, y0: hh, x1: width, y1: height },
                Rect { x0: qw, y0: qh, x1: qw + hw, y1: qh + hh },
            ]
        }
        MaskSetId::Horizontal => {
            let band = (height as f64 * 0.25).round() as usize;
            (0..MASKS_PER_SET)
                .map(|i| {
                    let y0 = (height as f64 * i as f64 * 0.75 / (MASKS_PER_SET - 1) as f64).round()
                        as usize;
                    let y0 = y0.min(height - band);
                    Rect { x0: 0, y0, x1: width, y1: y0 + band }
                })
                .collect()
        }
        MaskSetId::Custom => {
            return Err(Error::InvalidInput("custom masks have no built-in set".into()))
        }
    };
    Ok(rects
        .into_iter()
        .enumerate()
        .map(|(i, r)| MaskSpec::single(r, kind, i))
        .collect())
}

/// Both built-in sets, default first.
pub fn all_builtin_masks(width: usize, height: usize) -> Result<Vec<MaskSpec>> {
    let mut out = builtin_mask_set(MaskSetId::Default, width, height)?;
    out.extend(builtin_mask_set(MaskSetId::Horizontal, width, height)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum RepairMask {
    Mask(MaskSpec),
    /// The expanded region is too large to be a local repair.
    Skip { area: usize, limit: usize },
}

/// Union of violation regions, each grown by `expand_pct` of its own side
/// lengths on every side (coordinates rounded half up, clamped to the grid).
pub fn mask_from_violations(
    violations: &[Violation],
    expand_pct: f64,
    max_area_frac: f64,
    width: usize,
    height: usize,
) -> Result<RepairMask> {
    if violations.is_empty() {
        return Err(Error::InvalidInput("no violations to build a mask from".into()));
    }
    if expand_pct.is_nan() || expand_pct < 0.0 || !(max_area_frac > 0.0 && max_area_frac <= 1.0) {
        return Err(Error::InvalidInput("expand_pct >= 0 and max_area_frac in (0, 1] required".into()));
    }
    let round = |v: f64| (v + 0.5).floor().max(0.0) as usize;
    let rects: Vec<Rect> = violations
        .iter()
        .map(|v| {
            let r = v.region;
            let ex = r.width() as f64 * expand_pct;
            let ey = r.height() as f64 * expand_pct;
            Rect {
                x0: round(r.x0 as f64 - ex).min(width),
                y0: round(r.y0 as f64 - ey).min(height),
                x1: round(r.x1 as f64 + ex).min(width),
                y1: round(r.y1 as f64 + ey).min(height),
            }
        })
        .filter(|r| r.x0 < r.x1 && r.y0 < r.y1)
        .collect();
    let mask = MaskSpec::new(rects, MaskSetId::Custom, 0)?;
    let area = mask.area();
    let limit = (max_area_frac * (width * height) as f64).floor() as usize;
    Ok(if area > limit {
        RepairMask::Skip { area, limit }
    } else {
        RepairMask::Mask(mask)
    })
}

/// Mask family used for iteration `t >= 1`: default on odd, horizontal on
/// even iterations.
pub fn set_for_iteration(t: usize) -> MaskSetId {
    if t % 2 == 1 {
        MaskSetId::Default
    } else {
        MaskSetId::Horizontal
    }
}

/// Next mask indices for a pattern whose own mask had index `parent_index`
/// (`None` for starters): consecutive indices after it, cycling mod 5.
pub fn next_mask_indices(parent_index: Option<usize>, count: usize) -> Vec<usize> {
    let first = parent_index.map_or(0, |i| (i + 1) % MASKS_PER_SET);
    (0..count).map(|k| (first + k) % MASKS_PER_SET).collect()
}
