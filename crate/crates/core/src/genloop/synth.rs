use rand::Rng;

use crate::drc::{self, Axis, RuleSet};
use crate::error::{Error, Result};
use crate::grid::PatternGrid;
use crate::seed;

/// Random vertical-track layouts that are legal under a unidirectional
/// rule set: tracks of a few allowed widths, each cut into segments.
pub fn synthetic_uni_starters(
    count: usize,
    width: usize,
    height: usize,
    rules: &RuleSet,
    root: u64,
) -> Result<Vec<PatternGrid>> {
    if !rules.is_unidirectional() {
        return Err(Error::InvalidInput("synthetic starters need unidirectional rules".into()));
    }
    let min_w = rules.min_width(Axis::H) as usize;
    let max_w = rules.max_width(Axis::H).map(|m| m as usize);
    let widths: Vec<usize> = match rules.discrete_widths(Axis::H) {
        Some(set) => set.iter().map(|&w| w as usize).collect(),
        None => [min_w, min_w + 2, min_w + 4]
            .into_iter()
            .filter(|&w| max_w.is_none_or(|m| w <= m))
            .collect(),
    };
    let e2e = rules.e2e_min_space.unwrap_or(1) as usize;
    let col_gap = rules.min_space(Axis::H).max(1) as usize;
    (0..count)
        .map(|i| {
            for attempt in 0..32u64 {
                let mut rng = seed::rng(seed::derive_seed(root, &[i as u64, attempt]));
                let mut g = PatternGrid::new(width, height, 1)?;
                let mut x = rng.gen_range(0..4);
                while x < width {
                    let w = widths[rng.gen_range(0..widths.len())];
                    if x + w > width {
                        break;
                    }
                    let mut y = 0;
                    let mut metal = rng.gen_bool(0.7);
                    while y < height {
                        let run = if metal { rng.gen_range(10..=48) } else { rng.gen_range(e2e..=e2e + 6) };
                        if metal {
                            for yy in y..(y + run).min(height) {
                                for xx in x..x + w {
                                    g.set(xx, yy, true);
                                }
                            }
                        }
                        y += run;
                        metal = !metal;
                    }
                    x += w + rng.gen_range(col_gap.max(2)..=col_gap.max(2) + 2);
                }
                if drc::is_legal(&g, rules)? {
                    return Ok(g);
                }
            }
            Err(Error::Internal(format!("no legal synthetic starter for index {i}")))
        })
        .collect()
}
