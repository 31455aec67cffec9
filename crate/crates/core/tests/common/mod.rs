//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use patternforge::drc::{Finding, RuleMode, RuleSet, RuleVariant, ViolationAxis};
use patternforge::{PatternGrid, Rect};
use rand::Rng;

pub type OracleFinding = (String, char, Rect, u64);

pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, p: f64) -> PatternGrid {
    let mut g = PatternGrid::new(w, h, 1).unwrap();
    for y in 0..h {
        for x in 0..w {
            g.set(x, y, rng.gen_bool(p));
        }
    }
    g
}

/// Length of the equal-valued stretch through `i` in `line`, as `[a, b)`.
fn stretch(line: &[u8], i: usize) -> (usize, usize) {
    let v = line[i];
    let mut a = i;
    while a > 0 && line[a - 1] == v {
        a -= 1;
    }
    let mut b = i + 1;
    while b < line.len() && line[b] == v {
        b += 1;
    }
    (a, b)
}

fn line_findings(
    line: &[u8],
    index: usize,
    axis: char,
    rules: &RuleSet,
    pitch: u64,
    out: &mut BTreeSet<OracleFinding>,
) {
    let uni = rules.mode == RuleMode::UnidirectionalVerticalTracks;
    let complex = rules.variant != RuleVariant::Default;
    let discrete = rules.variant == RuleVariant::ComplexDiscrete;
    let (min_w, max_w, set, min_s, max_s) = if axis == 'h' {
        (rules.min_width_h, rules.max_width_h, &rules.discrete_widths_h, rules.min_space_h, rules.max_space_h)
    } else {
        (rules.min_width_v, rules.max_width_v, &rules.discrete_widths_v, rules.min_space_v, rules.max_space_v)
    };
    let n = line.len();
    let rect = |a: usize, b: usize| {
        if axis == 'h' {
            Rect { x0: a, y0: index, x1: b, y1: index + 1 }
        } else {
            Rect { x0: index, y0: a, x1: index + 1, y1: b }
        }
    };
    let mut i = 0;
    while i < n {
        let (a, b) = stretch(line, i);
        let len = (b - a) as u64 * pitch;
        let touches = a == 0 || b == n;
        if line[i] == 1 {
            let widths_apply = !uni || axis == 'h';
            if widths_apply {
                if len < min_w {
                    out.insert(("R3-W".into(), axis, rect(a, b), len));
                }
                if complex && !touches && max_w.is_some_and(|m| len > m) {
                    out.insert(("R3-W".into(), axis, rect(a, b), len));
                }
                if discrete && !touches && set.as_ref().is_some_and(|s| !s.contains(&len)) {
                    out.insert(("R3.1-W".into(), axis, rect(a, b), len));
                }
            }
        } else if !touches {
            if uni {
                if axis == 'v' && len < rules.e2e_min_space.unwrap_or(0) {
                    out.insert(("E2E".into(), axis, rect(a, b), len));
                }
            } else {
                let left = stretch(line, a - 1);
                let right = stretch(line, b);
                let wide = ((left.1 - left.0).max(right.1 - right.0)) as u64 * pitch;
                let mut req = min_s;
                let mut id = "R1-S".to_string();
                if complex {
                    for (t, tier) in rules.spacing_tiers.iter().enumerate() {
                        if wide >= tier.width_at_least {
                            req = min_s.max(tier.required_min_space);
                            id = format!("R1.{}-S", t + 1);
                        }
                    }
                }
                if len < req {
                    out.insert((id, axis, rect(a, b), len));
                }
                if complex && max_s.is_some_and(|m| len > m) {
                    out.insert(("R1-S".into(), axis, rect(a, b), len));
                }
            }
        }
        i = b;
    }
}

/// Every rule failure of `g`, computed pixel by pixel.
pub fn drc_oracle(g: &PatternGrid, rules: &RuleSet) -> BTreeSet<OracleFinding> {
    let (w, h) = (g.width(), g.height());
    let pitch = g.pitch_nm() as u64;
    let mut out = BTreeSet::new();
    for y in 0..h {
        let row: Vec<u8> = (0..w).map(|x| g.get(x, y)).collect();
        line_findings(&row, y, 'h', rules, pitch, &mut out);
    }
    for x in 0..w {
        let col: Vec<u8> = (0..h).map(|y| g.get(x, y)).collect();
        line_findings(&col, x, 'v', rules, pitch, &mut out);
    }
    if rules.mode != RuleMode::UnidirectionalVerticalTracks {
        let mut seen = vec![false; w * h];
        for sy in 0..h {
            for sx in 0..w {
                if g.get(sx, sy) == 0 || seen[sy * w + sx] {
                    continue;
                }
                let mut queue = VecDeque::from([(sx, sy)]);
                seen[sy * w + sx] = true;
                let mut count = 0u64;
                let mut bb = Rect { x0: sx, y0: sy, x1: sx + 1, y1: sy + 1 };
                while let Some((x, y)) = queue.pop_front() {
                    count += 1;
                    bb.x0 = bb.x0.min(x);
                    bb.y0 = bb.y0.min(y);
                    bb.x1 = bb.x1.max(x + 1);
                    bb.y1 = bb.y1.max(y + 1);
                    let nbrs = [
                        (x.wrapping_sub(1), y),
                        (x + 1, y),
                        (x, y.wrapping_sub(1)),
                        (x, y + 1),
                    ];
                    for (nx, ny) in nbrs {
                        if nx < w && ny < h && g.get(nx, ny) == 1 && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
                let area = count * pitch * pitch;
                if area < rules.min_area {
                    out.insert(("R4-A".into(), '-', bb, area));
                }
            }
        }
    }
    out
}

pub fn engine_set(findings: &[Finding]) -> BTreeSet<OracleFinding> {
    findings
        .iter()
        .map(|f| {
            let axis = match f.axis {
                ViolationAxis::H => 'h',
                ViolationAxis::V => 'v',
                ViolationAxis::None => '-',
            };
            (f.rule_id.clone(), axis, f.region, f.measured)
        })
        .collect()
}

/// Noise level by padding the grid with a copy of its border.
pub fn noise_oracle(g: &PatternGrid) -> f64 {
    let (w, h) = (g.width() as isize, g.height() as isize);
    let at = |x: isize, y: isize| g.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize);
    let mut noisy = 0;
    for y in 0..h {
        for x in 0..w {
            let v = at(x, y);
            // A clamped neighbour outside the grid is the pixel itself.
            let nbrs = [
                if x > 0 { at(x - 1, y) } else { v },
                if x + 1 < w { at(x + 1, y) } else { v },
                if y > 0 { at(x, y - 1) } else { v },
                if y + 1 < h { at(x, y + 1) } else { v },
            ];
            if nbrs.iter().filter(|&&n| n != v).count() >= 3 {
                noisy += 1;
            }
        }
    }
    noisy as f64 / (w * h) as f64
}

/// Shannon entropy (bits) of a list of keys, by counting in a sorted map.
pub fn entropy_of<K: Ord>(keys: Vec<K>) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    let n = keys.len() as f64;
    for k in keys {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .abs()
}

/// The small rule set used for exhaustive-style DRC comparisons on 8×8.
pub fn small_rules() -> RuleSet {
    RuleSet::from_json(
        r#"{"min_width_h":2,"max_width_h":5,"min_width_v":2,"max_width_v":6,
            "discrete_widths_h":[2,3,5],"discrete_widths_v":[2,4,6],
            "min_space_h":2,"max_space_h":5,"min_space_v":2,"max_space_v":6,
            "spacing_tiers":[{"width_at_least":3,"required_min_space":3},{"width_at_least":5,"required_min_space":4}],
            "min_area":6,"variant":"complex_discrete"}"#,
    )
    .unwrap()
}

pub fn small_uni_rules() -> RuleSet {
    RuleSet::from_json(
        r#"{"min_width_h":2,"min_width_v":1,"min_space_h":1,"min_space_v":1,"min_area":1,
            "e2e_min_space":3,"mode":"unidirectional_vertical_tracks"}"#,
    )
    .unwrap()
}

/// Recomputes every step of the greedy max-sum order from scratch and
/// returns the first step that disagrees with `order`.
pub fn greedy_mismatch(points: &[Vec<f64>], order: &[usize]) -> Option<usize> {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - b[i]) * (a[i] - b[i]);
        }
        s.sqrt()
    };
    for t in 1..order.len() {
        let chosen = &order[..t];
        let mut best: Option<(usize, f64)> = None;
        for cand in 0..points.len() {
            if chosen.contains(&cand) {
                continue;
            }
            let total: f64 = chosen.iter().map(|&c| dist(&points[cand], &points[c])).sum();
            if best.is_none_or(|(_, b)| total > b) {
                best = Some((cand, total));
            }
        }
        if best.map(|b| b.0) != Some(order[t]) {
            return Some(t);
        }
    }
    None
}
