//! Pixel-level design-rule checking.
//!
//! Widths and spacings are measured on maximal pixel runs along rows (`H`)
//! and columns (`V`); area is measured on 4-connected metal components.
//! Runs that touch the grid border are clipped shapes and are exempt from
//! upper bounds and discrete-width membership.

mod rules;

pub use rules::{Axis, RuleMode, RuleSet, RuleVariant, SpacingTier, PRESET_NAMES};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{PatternGrid, Rect};
use crate::par::Executor;

/// Maximal run of equal pixels along one scanline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Run {
    pub start: usize,
    pub len: usize,
    pub value: u8,
}

impl Run {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Run decomposition of every scanline along one axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunList {
    pub axis: Axis,
    pub lines: Vec<Vec<Run>>,
}

pub fn line_runs(line: &[u8]) -> Vec<Run> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=line.len() {
        if i == line.len() || line[i] != line[start] {
            out.push(Run {
                start,
                len: i - start,
                value: line[start],
            });
            start = i;
        }
    }
    out
}

pub fn runs(grid: &PatternGrid, axis: Axis) -> RunList {
    let lines = match axis {
        Axis::H => (0..grid.height()).map(|y| line_runs(grid.row(y))).collect(),
        Axis::V => (0..grid.width()).map(|x| line_runs(&grid.column(x))).collect(),
    };
    RunList { axis, lines }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationAxis {
    H,
    V,
    None,
}

impl From<Axis> for ViolationAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::H => ViolationAxis::H,
            Axis::V => ViolationAxis::V,
        }
    }
}

/// Which side of a bound was missed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Below,
    Above,
    NotInSet,
}

/// One unmerged rule failure: a single run or a single component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub axis: ViolationAxis,
    pub kind: BoundKind,
    pub region: Rect,
    pub measured: u64,
    pub required: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub region: Rect,
    pub axis: ViolationAxis,
    pub measured: u64,
    pub required: String,
}

/// Rect covering a run on scanline `line`.
fn run_rect(axis: Axis, line: usize, run: &Run) -> Rect {
    match axis {
        Axis::H => Rect {
            x0: run.start,
            y0: line,
            x1: run.end(),
            y1: line + 1,
        },
        Axis::V => Rect {
            x0: line,
            y0: run.start,
            x1: line + 1,
            y1: run.end(),
        },
    }
}

fn fmt_set(set: &[u64]) -> String {
    let items: Vec<String> = set.iter().map(u64::to_string).collect();
    format!("in {{{}}} nm", items.join(","))
}

fn check_axis(grid: &PatternGrid, rules: &RuleSet, axis: Axis, out: &mut Vec<Finding>) {
    let pitch = grid.pitch_nm() as u64;
    let list = runs(grid, axis);
    let extent = match axis {
        Axis::H => grid.width(),
        Axis::V => grid.height(),
    };
    let uni = rules.is_unidirectional();
    let check_widths = !uni || axis == Axis::H;
    let check_spacing = !uni;
    let check_e2e = uni && axis == Axis::V;
    let vaxis = ViolationAxis::from(axis);

    for (line, runs) in list.lines.iter().enumerate() {
        for (k, run) in runs.iter().enumerate() {
            let len = run.len as u64 * pitch;
            let rect = run_rect(axis, line, run);
            let mut push = |rule_id: &str, kind, required: String| {
                out.push(Finding {
                    rule_id: rule_id.to_string(),
                    axis: vaxis,
                    kind,
                    region: rect,
                    measured: len,
                    required,
                })
            };
            let interior = run.start > 0 && run.end() < extent;
            if run.value == 1 {
                if !check_widths {
                    continue;
                }
                let min = rules.min_width(axis);
                if len < min {
                    push("R3-W", BoundKind::Below, format!(">= {min} nm"));
                }
                if interior {
                    if let Some(max) = rules.max_width(axis) {
                        if len > max {
                            push("R3-W", BoundKind::Above, format!("<= {max} nm"));
                        }
                    }
                    if let Some(set) = rules.discrete_widths(axis) {
                        if set.binary_search(&len).is_err() {
                            push("R3.1-W", BoundKind::NotInSet, fmt_set(set));
                        }
                    }
                }
            } else if k > 0 && k + 1 < runs.len() {
                // Gap bounded by metal on both sides.
                if check_e2e {
                    let e2e = rules.e2e_min_space.unwrap_or(0);
                    if len < e2e {
                        push("E2E", BoundKind::Below, format!(">= {e2e} nm"));
                    }
                }
                if check_spacing {
                    let neighbour = runs[k - 1].len.max(runs[k + 1].len) as u64 * pitch;
                    let (req, id) = rules.required_space(axis, neighbour);
                    if len < req {
                        push(&id, BoundKind::Below, format!(">= {req} nm"));
                    }
                    if let Some(max) = rules.max_space(axis) {
                        if len > max {
                            push("R1-S", BoundKind::Above, format!("<= {max} nm"));
                        }
                    }
                }
            }
        }
    }
}

/// 4-connected metal components as (pixel count, bounding box).
pub fn metal_components(grid: &PatternGrid) -> Vec<(usize, Rect)> {
    let (w, h) = (grid.width(), grid.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let px = grid.pixels();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if px[i] == 0 {
                continue;
            }
            if x > 0 && px[i - 1] == 1 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, i - 1));
                parent[a.max(b)] = a.min(b);
            }
            if y > 0 && px[i - w] == 1 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, i - w));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut index = std::collections::HashMap::new();
    let mut comps: Vec<(usize, Rect)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if px[i] == 0 {
                continue;
            }
            let root = find(&mut parent, i);
            let slot = *index.entry(root).or_insert_with(|| {
                comps.push((0, Rect { x0: x, y0: y, x1: x + 1, y1: y + 1 }));
                comps.len() - 1
            });
            let (count, bb) = &mut comps[slot];
            *count += 1;
            *bb = bb.bbox_union(&Rect { x0: x, y0: y, x1: x + 1, y1: y + 1 });
        }
    }
    comps
}

/// Every individual rule failure, sorted. `check` merges these.
pub fn check_findings(grid: &PatternGrid, rules: &RuleSet) -> Result<Vec<Finding>> {
    rules.validate()?;
    let mut out = Vec::new();
    check_axis(grid, rules, Axis::H, &mut out);
    check_axis(grid, rules, Axis::V, &mut out);
    if !rules.is_unidirectional() {
        let pitch2 = (grid.pitch_nm() as u64).pow(2);
        for (count, bbox) in metal_components(grid) {
            let area = count as u64 * pitch2;
            if area < rules.min_area {
                out.push(Finding {
                    rule_id: "R4-A".into(),
                    axis: ViolationAxis::None,
                    kind: BoundKind::Below,
                    region: bbox,
                    measured: area,
                    required: format!(">= {} nm^2", rules.min_area),
                });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Merges run findings of the same rule on adjacent scanlines whose runs
/// overlap into one violation with the bounding box of the group.
pub fn merge_findings(findings: &[Finding]) -> Vec<Violation> {
    let n = findings.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let key = |f: &Finding| (f.rule_id.clone(), f.axis, f.kind, f.required.clone());
    let mut groups: std::collections::BTreeMap<_, Vec<usize>> = Default::default();
    for (i, f) in findings.iter().enumerate() {
        groups.entry(key(f)).or_default().push(i);
    }
    for members in groups.values() {
        // Index runs by scanline so neighbours are found without a full scan.
        let mut by_line: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for &i in members {
            let f = &findings[i];
            let line = match f.axis {
                ViolationAxis::H => f.region.y0,
                ViolationAxis::V => f.region.x0,
                ViolationAxis::None => continue,
            };
            by_line.entry(line).or_default().push(i);
        }
        for (&line, here) in &by_line {
            let Some(next) = by_line.get(&(line + 1)) else { continue };
            for &a in here {
                for &b in next {
                    let (ra, rb) = (findings[a].region, findings[b].region);
                    let overlap = match findings[a].axis {
                        ViolationAxis::H => ra.x0 < rb.x1 && rb.x0 < ra.x1,
                        _ => ra.y0 < rb.y1 && rb.y0 < ra.y1,
                    };
                    if overlap {
                        let (x, y) = (find(&mut parent, a), find(&mut parent, b));
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
    }
    let mut merged: std::collections::BTreeMap<usize, Violation> = Default::default();
    for (i, f) in findings.iter().enumerate() {
        let root = find(&mut parent, i);
        merged
            .entry(root)
            .and_modify(|v| {
                v.region = v.region.bbox_union(&f.region);
                v.measured = match f.kind {
                    BoundKind::Below => v.measured.min(f.measured),
                    BoundKind::Above => v.measured.max(f.measured),
                    BoundKind::NotInSet => v.measured,
                };
            })
            .or_insert_with(|| Violation {
                rule_id: f.rule_id.clone(),
                region: f.region,
                axis: f.axis,
                measured: f.measured,
                required: f.required.clone(),
            });
    }
    let mut out: Vec<Violation> = merged.into_values().collect();
    out.sort_by(|a, b| {
        (&a.rule_id, a.region, a.axis, a.measured, &a.required)
            .cmp(&(&b.rule_id, b.region, b.axis, b.measured, &b.required))
    });
    out
}

/// Deterministic, sorted list of rule violations.
pub fn check(grid: &PatternGrid, rules: &RuleSet) -> Result<Vec<Violation>> {
    Ok(merge_findings(&check_findings(grid, rules)?))
}

pub fn is_legal(grid: &PatternGrid, rules: &RuleSet) -> Result<bool> {
    Ok(check_findings(grid, rules)?.is_empty())
}

/// Checks many grids; results come back in input order.
pub fn check_batch(
    grids: &[PatternGrid],
    rules: &RuleSet,
    exec: &Executor,
) -> Result<Vec<Vec<Violation>>> {
    rules.validate()?;
    exec.map(grids, |g| check(g, rules)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_grid(width: usize, height: usize, spans: &[(usize, usize)]) -> PatternGrid {
        let mut g = PatternGrid::new(width, height, 1).unwrap();
        for &(x0, x1) in spans {
            for y in 0..height {
                for x in x0..x1 {
                    g.set(x, y, true);
                }
            }
        }
        g
    }

    #[test]
    fn runs_examples() {
        assert_eq!(
            line_runs(&[0, 0, 1, 1, 0]),
            vec![
                Run { start: 0, len: 2, value: 0 },
                Run { start: 2, len: 2, value: 1 },
                Run { start: 4, len: 1, value: 0 },
            ]
        );
        assert_eq!(line_runs(&[1; 7]), vec![Run { start: 0, len: 7, value: 1 }]);
        let g = PatternGrid::from_rows(&[[0, 1], [1, 1]]);
        assert_eq!(runs(&g, Axis::V).lines[0].len(), 2);
        assert_eq!(runs(&g, Axis::V).lines[1].len(), 1);
    }

    #[test]
    fn empty_grid_is_clean() {
        let g = PatternGrid::new(16, 16, 1).unwrap();
        for name in PRESET_NAMES {
            let r = RuleSet::preset(name).unwrap();
            assert!(check(&g, &r).unwrap().is_empty());
            assert!(is_legal(&g, &r).unwrap());
        }
    }

    #[test]
    fn narrow_line_reports_one_merged_width_violation() {
        let g = line_grid(16, 10, &[(6, 9)]);
        let mut rules = RuleSet::preset("default").unwrap();
        rules.min_width_h = 4;
        rules.min_area = 1;
        let v = check(&g, &rules).unwrap();
        let w: Vec<_> = v.iter().filter(|v| v.rule_id == "R3-W").collect();
        assert_eq!(w.len(), 1, "{v:?}");
        assert_eq!(w[0].region, Rect::new(6, 0, 9, 10).unwrap());
        assert_eq!(w[0].axis, ViolationAxis::H);
        assert_eq!(w[0].measured, 3);
        let raw = check_findings(&g, &rules).unwrap();
        assert_eq!(raw.iter().filter(|f| f.rule_id == "R3-W").count(), 10);
        assert!(!is_legal(&g, &rules).unwrap());
    }

    #[test]
    fn discrete_width_membership() {
        let g = line_grid(40, 8, &[(9, 31)]);
        let rules = RuleSet {
            min_width_h: 4,
            max_width_h: Some(40),
            discrete_widths_h: Some(vec![20, 24, 32]),
            ..RuleSet::preset("complex_discrete").unwrap()
        };
        let v = check(&g, &rules).unwrap();
        let d: Vec<_> = v.iter().filter(|v| v.rule_id == "R3.1-W").collect();
        assert_eq!(d.len(), 1, "{v:?}");
        assert_eq!(d[0].measured, 22);
    }

    #[test]
    fn tiered_spacing() {
        let g = line_grid(45, 6, &[(8, 20), (25, 37)]);
        let mut rules = RuleSet::preset("complex").unwrap();
        rules.spacing_tiers = vec![SpacingTier { width_at_least: 10, required_min_space: 8 }];
        rules.max_width_h = Some(16);
        let v = check(&g, &rules).unwrap();
        let s: Vec<_> = v.iter().filter(|v| v.rule_id.starts_with("R1.")).collect();
        assert_eq!(s.len(), 1, "{v:?}");
        assert_eq!(s[0].rule_id, "R1.1-S");
        assert_eq!(s[0].measured, 5);
        assert_eq!(s[0].required, ">= 8 nm");
    }

    #[test]
    fn border_runs_exempt_from_upper_bounds() {
        let g = line_grid(40, 8, &[(0, 30)]);
        let rules = RuleSet::preset("complex_discrete").unwrap();
        let v = check(&g, &rules).unwrap();
        assert!(v.iter().all(|v| v.rule_id != "R3.1-W" && !(v.rule_id == "R3-W" && v.axis == ViolationAxis::H)), "{v:?}");
        let g = line_grid(40, 8, &[(2, 32)]);
        let v = check(&g, &rules).unwrap();
        assert!(v.iter().any(|v| v.rule_id == "R3-W" && v.axis == ViolationAxis::H));
    }

    #[test]
    fn area_and_e2e() {
        let mut g = PatternGrid::new(10, 10, 2).unwrap();
        for (x, y) in [(4, 4), (5, 4), (4, 5), (5, 5)] {
            g.set(x, y, true);
        }
        let mut rules = RuleSet::preset("default").unwrap();
        rules.min_width_h = 1;
        rules.min_width_v = 1;
        rules.min_area = 20;
        let v = check(&g, &rules).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "R4-A");
        assert_eq!(v[0].measured, 16);
        assert_eq!(v[0].axis, ViolationAxis::None);

        // Two segments on one vertical track with a 3-pixel gap.
        let mut g = PatternGrid::new(12, 20, 1).unwrap();
        for y in (0..8).chain(11..20) {
            for x in 4..8 {
                g.set(x, y, true);
            }
        }
        let uni = RuleSet::preset("uni7").unwrap();
        let v = check(&g, &uni).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule_id, "E2E");
        assert_eq!(v[0].region, Rect::new(4, 8, 8, 11).unwrap());
    }

    #[test]
    fn unidirectional_requires_e2e() {
        let mut r = RuleSet::preset("uni7").unwrap();
        r.e2e_min_space = None;
        let g = PatternGrid::new(4, 4, 1).unwrap();
        assert!(check(&g, &r).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let rules = RuleSet::preset("default").unwrap();
        let grids: Vec<_> = (1..6).map(|w| line_grid(12, 6, &[(3, 3 + w)])).collect();
        for jobs in [1, 3] {
            let batch = check_batch(&grids, &rules, &Executor::new(jobs)).unwrap();
            for (g, v) in grids.iter().zip(&batch) {
                assert_eq!(&check(g, &rules).unwrap(), v);
            }
        }
    }
}
