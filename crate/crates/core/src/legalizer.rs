//! Topology legalization: choose Δx / Δy for a squish topology so that the
//! decoded pattern is DR-clean.
//!
//! Each run of topology cells bounds a difference of prefix sums
//! `S_j - S_i`, so every axis is a system of difference constraints.
//! Feasibility is tracked with an incrementally maintained all-pairs
//! shortest-path matrix. Discrete width sets and width-dependent spacing
//! tiers are resolved by depth-first branching; minimum area, the only rule
//! that couples both axes, is enforced afterwards on the decoded pattern.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drc::{self, line_runs, Axis, RuleSet, RuleVariant, SpacingTier};
use crate::error::{Error, Result};
use crate::par::Executor;
use crate::seed;
use crate::squish::{decode, SquishPattern, Topology};

/// Area repair rounds before giving up.
pub const MAX_AREA_ROUNDS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Width,
    Spacing,
}

/// `lo <= Δ[i] + ... + Δ[j-1] <= hi` in nm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalConstraint {
    pub i: usize,
    pub j: usize,
    pub kind: ConstraintKind,
    pub lo: u64,
    pub hi: Option<u64>,
    pub discrete: Option<Vec<u64>>,
    /// Pairs of width constraints (indices into the system) flanking this
    /// gap somewhere; the required spacing follows the wider of each pair.
    pub tier_links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisConstraintSystem {
    pub axis: Axis,
    /// Number of deltas.
    pub n: usize,
    pub intervals: Vec<IntervalConstraint>,
    /// Active spacing tiers for `tier_links`.
    pub tiers: Vec<SpacingTier>,
    pub min_space: u64,
}

impl AxisConstraintSystem {
    /// Spacing required next to a width class; class 0 is below every tier.
    fn class_space(&self, class: usize) -> u64 {
        match class {
            0 => self.min_space,
            c => self.tiers[c - 1].required_min_space.max(self.min_space),
        }
    }

    fn class_of(&self, width: u64) -> usize {
        self.tiers
            .iter()
            .rposition(|t| t.width_at_least <= width)
            .map_or(0, |i| i + 1)
    }
}

fn merge_into(c: &mut IntervalConstraint, lo: u64, hi: Option<u64>, discrete: Option<&[u64]>) {
    c.lo = c.lo.max(lo);
    c.hi = match (c.hi, hi) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(d) = discrete {
        c.discrete = Some(match c.discrete.take() {
            Some(cur) => cur.into_iter().filter(|v| d.contains(v)).collect(),
            None => d.to_vec(),
        });
    }
}

/// Interval constraints of one axis. For `H` every topology row contributes
/// its column runs (bounding Δx); for `V` every column its row runs.
/// Deduplicated on `(i, j, kind)` with intersected bounds.
pub fn derive_constraints(
    topology: &Topology,
    rules: &RuleSet,
    axis: Axis,
) -> Result<AxisConstraintSystem> {
    if !topology.is_minimal() {
        return Err(Error::InvalidInput("topology is not minimal".into()));
    }
    rules.validate()?;
    let (lines, n): (Vec<Vec<u8>>, usize) = match axis {
        Axis::H => (topology.to_nested(), topology.cols()),
        Axis::V => (
            (0..topology.cols()).map(|c| topology.column(c)).collect(),
            topology.rows(),
        ),
    };
    let uni = rules.is_unidirectional();
    let widths = !uni || axis == Axis::H;
    let spacing = !uni;
    let e2e = if uni && axis == Axis::V { rules.e2e_min_space } else { None };
    let tiers: Vec<SpacingTier> = if spacing { rules.tiers().to_vec() } else { Vec::new() };

    let mut intervals: Vec<IntervalConstraint> = Vec::new();
    let mut index: HashMap<(usize, usize, ConstraintKind), usize> = HashMap::new();
    let mut upsert = |i, j, kind, lo, hi, discrete: Option<&[u64]>| -> usize {
        let id = *index.entry((i, j, kind)).or_insert_with(|| {
            intervals.push(IntervalConstraint {
                i,
                j,
                kind,
                lo,
                hi,
                discrete: None,
                tier_links: Vec::new(),
            });
            intervals.len() - 1
        });
        merge_into(&mut intervals[id], lo, hi, discrete);
        id
    };
    let mut links: Vec<(usize, (usize, usize))> = Vec::new();
    for line in &lines {
        let runs = line_runs(line);
        let mut width_ids = vec![None; runs.len()];
        for (k, run) in runs.iter().enumerate() {
            if run.value == 1 && widths {
                let interior = run.start > 0 && run.end() < n;
                let hi = if interior { rules.max_width(axis) } else { None };
                let set = if interior { rules.discrete_widths(axis) } else { None };
                width_ids[k] = Some(upsert(
                    run.start,
                    run.end(),
                    ConstraintKind::Width,
                    rules.min_width(axis),
                    hi,
                    set,
                ));
            }
        }
        for (k, run) in runs.iter().enumerate() {
            if run.value == 1 || k == 0 || k + 1 == runs.len() {
                continue;
            }
            if let Some(e) = e2e {
                upsert(run.start, run.end(), ConstraintKind::Spacing, e, None, None);
            }
            if spacing {
                let id = upsert(
                    run.start,
                    run.end(),
                    ConstraintKind::Spacing,
                    rules.min_space(axis),
                    rules.max_space(axis),
                    None,
                );
                if !tiers.is_empty() {
                    if let (Some(l), Some(r)) = (width_ids[k - 1], width_ids[k + 1]) {
                        links.push((id, (l, r)));
                    }
                }
            }
        }
    }
    for (id, link) in links {
        if !intervals[id].tier_links.contains(&link) {
            intervals[id].tier_links.push(link);
        }
    }
    Ok(AxisConstraintSystem {
        axis,
        n,
        intervals,
        tiers,
        min_space: rules.min_space(axis),
    })
}

const INF: i64 = i64::MAX / 4;

/// All-pairs shortest paths of a difference-constraint graph, maintained
/// incrementally. An edge `u -> v` of weight `w` encodes `S_v - S_u <= w`.
#[derive(Debug, Clone)]
pub struct DifferenceSystem {
    n: usize,
    d: Vec<i64>,
}

impl DifferenceSystem {
    pub fn new(nodes: usize) -> Self {
        let mut d = vec![INF; nodes * nodes];
        for a in 0..nodes {
            d[a * nodes + a] = 0;
        }
        Self { n: nodes, d }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    /// Shortest path length, `None` when unreachable.
    pub fn dist(&self, u: usize, v: usize) -> Option<i64> {
        let x = self.d[u * self.n + v];
        (x < INF).then_some(x)
    }

    /// Adds `S_v - S_u <= w`. Returns `false`, leaving the system unusable,
    /// when this closes a negative cycle. O(n²).
    pub fn add(&mut self, u: usize, v: usize, w: i64) -> bool {
        let n = self.n;
        let back = self.d[v * n + u];
        if back < INF && back + w < 0 {
            return false;
        }
        if self.d[u * n + v] <= w {
            return true;
        }
        let to_u: Vec<i64> = (0..n).map(|a| self.d[a * n + u]).collect();
        let from_v: Vec<i64> = self.d[v * n..(v + 1) * n].to_vec();
        for (a, &au) in to_u.iter().enumerate() {
            if au >= INF {
                continue;
            }
            let base = au + w;
            let row = &mut self.d[a * n..(a + 1) * n];
            for (cell, &vb) in row.iter_mut().zip(&from_v) {
                if vb < INF && base + vb < *cell {
                    *cell = base + vb;
                }
            }
        }
        true
    }

    /// `lo <= S_j - S_i <= hi`.
    pub fn bound(&mut self, i: usize, j: usize, lo: Option<i64>, hi: Option<i64>) -> bool {
        hi.is_none_or(|h| self.add(i, j, h)) && lo.is_none_or(|l| self.add(j, i, -l))
    }

    /// Currently implied range of `S_j - S_i`.
    pub fn range(&self, i: usize, j: usize) -> (i64, i64) {
        let lo = self.dist(j, i).map_or(-INF, |x| -x);
        let hi = self.dist(i, j).unwrap_or(INF);
        (lo, hi)
    }

    /// Pointwise least solution with `S_0 = 0`; requires every node to reach
    /// node 0.
    pub fn least_solution(&self) -> Vec<i64> {
        (0..self.n).map(|k| -self.dist(k, 0).unwrap_or(0)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Choice {
    lo: i64,
    hi: i64,
    class: usize,
}

#[derive(Debug, Clone)]
struct BranchVar {
    i: usize,
    j: usize,
    choices: Vec<Choice>,
}

/// An axis system converted to pitch units and split into static bounds
/// and branching variables.
struct UnitSystem<'a> {
    sys: &'a AxisConstraintSystem,
    pitch: u64,
    vars: Vec<BranchVar>,
    /// Per variable: (gap i, gap j, other variable) spacing dependencies.
    deps: Vec<Vec<(usize, usize, usize)>>,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

impl<'a> UnitSystem<'a> {
    fn new(sys: &'a AxisConstraintSystem, pitch: u64, rng: &mut impl Rng) -> Self {
        let to_lo = |nm: u64| ceil_div(nm, pitch) as i64;
        let to_hi = |nm: u64| (nm / pitch) as i64;
        let mut var_of: BTreeMap<usize, usize> = BTreeMap::new();
        let linked: Vec<usize> = sys
            .intervals
            .iter()
            .flat_map(|c| c.tier_links.iter().flat_map(|&(l, r)| [l, r]))
            .collect();
        let mut vars = Vec::new();
        for (id, c) in sys.intervals.iter().enumerate() {
            let lo = to_lo(c.lo);
            let hi = c.hi.map(to_hi);
            let choices: Vec<Choice> = if let Some(set) = &c.discrete {
                let mut v: Vec<Choice> = set
                    .iter()
                    .filter(|&&w| w % pitch == 0)
                    .map(|&w| Choice {
                        lo: (w / pitch) as i64,
                        hi: (w / pitch) as i64,
                        class: sys.class_of(w),
                    })
                    .filter(|ch| ch.lo >= lo && hi.is_none_or(|h| ch.hi <= h))
                    .collect();
                v.shuffle(rng);
                v
            } else if linked.contains(&id) {
                let mut bounds: Vec<u64> = vec![0];
                bounds.extend(sys.tiers.iter().map(|t| t.width_at_least));
                (0..bounds.len())
                    .filter_map(|class| {
                        let clo = to_lo(bounds[class]).max(lo);
                        let chi = bounds
                            .get(class + 1)
                            .map(|&next| to_hi(next - 1))
                            .unwrap_or(INF);
                        let chi = hi.map_or(chi, |h| h.min(chi));
                        (clo <= chi).then_some(Choice {
                            lo: clo,
                            hi: chi,
                            class,
                        })
                    })
                    .collect()
            } else {
                continue;
            };
            var_of.insert(id, vars.len());
            vars.push(BranchVar {
                i: c.i,
                j: c.j,
                choices,
            });
        }
        let mut deps = vec![Vec::new(); vars.len()];
        for c in &sys.intervals {
            for &(l, r) in &c.tier_links {
                let (vl, vr) = (var_of[&l], var_of[&r]);
                deps[vl].push((c.i, c.j, vr));
                if vr != vl {
                    deps[vr].push((c.i, c.j, vl));
                }
            }
        }
        Self {
            sys,
            pitch,
            vars,
            deps,
        }
    }
}

enum Search {
    Found(Vec<i64>),
    Infeasible,
    Budget,
}

struct Dfs<'a> {
    us: &'a UnitSystem<'a>,
    nodes: &'a mut u64,
    budget: u64,
}

impl Dfs<'_> {
    fn run(&mut self, dist: DifferenceSystem, assigned: &mut Vec<Option<usize>>) -> Search {
        // Most constrained unassigned variable first.
        let mut pick: Option<(usize, Vec<usize>)> = None;
        for (v, var) in self.us.vars.iter().enumerate() {
            if assigned[v].is_some() {
                continue;
            }
            let (lo, hi) = dist.range(var.i, var.j);
            let viable: Vec<usize> = (0..var.choices.len())
                .filter(|&c| var.choices[c].lo <= hi && var.choices[c].hi >= lo)
                .collect();
            if viable.is_empty() {
                return Search::Infeasible;
            }
            if pick.as_ref().is_none_or(|(_, best)| viable.len() < best.len()) {
                pick = Some((v, viable));
            }
        }
        let Some((v, viable)) = pick else {
            return Search::Found(dist.least_solution());
        };
        let var = &self.us.vars[v];
        for c in viable {
            if *self.nodes >= self.budget {
                return Search::Budget;
            }
            *self.nodes += 1;
            let ch = var.choices[c];
            let mut next = dist.clone();
            let hi = (ch.hi < INF).then_some(ch.hi);
            let mut ok = next.bound(var.i, var.j, Some(ch.lo), hi);
            assigned[v] = Some(c);
            for &(gi, gj, other) in &self.us.deps[v] {
                if !ok {
                    break;
                }
                if let Some(oc) = assigned[other] {
                    let class = ch.class.max(self.us.vars[other].choices[oc].class);
                    let req = ceil_div(self.us.sys.class_space(class), self.us.pitch) as i64;
                    ok = next.bound(gi, gj, Some(req), None);
                }
            }
            if ok {
                match self.run(next, assigned) {
                    Search::Infeasible => {}
                    other => return other,
                }
            }
            assigned[v] = None;
        }
        Search::Infeasible
    }
}

/// Solves one axis. `extra` holds additional lower bounds `(i, j, lo)` in
/// pitch units.
/// Delta and interval bounds of one axis without any branching, in pitch
/// units. `None` when already contradictory.
fn static_system(sys: &AxisConstraintSystem, opts: &SolveOptions) -> Option<DifferenceSystem> {
    let pitch = opts.pitch_nm as u64;
    let mut dist = DifferenceSystem::new(sys.n + 1);
    let max_delta = opts.max_delta_nm.map(|m| (m / pitch) as i64);
    for k in 0..sys.n {
        if !dist.bound(k, k + 1, Some(1), max_delta) {
            return None;
        }
    }
    for c in &sys.intervals {
        let lo = ceil_div(c.lo, pitch) as i64;
        let hi = c.hi.map(|h| (h / pitch) as i64);
        if !dist.bound(c.i, c.j, Some(lo), hi) {
            return None;
        }
    }
    Some(dist)
}

/// Solves one axis. `extra` holds additional lower bounds `(i, j, lo)` in
/// pitch units.
fn solve_axis(
    sys: &AxisConstraintSystem,
    extra: &BTreeMap<(usize, usize), i64>,
    opts: &SolveOptions,
    seed: u64,
    nodes: &mut u64,
) -> Search {
    *nodes += 1;
    let Some(mut dist) = static_system(sys, opts) else {
        return Search::Infeasible;
    };
    for (&(i, j), &lo) in extra {
        if !dist.bound(i, j, Some(lo), None) {
            return Search::Infeasible;
        }
    }
    let us = UnitSystem::new(sys, opts.pitch_nm as u64, &mut seed::rng(seed));
    let mut assigned = vec![None; us.vars.len()];
    Dfs {
        us: &us,
        nodes,
        budget: opts.budget,
    }
    .run(dist, &mut assigned)
}

/// 4-connected metal components of a topology as lists of (row, col) cells.
fn cell_components(t: &Topology) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = (t.rows(), t.cols());
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    for r0 in 0..rows {
        for c0 in 0..cols {
            if t.get(r0, c0) == 0 || seen[r0 * cols + c0] {
                continue;
            }
            seen[r0 * cols + c0] = true;
            let mut stack = vec![(r0, c0)];
            let mut cells = Vec::new();
            while let Some((r, c)) = stack.pop() {
                cells.push((r, c));
                let around = [
                    (r.wrapping_sub(1), c),
                    (r + 1, c),
                    (r, c.wrapping_sub(1)),
                    (r, c + 1),
                ];
                for (nr, nc) in around {
                    if nr < rows && nc < cols && t.get(nr, nc) == 1 && !seen[nr * cols + nc] {
                        seen[nr * cols + nc] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            out.push(cells);
        }
    }
    out
}

/// True when some component cannot reach the minimum area even with every
/// delta at its individual maximum.
fn area_unreachable(
    topology: &Topology,
    sx: &AxisConstraintSystem,
    sy: &AxisConstraintSystem,
    rules: &RuleSet,
    opts: &SolveOptions,
) -> bool {
    if rules.is_unidirectional() {
        return false;
    }
    let (Some(dx), Some(dy)) = (static_system(sx, opts), static_system(sy, opts)) else {
        return true;
    };
    let pitch = opts.pitch_nm as u128;
    let max_x: Vec<Option<u128>> = (0..sx.n).map(|k| dx.dist(k, k + 1).map(|v| v as u128 * pitch)).collect();
    let max_y: Vec<Option<u128>> = (0..sy.n).map(|k| dy.dist(k, k + 1).map(|v| v as u128 * pitch)).collect();
    cell_components(topology).iter().any(|cells| {
        let mut total = 0u128;
        for &(r, c) in cells {
            match (max_x[c], max_y[r]) {
                (Some(a), Some(b)) => total += a * b,
                _ => return false,
            }
        }
        total < rules.min_area as u128
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Search node limit shared by both axes and all area rounds.
    pub budget: u64,
    pub seed: u64,
    pub pitch_nm: u32,
    /// Optional cap on every individual delta.
    pub max_delta_nm: Option<u64>,
}

impl SolveOptions {
    pub fn new(budget: u64, seed: u64) -> Self {
        Self {
            budget,
            seed,
            pitch_nm: 1,
            max_delta_nm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    Infeasible,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes_explored: u64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub area_rounds: usize,
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deltas {
    pub delta_x: Vec<u64>,
    pub delta_y: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub deltas: Option<Deltas>,
    pub stats: SolveStats,
}

fn to_deltas(prefix: &[i64], pitch: u64) -> Vec<u64> {
    prefix.windows(2).map(|w| (w[1] - w[0]) as u64 * pitch).collect()
}

/// Index of the prefix sum that lands on pixel coordinate `px`.
fn line_index(deltas: &[u64], pitch: u64, px: usize) -> usize {
    let mut acc = 0usize;
    for (k, d) in deltas.iter().enumerate() {
        if acc == px {
            return k;
        }
        acc += (d / pitch) as usize;
    }
    deltas.len()
}

/// Largest value each delta can take given the static bounds and `extra`.
fn delta_caps(
    sys: &AxisConstraintSystem,
    extra: &BTreeMap<(usize, usize), i64>,
    opts: &SolveOptions,
) -> Vec<i64> {
    let Some(mut dist) = static_system(sys, opts) else {
        return vec![0; sys.n];
    };
    for (&(i, j), &lo) in extra {
        if !dist.bound(i, j, Some(lo), None) {
            return vec![0; sys.n];
        }
    }
    (0..sys.n).map(|k| dist.range(k, k + 1).1).collect()
}

/// Raises every delta in `[k0, k1)` by `factor`, clamped to `caps`, merged
/// into `extra`. Only bounds above the current value are recorded.
#[allow(clippy::too_many_arguments)]
fn scale_range(
    extra: &mut BTreeMap<(usize, usize), i64>,
    deltas: &[u64],
    caps: &[i64],
    pitch: u64,
    k0: usize,
    k1: usize,
    factor: f64,
) {
    for k in k0..k1 {
        let cur = (deltas[k] / pitch) as i64;
        let want = ((cur as f64 * factor).ceil() as i64).max(cur + 1).min(caps[k]);
        if want > cur {
            let e = extra.entry((k, k + 1)).or_insert(0);
            *e = (*e).max(want);
        }
    }
}

/// Legalizes `topology` under `rules`. Every `Solved` outcome has been
/// decoded and checked clean by [`drc::check`].
pub fn solve(topology: &Topology, rules: &RuleSet, opts: &SolveOptions) -> Result<SolveOutcome> {
    let start = Instant::now();
    if opts.budget == 0 || opts.pitch_nm == 0 {
        return Err(Error::Config("budget and pitch must be positive".into()));
    }
    let sx = derive_constraints(topology, rules, Axis::H)?;
    let sy = derive_constraints(topology, rules, Axis::V)?;
    let pitch = opts.pitch_nm as u64;
    let seed_x = seed::derive_seed(opts.seed, &[0]);
    let seed_y = seed::derive_seed(opts.seed, &[1]);
    let mut nodes = 0u64;
    let finish = |status, deltas, nodes, rounds| SolveOutcome {
        status,
        deltas,
        stats: SolveStats {
            nodes_explored: nodes,
            wall_time: start.elapsed(),
            area_rounds: rounds,
        },
    };

    let mut extra_x = BTreeMap::new();
    let mut extra_y = BTreeMap::new();
    let mut px = match solve_axis(&sx, &extra_x, opts, seed_x, &mut nodes) {
        Search::Found(p) => p,
        Search::Infeasible => return Ok(finish(SolveStatus::Infeasible, None, nodes, 0)),
        Search::Budget => return Ok(finish(SolveStatus::BudgetExhausted, None, nodes, 0)),
    };
    let mut py = match solve_axis(&sy, &extra_y, opts, seed_y, &mut nodes) {
        Search::Found(p) => p,
        Search::Infeasible => return Ok(finish(SolveStatus::Infeasible, None, nodes, 0)),
        Search::Budget => return Ok(finish(SolveStatus::BudgetExhausted, None, nodes, 0)),
    };

    let mut rounds = 0;
    for round in 0..=MAX_AREA_ROUNDS {
        rounds = round;
        let dx = to_deltas(&px, pitch);
        let dy = to_deltas(&py, pitch);
        let sq = SquishPattern::new(topology.clone(), dx.clone(), dy.clone())?;
        let grid = decode(&sq, opts.pitch_nm)?;
        let violations = drc::check(&grid, rules)?;
        if violations.is_empty() {
            let deltas = Deltas {
                delta_x: dx,
                delta_y: dy,
            };
            return Ok(finish(SolveStatus::Solved, Some(deltas), nodes, round));
        }
        if let Some(v) = violations.iter().find(|v| v.rule_id != "R4-A") {
            return Err(Error::Internal(format!(
                "legalized pattern fails {} at {:?}",
                v.rule_id, v.region
            )));
        }
        if round == MAX_AREA_ROUNDS {
            break;
        }
        let need_px = ceil_div(rules.min_area, pitch * pitch) as f64;
        let failing: Vec<_> = drc::metal_components(&grid)
            .into_iter()
            .filter(|(count, _)| ((*count as u64) * pitch * pitch) < rules.min_area)
            .collect();
        // Grow both axes evenly, then either axis alone.
        let caps_x = delta_caps(&sx, &extra_x, opts);
        let caps_y = delta_caps(&sy, &extra_y, opts);
        let mut adopted = false;
        for mode in 0..3 {
            let (mut ex, mut ey) = (extra_x.clone(), extra_y.clone());
            for (count, bb) in &failing {
                let ratio = need_px / *count as f64;
                let (kx0, kx1) = (line_index(&dx, pitch, bb.x0), line_index(&dx, pitch, bb.x1));
                let (ky0, ky1) = (line_index(&dy, pitch, bb.y0), line_index(&dy, pitch, bb.y1));
                match mode {
                    0 => {
                        scale_range(&mut ex, &dx, &caps_x, pitch, kx0, kx1, ratio.sqrt());
                        scale_range(&mut ey, &dy, &caps_y, pitch, ky0, ky1, ratio.sqrt());
                    }
                    1 => scale_range(&mut ex, &dx, &caps_x, pitch, kx0, kx1, ratio),
                    _ => scale_range(&mut ey, &dy, &caps_y, pitch, ky0, ky1, ratio),
                }
            }
            if ex == extra_x && ey == extra_y {
                continue;
            }
            let rx = if ex != extra_x {
                solve_axis(&sx, &ex, opts, seed_x, &mut nodes)
            } else {
                Search::Found(px.clone())
            };
            let rx = match rx {
                Search::Found(p) => p,
                Search::Infeasible => continue,
                Search::Budget => {
                    return Ok(finish(SolveStatus::BudgetExhausted, None, nodes, round + 1))
                }
            };
            let ry = if ey != extra_y {
                solve_axis(&sy, &ey, opts, seed_y, &mut nodes)
            } else {
                Search::Found(py.clone())
            };
            let ry = match ry {
                Search::Found(p) => p,
                Search::Infeasible => continue,
                Search::Budget => {
                    return Ok(finish(SolveStatus::BudgetExhausted, None, nodes, round + 1))
                }
            };
            (px, py, extra_x, extra_y) = (rx, ry, ex, ey);
            adopted = true;
            break;
        }
        if !adopted {
            break;
        }
    }
    let status = if area_unreachable(topology, &sx, &sy, rules, opts) {
        SolveStatus::Infeasible
    } else {
        SolveStatus::BudgetExhausted
    };
    Ok(finish(status, None, nodes, rounds))
}

/// Random minimal `rows x cols` topology with cell density about one half.
pub fn random_topology(rows: usize, cols: usize, rng: &mut impl Rng) -> Topology {
    let mut cells: Vec<u8> = (0..rows * cols).map(|_| rng.gen_range(0..2)).collect();
    loop {
        let mut changed = false;
        for r in 1..rows {
            if cells[r * cols..(r + 1) * cols] == cells[(r - 1) * cols..r * cols] {
                cells[r * cols + rng.gen_range(0..cols)] ^= 1;
                changed = true;
            }
        }
        for c in 1..cols {
            if (0..rows).all(|r| cells[r * cols + c] == cells[r * cols + c - 1]) {
                cells[rng.gen_range(0..rows) * cols + c] ^= 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Topology::new(rows, cols, cells).expect("shape matches")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub variants: Vec<RuleVariant>,
    pub samples: usize,
    pub budget: u64,
    pub seed: u64,
    /// Numeric rule values; the variant decides which are enforced.
    pub rules: RuleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub variant: RuleVariant,
    pub success_rate: f64,
    /// Seconds per solve.
    pub mean_time: f64,
    pub mean_nodes: f64,
}

/// Solves the same random topologies under every variant.
pub fn bench(cfg: &BenchConfig, exec: &Executor) -> Result<Vec<BenchRow>> {
    if cfg.samples == 0 || cfg.sizes.iter().any(|&s| s < 4) {
        return Err(Error::Config("bench needs samples >= 1 and sizes >= 4".into()));
    }
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let topos: Vec<Topology> = (0..cfg.samples)
            .map(|s| {
                let mut rng = seed::rng(seed::derive_seed(cfg.seed, &[size as u64, s as u64]));
                random_topology(size, size, &mut rng)
            })
            .collect();
        for &variant in &cfg.variants {
            let rules = cfg.rules.with_variant(variant);
            let outcomes = exec.map_range(topos.len(), |s| {
                let opts = SolveOptions::new(cfg.budget, seed::derive_seed(cfg.seed, &[s as u64]));
                solve(&topos[s], &rules, &opts)
            });
            let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
            let n = outcomes.len() as f64;
            rows.push(BenchRow {
                size,
                variant,
                success_rate: outcomes.iter().filter(|o| o.status == SolveStatus::Solved).count() as f64 / n,
                mean_time: outcomes.iter().map(|o| o.stats.wall_time.as_secs_f64()).sum::<f64>() / n,
                mean_nodes: outcomes.iter().map(|o| o.stats.nodes_explored as f64).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,variant,success_rate,mean_time,mean_nodes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.6},{:.1}\n",
            r.size, r.variant, r.success_rate, r.mean_time, r.mean_nodes
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(json: &str) -> RuleSet {
        RuleSet::from_json(json).unwrap()
    }

    #[test]
    fn border_example() {
        let t = Topology::from_nested(&[vec![1, 0], vec![0, 0]]).unwrap();
        let r = rules(r#"{"min_width_h":16,"min_width_v":16,"min_space_h":18,"min_space_v":18,"min_area":1}"#);
        let sx = derive_constraints(&t, &r, Axis::H).unwrap();
        assert_eq!(sx.intervals.len(), 1);
        let c = &sx.intervals[0];
        assert_eq!((c.i, c.j, c.kind, c.lo, c.hi), (0, 1, ConstraintKind::Width, 16, None));
        let zero = Topology::from_nested(&[vec![0]]).unwrap();
        assert!(derive_constraints(&zero, &r, Axis::H).unwrap().intervals.is_empty());
        let dup = Topology::from_nested(&[vec![1, 1]]).unwrap();
        assert!(derive_constraints(&dup, &r, Axis::H).is_err());
    }

    #[test]
    fn single_cell() {
        let t = Topology::from_nested(&[vec![1]]).unwrap();
        let r = rules(r#"{"min_width_h":16,"min_width_v":16,"min_space_h":4,"min_space_v":4,"min_area":48}"#);
        let out = solve(&t, &r, &SolveOptions::new(1000, 0)).unwrap();
        assert_eq!(out.status, SolveStatus::Solved);
        let d = out.deltas.unwrap();
        assert!(d.delta_x[0] >= 16);
    }

    #[test]
    fn contradictory_intervals() {
        let mut s = DifferenceSystem::new(2);
        assert!(s.bound(0, 1, Some(10), Some(12)));
        assert!(!s.bound(0, 1, Some(14), Some(16)));
    }

    #[test]
    fn least_solution_is_tight() {
        let mut s = DifferenceSystem::new(3);
        assert!(s.bound(0, 1, Some(2), None));
        assert!(s.bound(1, 2, Some(3), Some(5)));
        assert!(s.bound(0, 2, Some(7), None));
        assert_eq!(s.least_solution(), vec![0, 2, 7]);
    }

    #[test]
    fn complex_discrete_solution_is_clean() {
        let t = Topology::from_nested(&[
            vec![0, 1, 0, 1, 0],
            vec![0, 1, 0, 0, 0],
            vec![0, 0, 0, 1, 1],
        ])
        .unwrap();
        let r = RuleSet::preset("complex_discrete").unwrap();
        let out = solve(&t, &r, &SolveOptions::new(10_000, 3)).unwrap();
        assert_eq!(out.status, SolveStatus::Solved, "{out:?}");
        let d = out.deltas.unwrap();
        let sq = SquishPattern::new(t, d.delta_x, d.delta_y).unwrap();
        assert!(drc::is_legal(&decode(&sq, 1).unwrap(), &r).unwrap());
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = seed::rng(5);
        let t = random_topology(8, 8, &mut rng);
        assert!(t.is_minimal());
        let r = RuleSet::preset("complex_discrete").unwrap();
        let a = solve(&t, &r, &SolveOptions::new(2000, 9)).unwrap();
        let b = solve(&t, &r, &SolveOptions::new(2000, 9)).unwrap();
        assert_eq!((a.status, a.deltas), (b.status, b.deltas));
    }

    #[test]
    fn default_is_always_solvable() {
        let r = RuleSet::preset("default").unwrap();
        for s in 0..10 {
            let t = random_topology(8, 8, &mut seed::rng(s));
            let out = solve(&t, &r, &SolveOptions::new(10_000, s)).unwrap();
            assert_eq!(out.status, SolveStatus::Solved);
        }
    }

    #[test]
    fn uni_mode_uses_e2e() {
        let t = Topology::from_nested(&[vec![1, 0], vec![0, 0], vec![1, 0]]).unwrap();
        let r = RuleSet::preset("uni7").unwrap();
        let sy = derive_constraints(&t, &r, Axis::V).unwrap();
        assert_eq!(sy.intervals.len(), 1);
        assert_eq!(sy.intervals[0].lo, 6);
        let out = solve(&t, &r, &SolveOptions::new(100, 0)).unwrap();
        assert_eq!(out.status, SolveStatus::Solved);
        assert!(out.deltas.unwrap().delta_y[1] >= 6);
    }
}
