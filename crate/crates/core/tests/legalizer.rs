use std::collections::BTreeSet;

use patternforge::drc::{self, Axis, RuleSet, ViolationAxis};
use patternforge::legalizer::{
    derive_constraints, random_topology, solve, DifferenceSystem, SolveOptions, SolveStatus,
};
use patternforge::seed;
use patternforge::squish::{decode, SquishPattern, Topology};
use rand::Rng;

const MAX_DELTA: u64 = 8;

fn all_minimal_topologies(max: usize) -> Vec<Topology> {
    let mut out = Vec::new();
    for rows in 1..=max {
        for cols in 1..=max {
            for bits in 0u32..(1 << (rows * cols)) {
                let cells = (0..rows * cols).map(|i| ((bits >> i) & 1) as u8).collect();
                let t = Topology::new(rows, cols, cells).unwrap();
                if t.is_minimal() {
                    out.push(t);
                }
            }
        }
    }
    out
}

fn vectors(n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (1..=MAX_DELTA).map(move |d| {
                    let mut w = v.clone();
                    w.push(d);
                    w
                })
            })
            .collect();
    }
    out
}

/// Delta vectors for one axis that pass every check on that axis.
fn axis_feasible(t: &Topology, rules: &RuleSet, axis: Axis) -> Vec<Vec<u64>> {
    let (n, other) = match axis {
        Axis::H => (t.cols(), t.rows()),
        Axis::V => (t.rows(), t.cols()),
    };
    let want = match axis {
        Axis::H => ViolationAxis::H,
        Axis::V => ViolationAxis::V,
    };
    vectors(n)
        .into_iter()
        .filter(|d| {
            let ones = vec![1; other];
            let sq = match axis {
                Axis::H => SquishPattern::new(t.clone(), d.clone(), ones),
                Axis::V => SquishPattern::new(t.clone(), ones, d.clone()),
            }
            .unwrap();
            let g = decode(&sq, 1).unwrap();
            drc::check_findings(&g, rules)
                .unwrap()
                .iter()
                .all(|f| f.axis != want)
        })
        .collect()
}

/// Cells of each 4-connected metal component of the topology.
fn cell_components(t: &Topology) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; t.rows() * t.cols()];
    let mut comps = Vec::new();
    for r in 0..t.rows() {
        for c in 0..t.cols() {
            if t.get(r, c) == 0 || seen[r * t.cols() + c] {
                continue;
            }
            let mut stack = vec![(r, c)];
            seen[r * t.cols() + c] = true;
            let mut cells = Vec::new();
            while let Some((y, x)) = stack.pop() {
                cells.push((y, x));
                let mut nb = Vec::new();
                if y > 0 {
                    nb.push((y - 1, x));
                }
                if x > 0 {
                    nb.push((y, x - 1));
                }
                if y + 1 < t.rows() {
                    nb.push((y + 1, x));
                }
                if x + 1 < t.cols() {
                    nb.push((y, x + 1));
                }
                for (ny, nx) in nb {
                    if t.get(ny, nx) == 1 && !seen[ny * t.cols() + nx] {
                        seen[ny * t.cols() + nx] = true;
                        stack.push((ny, nx));
                    }
                }
            }
            comps.push(cells);
        }
    }
    comps
}

fn oracle_feasible(t: &Topology, rules: &RuleSet) -> bool {
    let fx = axis_feasible(t, rules, Axis::H);
    if fx.is_empty() {
        return false;
    }
    let fy = axis_feasible(t, rules, Axis::V);
    if fy.is_empty() {
        return false;
    }
    let comps = cell_components(t);
    let area_ok = |dx: &[u64], dy: &[u64]| {
        rules.is_unidirectional()
            || comps
                .iter()
                .all(|cells| cells.iter().map(|&(r, c)| dx[c] * dy[r]).sum::<u64>() >= rules.min_area)
    };
    for dx in &fx {
        for dy in &fy {
            if area_ok(dx, dy) {
                let sq = SquishPattern::new(t.clone(), dx.clone(), dy.clone()).unwrap();
                assert!(drc::is_legal(&decode(&sq, 1).unwrap(), rules).unwrap());
                return true;
            }
        }
    }
    false
}

fn oracle_rule_sets() -> Vec<(&'static str, RuleSet)> {
    let sets = [
        ("small_default", r#"{"min_width_h":2,"min_width_v":2,"min_space_h":2,"min_space_v":3,"min_area":12}"#),
        ("small_complex", r#"{"min_width_h":2,"max_width_h":5,"min_width_v":2,"max_width_v":6,
            "min_space_h":2,"max_space_h":6,"min_space_v":2,"max_space_v":7,
            "spacing_tiers":[{"width_at_least":4,"required_min_space":3},{"width_at_least":5,"required_min_space":4}],
            "min_area":10,"variant":"complex"}"#),
        ("small_complex_discrete", r#"{"min_width_h":2,"max_width_h":5,"min_width_v":2,"max_width_v":6,
            "discrete_widths_h":[2,3,5],"discrete_widths_v":[2,4,6],
            "min_space_h":2,"max_space_h":6,"min_space_v":2,"max_space_v":7,
            "spacing_tiers":[{"width_at_least":4,"required_min_space":3},{"width_at_least":5,"required_min_space":4}],
            "min_area":10,"variant":"complex_discrete"}"#),
        ("small_uni", r#"{"min_width_h":2,"min_width_v":1,"max_width_h":4,"min_space_h":1,"min_space_v":1,
            "min_area":1,"e2e_min_space":3,"mode":"unidirectional_vertical_tracks","variant":"complex"}"#),
        // Interior width capped below the spacing floor: a cell that is metal
        // in one row and a gap in another cannot satisfy both.
        ("tight_complex", r#"{"min_width_h":2,"max_width_h":3,"min_width_v":2,"max_width_v":3,
            "min_space_h":4,"max_space_h":8,"min_space_v":4,"max_space_v":8,
            "spacing_tiers":[{"width_at_least":3,"required_min_space":5}],
            "min_area":4,"variant":"complex"}"#),
        ("tight_discrete", r#"{"min_width_h":2,"max_width_h":6,"min_width_v":2,"max_width_v":6,
            "discrete_widths_h":[2,5],"discrete_widths_v":[3,6],
            "min_space_h":3,"max_space_h":4,"min_space_v":3,"max_space_v":5,
            "spacing_tiers":[{"width_at_least":5,"required_min_space":5}],
            "min_area":6,"variant":"complex_discrete"}"#),
        ("area_bound", r#"{"min_width_h":1,"max_width_h":3,"min_width_v":1,"max_width_v":3,
            "min_space_h":1,"min_space_v":1,"min_area":20,"variant":"complex"}"#),
        ("tight_uni", r#"{"min_width_h":3,"max_width_h":4,"min_width_v":1,"min_space_h":1,"min_space_v":1,
            "discrete_widths_h":[3],"min_area":1,"e2e_min_space":7,
            "mode":"unidirectional_vertical_tracks","variant":"complex_discrete"}"#),
    ];
    sets.iter()
        .map(|(name, json)| (*name, RuleSet::from_json(json).unwrap()))
        .collect()
}

#[test]
fn exhaustive_small_topologies_match_oracle() {
    let topologies = all_minimal_topologies(3);
    for (name, rules) in oracle_rule_sets() {
        let mut mismatches = Vec::new();
        let mut feasible = 0;
        for t in &topologies {
            let want = oracle_feasible(t, &rules);
            let opts = SolveOptions {
                max_delta_nm: Some(MAX_DELTA),
                ..SolveOptions::new(100_000, 1)
            };
            let got = solve(t, &rules, &opts).unwrap();
            feasible += want as usize;
            if (got.status == SolveStatus::Solved) != want || (!want && got.status == SolveStatus::BudgetExhausted) {
                mismatches.push((t.to_nested(), want, got.status));
            }
        }
        assert!(feasible > 0);
        println!("{name}: {} topologies, {feasible} feasible, {} mismatches", topologies.len(), mismatches.len());
        assert!(mismatches.is_empty(), "{name}: {:?}", &mismatches[..mismatches.len().min(5)]);
    }
}

fn floyd_warshall_feasible(n: usize, edges: &[(usize, usize, i64)]) -> bool {
    const INF: i64 = i64::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (a, row) in d.iter_mut().enumerate() {
        row[a] = 0;
    }
    for &(u, v, w) in edges {
        d[u][v] = d[u][v].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] < INF && d[k][j] < INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    (0..n).all(|i| d[i][i] >= 0)
}

#[test]
fn difference_system_matches_floyd_warshall() {
    let mut rng = seed::rng(11);
    for _ in 0..2000 {
        let n = rng.gen_range(2..7);
        let m = rng.gen_range(1..12);
        let edges: Vec<(usize, usize, i64)> = (0..m)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-6..8)))
            .collect();
        let mut sys = DifferenceSystem::new(n);
        let incremental = edges.iter().all(|&(u, v, w)| sys.add(u, v, w));
        assert_eq!(incremental, floyd_warshall_feasible(n, &edges), "{edges:?}");
        if incremental {
            // The least solution satisfies every edge.
            let mut with_source = edges.clone();
            for k in 1..n {
                with_source.push((k, 0, 0));
            }
            let mut sys = DifferenceSystem::new(n);
            if with_source.iter().all(|&(u, v, w)| sys.add(u, v, w)) {
                let s = sys.least_solution();
                for &(u, v, w) in &edges {
                    assert!(s[v] - s[u] <= w);
                }
            }
        }
    }
}

#[test]
fn constraint_count_matches_run_enumeration() {
    let rules = RuleSet::preset("complex").unwrap();
    for s in 0..50 {
        let t = random_topology(8, 8, &mut seed::rng(s));
        for axis in [Axis::H, Axis::V] {
            let lines: Vec<Vec<u8>> = match axis {
                Axis::H => t.to_nested(),
                Axis::V => (0..8).map(|c| t.column(c)).collect(),
            };
            let mut expected = BTreeSet::new();
            for line in &lines {
                let mut start = 0;
                let mut runs = Vec::new();
                for i in 1..=line.len() {
                    if i == line.len() || line[i] != line[start] {
                        runs.push((start, i, line[start]));
                        start = i;
                    }
                }
                for (k, &(a, b, v)) in runs.iter().enumerate() {
                    if v == 1 {
                        expected.insert((a, b, "w"));
                    } else if k > 0 && k + 1 < runs.len() {
                        expected.insert((a, b, "s"));
                    }
                }
            }
            let sys = derive_constraints(&t, &rules, axis).unwrap();
            assert_eq!(sys.intervals.len(), expected.len());
        }
    }
}

#[test]
fn solved_results_pass_drc_on_random_topologies() {
    for name in ["default", "complex", "complex_discrete", "uni7"] {
        let rules = RuleSet::preset(name).unwrap();
        for s in 0..20 {
            let t = random_topology(6, 6, &mut seed::rng(100 + s));
            let out = solve(&t, &rules, &SolveOptions::new(5000, s)).unwrap();
            if let Some(d) = out.deltas {
                let sq = SquishPattern::new(t, d.delta_x, d.delta_y).unwrap();
                assert!(drc::is_legal(&decode(&sq, 1).unwrap(), &rules).unwrap());
            }
        }
    }
}
