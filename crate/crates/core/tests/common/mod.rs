//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Minimum of `Σ flow·cost` over the vertices of the transport polytope with
/// integer supplies `m` per row and demands `n` per column, found by
/// enumerating every spanning tree of the bipartite graph and keeping the
/// ones whose tree flows are non-negative. Returns the minimal integer total;
/// divide by `n·m` for the objective with unit total mass.
pub fn brute_force_vertices(cost: &[Vec<i64>]) -> i64 {
    let n = cost.len();
    let m = cost[0].len();
    let cells = n * m;
    let k = n + m - 1;
    assert!(cells <= 20, "brute force is exponential");
    let mut best = i64::MAX;
    for mask in 0u32..(1u32 << cells) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let edges: Vec<(usize, usize)> = (0..cells)
            .filter(|&c| mask & (1 << c) != 0)
            .map(|c| (c / m, c % m))
            .collect();
        if let Some(flows) = tree_flows(n, m, &edges) {
            let total: i64 = edges
                .iter()
                .zip(&flows)
                .map(|(&(i, j), &f)| f * cost[i][j])
                .sum();
            best = best.min(total);
        }
    }
    best
}

/// Flows on a spanning tree meeting the integer marginals, or `None` when the
/// edge set is not a spanning tree or some flow is negative.
fn tree_flows(n: usize, m: usize, edges: &[(usize, usize)]) -> Option<Vec<i64>> {
    let nodes = n + m;
    let mut remaining: Vec<i64> = (0..nodes).map(|u| if u < n { m as i64 } else { n as i64 }).collect();
    let mut degree = vec![0usize; nodes];
    for &(i, j) in edges {
        degree[i] += 1;
        degree[n + j] += 1;
    }
    let mut flows = vec![0i64; edges.len()];
    let mut used = vec![false; edges.len()];
    for _ in 0..edges.len() {
        let leaf = (0..nodes).find(|&u| degree[u] == 1)?;
        let e = (0..edges.len()).find(|&e| !used[e] && (edges[e].0 == leaf || n + edges[e].1 == leaf))?;
        let (i, j) = edges[e];
        let other = if i == leaf { n + j } else { i };
        let f = remaining[leaf];
        if f < 0 {
            return None;
        }
        flows[e] = f;
        used[e] = true;
        remaining[leaf] = 0;
        remaining[other] -= f;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    if remaining.iter().all(|&r| r == 0) && degree.iter().all(|&d| d == 0) {
        Some(flows)
    } else {
        None
    }
}

/// `(1/n) Σ a_(k) b_(k)` for sorted copies, or against the reversed order.
pub fn sorted_coupling(a: &[f64], b: &[f64], comonotone: bool) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if !comonotone {
        b.reverse();
    }
    a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}
