//! Primal network simplex on the dense bipartite transport graph.
//!
//! Sources carry supply `m`, targets carry demand `n`, so every basic
//! solution has integer flows and the marginals are met exactly; masses are
//! divided by `n·m` on output. The spanning tree is stored with the
//! parent/thread/successor-count representation, starts from an artificial
//! big-M basis hanging off an extra root node, and is kept strongly feasible
//! by the leaving-arc rule, which rules out cycling in exact arithmetic.
//!
//! Real arcs are implicit: arc `e` joins source `e / m` to target `e % m`.

use super::{DiscreteOtProblem, OtError, PlanEntry, TransportPlan};

const NONE: usize = usize::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;
/// Potentials are recomputed from the tree this often to flush drift.
const REFRESH_EVERY: usize = 1024;

/// Entering-arc selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Most negative reduced cost over all arcs.
    Dantzig,
    /// Most negative reduced cost within a rotating block of about
    /// `sqrt(n·m)` arcs; the first block holding a candidate wins.
    BlockSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub pivot_rule: PivotRule,
    /// After this many pivots the solver switches to Bland's rule
    /// (lowest-index eligible arc). `None` picks a size-based default.
    pub bland_after: Option<usize>,
    /// Hard stop; `None` picks a size-based default.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::BlockSearch,
            bland_after: None,
            max_pivots: None,
        }
    }
}

/// Solves the transport problem exactly with the default options.
pub fn solve_exact(problem: &DiscreteOtProblem) -> Result<TransportPlan, OtError> {
    solve_exact_with(problem, &SimplexOptions::default())
}

pub fn solve_exact_with(
    problem: &DiscreteOtProblem,
    options: &SimplexOptions,
) -> Result<TransportPlan, OtError> {
    let n = problem.n();
    let m = problem.m();
    let cost = problem.cost().as_slice();
    if n == 1 || m == 1 {
        return Ok(trivial_plan(n, m, cost));
    }
    let mut solver = Simplex::new(n, m, cost, options);
    solver.run()?;
    Ok(solver.into_plan())
}

/// With a single source or target the only feasible coupling is the product.
fn trivial_plan(n: usize, m: usize, cost: &[f64]) -> TransportPlan {
    let mass = 1.0 / (n * m) as f64;
    let entries = (0..n * m)
        .map(|e| PlanEntry {
            i: e / m,
            j: e % m,
            mass,
        })
        .collect();
    let objective = cost.iter().sum::<f64>() / (n * m) as f64;
    TransportPlan {
        n,
        m,
        entries,
        objective,
        approximation: None,
    }
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    node_num: usize,
    root: usize,
    art_cost: f64,
    tol: f64,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    pred_flow: Vec<i64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    in_tree: Vec<bool>,
    dirty_revs: Vec<usize>,

    rule: PivotRule,
    block_size: usize,
    next_arc: usize,
    bland_after: usize,
    max_pivots: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

impl<'a> Simplex<'a> {
    fn new(n: usize, m: usize, cost: &'a [f64], options: &SimplexOptions) -> Self {
        let node_num = n + m;
        let root = node_num;
        let arcs = n * m;
        let max_abs = cost.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let art_cost = (max_abs + 1.0) * node_num as f64;
        let tol = 1e-12 * max_abs;

        let mut s = Self {
            n,
            m,
            cost,
            node_num,
            root,
            art_cost,
            tol,
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![UP; node_num + 1],
            pred_flow: vec![0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![1; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            in_tree: vec![false; arcs],
            dirty_revs: Vec::new(),
            rule: options.pivot_rule,
            block_size: match options.pivot_rule {
                PivotRule::Dantzig => arcs,
                PivotRule::BlockSearch => ((arcs as f64).sqrt().ceil() as usize).max(10).min(arcs),
            },
            next_arc: 0,
            bland_after: options
                .bland_after
                .unwrap_or_else(|| (1000 * node_num).max(1_000_000)),
            max_pivots: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };
        s.max_pivots = options
            .max_pivots
            .unwrap_or_else(|| (1000 * node_num).max(1_000_000).saturating_mul(50));

        // Artificial basis: every node hangs off the root. Sources send their
        // supply up at zero cost, targets receive their demand at big-M cost.
        let supply_src = m as i64;
        let demand_tgt = n as i64;
        for u in 0..node_num {
            s.parent[u] = root;
            s.pred[u] = arcs + u;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            if u < n {
                s.pred_dir[u] = UP;
                s.pred_flow[u] = supply_src;
                s.pi[u] = 0.0;
            } else {
                s.pred_dir[u] = DOWN;
                s.pred_flow[u] = demand_tgt;
                s.pi[u] = art_cost;
            }
        }
        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;
        s
    }

    #[inline]
    fn arcs(&self) -> usize {
        self.n * self.m
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arcs() {
            e / self.m
        } else {
            let u = e - self.arcs();
            if u < self.n {
                u
            } else {
                self.root
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arcs() {
            self.n + e % self.m
        } else {
            let u = e - self.arcs();
            if u < self.n {
                self.root
            } else {
                u
            }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arcs() {
            self.cost[e]
        } else if e - self.arcs() < self.n {
            0.0
        } else {
            self.art_cost
        }
    }

    fn run(&mut self) -> Result<(), OtError> {
        let mut pivots = 0usize;
        loop {
            let found = if pivots >= self.bland_after {
                self.find_entering_bland()
            } else {
                self.find_entering_block()
            };
            if !found {
                // Confirm optimality against freshly computed potentials.
                self.refresh_potentials();
                let again = if pivots >= self.bland_after {
                    self.find_entering_bland()
                } else {
                    self.find_entering_block()
                };
                if !again {
                    break;
                }
            }
            pivots += 1;
            if pivots > self.max_pivots {
                return Err(OtError::PivotLimit(self.max_pivots));
            }
            if pivots == self.bland_after {
                log::warn!("network simplex: switching to Bland's rule after {pivots} pivots");
            }
            self.find_join_node();
            self.find_leaving_arc();
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            if pivots % REFRESH_EVERY == 0 {
                self.refresh_potentials();
            }
        }
        debug_assert!(
            (0..self.node_num)
                .filter(|&u| self.pred[u] >= self.arcs())
                .all(|u| self.pred_flow[u] == 0),
            "artificial flow left at optimum"
        );
        log::debug!(
            "network simplex: {}x{} solved in {pivots} pivots",
            self.n,
            self.m
        );
        Ok(())
    }

    /// Block search (or Dantzig when the block spans every arc). Scans row
    /// segments so the inner loop is a plain slice traversal.
    fn find_entering_block(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        let total = n * m;
        let pi_tgt = &self.pi[n..n + m];
        let mut best = -self.tol;
        let mut found = NONE;
        let mut e = self.next_arc;
        let mut scanned = 0;
        let mut in_block = 0;
        while scanned < total {
            let i = e / m;
            let j0 = e - i * m;
            let seg = (m - j0).min(self.block_size - in_block).min(total - scanned);
            let row = &self.cost[e..e + seg];
            let pis = &pi_tgt[j0..j0 + seg];
            let pi_i = self.pi[i];
            for (k, (&c, &p)) in row.iter().zip(pis).enumerate() {
                let r = c + pi_i - p;
                if r < best && !self.in_tree[e + k] {
                    best = r;
                    found = e + k;
                }
            }
            e += seg;
            if e == total {
                e = 0;
            }
            scanned += seg;
            in_block += seg;
            if in_block == self.block_size {
                if found != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = if self.rule == PivotRule::Dantzig { 0 } else { e };
        true
    }

    fn find_entering_bland(&mut self) -> bool {
        let n = self.n;
        for e in 0..self.arcs() {
            if self.in_tree[e] {
                continue;
            }
            let (i, j) = (e / self.m, e % self.m);
            if self.cost[e] + self.pi[i] - self.pi[n + j] < -self.tol {
                self.in_arc = e;
                return true;
            }
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Picks the blocking tree arc. Ties go to the last blocking arc met when
    /// walking the cycle in flow direction, which keeps the tree strongly
    /// feasible.
    fn find_leaving_arc(&mut self) {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = i64::MAX;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP && self.pred_flow[u] < delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN && self.pred_flow[u] <= delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        debug_assert!(result != 0, "transport cycles are always bounded");
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pred_flow[u] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.pred_flow[u] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        self.in_tree[self.in_arc] = true;
        let leaving = self.pred[self.u_out];
        if leaving < self.arcs() {
            self.in_tree[leaving] = false;
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let in_flow = self.delta;
        let in_dir = if u_in == self.source(in_arc) { UP } else { DOWN };

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = in_flow;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem between u_in and u_out, reversing parents.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift pred arcs (and their flows) one step along the reversed stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pred_flow[u] = self.pred_flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = in_flow;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes every potential from the tree in thread (preorder) order.
    /// Once a single artificial arc links the root to the rest of the tree the
    /// big-M offset is dropped, since it cancels in every real reduced cost.
    fn refresh_potentials(&mut self) {
        let root = self.root;
        let first = self.thread[root];
        let single_child = first != root && self.succ_num[first] == self.node_num;
        self.pi[root] = 0.0;
        let mut u = first;
        while u != root {
            if single_child && u == first {
                self.pi[u] = 0.0;
            } else {
                let p = self.parent[u];
                self.pi[u] = self.pi[p] - self.pred_dir[u] as f64 * self.arc_cost(self.pred[u]);
            }
            u = self.thread[u];
        }
    }

    fn into_plan(self) -> TransportPlan {
        let scale = (self.n * self.m) as f64;
        let mut entries: Vec<PlanEntry> = (0..self.node_num)
            .filter(|&u| self.pred[u] < self.arcs() && self.pred_flow[u] > 0)
            .map(|u| {
                let e = self.pred[u];
                PlanEntry {
                    i: e / self.m,
                    j: e % self.m,
                    mass: self.pred_flow[u] as f64 / scale,
                }
            })
            .collect();
        entries.sort_by_key(|e| (e.i, e.j));
        let weighted: f64 = (0..self.node_num)
            .filter(|&u| self.pred[u] < self.arcs() && self.pred_flow[u] > 0)
            .map(|u| self.pred_flow[u] as f64 * self.cost[self.pred[u]])
            .sum();
        TransportPlan {
            n: self.n,
            m: self.m,
            entries,
            objective: weighted / scale,
            approximation: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::DenseMatrix;

    fn problem(rows: &[Vec<f64>]) -> DiscreteOtProblem {
        DiscreteOtProblem::from_rows(rows).unwrap()
    }

    #[test]
    fn one_by_one() {
        let plan = solve_exact(&problem(&[vec![0.0]])).unwrap();
        assert_eq!(plan.entries, vec![PlanEntry { i: 0, j: 0, mass: 1.0 }]);
        assert_eq!(plan.objective, 0.0);
    }

    #[test]
    fn anti_diagonal_cost_picks_diagonal() {
        let plan = solve_exact(&problem(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert_eq!(plan.objective, 0.0);
        assert_eq!(
            plan.entries,
            vec![
                PlanEntry { i: 0, j: 0, mass: 0.5 },
                PlanEntry { i: 1, j: 1, mass: 0.5 }
            ]
        );
    }

    #[test]
    fn unequal_sizes_meet_marginals() {
        let cost = DenseMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let plan = solve_exact(&DiscreteOtProblem::new(cost).unwrap()).unwrap();
        for r in plan.row_sums() {
            assert!((r - 1.0 / 3.0).abs() < 1e-12);
        }
        for c in plan.col_sums() {
            assert!((c - 0.2).abs() < 1e-12);
        }
        assert!(plan.support_size() <= 3 + 5 - 1);
    }

    #[test]
    fn single_row_is_product_coupling() {
        let plan = solve_exact(&problem(&[vec![1.0, 2.0, 6.0]])).unwrap();
        assert_eq!(plan.entries.len(), 3);
        assert!((plan.objective - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rules_agree_on_objective() {
        let cost = DenseMatrix::from_fn(9, 7, |i, j| ((i * 31 + j * 17) % 11) as f64 - 3.0);
        let p = DiscreteOtProblem::new(cost).unwrap();
        let block = solve_exact(&p).unwrap().objective;
        for opts in [
            SimplexOptions {
                pivot_rule: PivotRule::Dantzig,
                ..Default::default()
            },
            SimplexOptions {
                bland_after: Some(0),
                ..Default::default()
            },
        ] {
            let other = solve_exact_with(&p, &opts).unwrap().objective;
            assert!((block - other).abs() < 1e-12, "{block} vs {other}");
        }
    }

    #[test]
    fn pivot_limit_is_reported() {
        let cost = DenseMatrix::from_fn(6, 6, |i, j| ((i + 2 * j) % 5) as f64);
        let p = DiscreteOtProblem::new(cost).unwrap();
        let opts = SimplexOptions {
            max_pivots: Some(1),
            ..Default::default()
        };
        assert_eq!(solve_exact_with(&p, &opts), Err(OtError::PivotLimit(1)));
    }
}
