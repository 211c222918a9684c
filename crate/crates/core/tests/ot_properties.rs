mod common;

use mirror_ot_core::ot::{
    evaluate_plan, solve_exact, solve_exact_with, solve_sinkhorn, PivotRule, SimplexOptions, SinkhornOptions,
};
use mirror_ot_core::{DenseMatrix, DiscreteOtProblem, TransportPlan};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cost(seed: u64, n: usize, m: usize) -> DenseMatrix {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(n, m, |_, _| r.random_range(-5.0..5.0))
}

fn solve(cost: &DenseMatrix) -> TransportPlan {
    solve_exact(&DiscreteOtProblem::new(cost.clone()).unwrap()).unwrap()
}

fn assert_feasible(plan: &TransportPlan, tol: f64) {
    for r in plan.row_sums() {
        assert!((r - 1.0 / plan.n as f64).abs() <= tol, "row sum {r}");
    }
    for c in plan.col_sums() {
        assert!((c - 1.0 / plan.m as f64).abs() <= tol, "col sum {c}");
    }
    assert!((plan.total_mass() - 1.0).abs() <= tol);
}

#[test]
fn brute_force_on_hand_instances() {
    assert_eq!(common::brute_force_vertices(&[vec![0, 1], vec![1, 0]]), 0);
    assert_eq!(common::brute_force_vertices(&[vec![3], vec![5]]), 8);
    assert_eq!(
        common::brute_force_vertices(&[vec![1, 9, 9], vec![9, 1, 9], vec![9, 9, 1]]),
        9
    );
}

#[test]
fn fixed_three_by_two_matches_vertex_enumeration() {
    let cost = vec![vec![4, 7], vec![2, 9], vec![8, 1]];
    let dense = DenseMatrix::from_fn(3, 2, |i, j| cost[i][j] as f64);
    let plan = solve(&dense);
    assert_eq!(plan.objective, common::brute_force_vertices(&cost) as f64 / 6.0);
}

#[test]
fn basic_solutions_on_mid_sized_problems() {
    for (seed, (n, m)) in [(7, 30), (25, 25), (40, 13), (1, 17), (64, 64)].into_iter().enumerate() {
        let cost = random_cost(seed as u64, n, m);
        let plan = solve(&cost);
        assert_feasible(&plan, 1e-12);
        assert!(plan.support_size() <= n + m - 1);
        let direct = evaluate_plan(&plan, &cost).unwrap();
        assert!((direct - plan.objective).abs() <= 1e-9 * plan.objective.abs().max(1.0));
    }
}

#[test]
fn row_permutation_equivariance() {
    let (n, m) = (12, 9);
    let cost = random_cost(3, n, m);
    let perm: Vec<usize> = (0..n).map(|i| (i * 5 + 3) % n).collect();
    let permuted = DenseMatrix::from_fn(n, m, |i, j| cost.get(perm[i], j));
    let a = solve(&cost);
    let b = solve(&permuted);
    assert!((a.objective - b.objective).abs() <= 1e-9 * a.objective.abs().max(1.0));
    // Continuous random costs have a unique optimum, so plans correspond.
    let dense_a = a.to_dense();
    let dense_b = b.to_dense();
    for i in 0..n {
        for j in 0..m {
            assert!((dense_b.get(i, j) - dense_a.get(perm[i], j)).abs() < 1e-12);
        }
    }
}

#[test]
fn scaling_and_shift() {
    let cost = random_cost(11, 15, 20);
    let base = solve(&cost);
    for c in [0.5, 3.0, 1e3] {
        let scaled = cost.map(|v| v * c);
        let opt = solve(&scaled);
        assert!((opt.objective - c * base.objective).abs() <= 1e-9 * opt.objective.abs().max(1.0));
        let reused = evaluate_plan(&base, &scaled).unwrap();
        assert!((reused - opt.objective).abs() <= 1e-9 * opt.objective.abs().max(1.0));
    }
    for c in [-4.0, 2.5, 100.0] {
        let shifted = solve(&cost.map(|v| v + c));
        assert!((shifted.objective - (base.objective + c)).abs() <= 1e-9 * shifted.objective.abs().max(1.0));
    }
}

#[test]
fn sinkhorn_sandwich_tightens_with_epsilon() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let cost = DenseMatrix::from_fn(20, 15, |_, _| r.random_range(0.0..1.0));
    let exact = solve(&cost).objective;
    let mut prev = f64::INFINITY;
    for eps in [1.0, 0.1, 0.01] {
        let opts = SinkhornOptions {
            epsilon: eps,
            max_iters: 200_000,
            tol: 1e-10,
        };
        let plan = solve_sinkhorn(&DiscreteOtProblem::new(cost.clone()).unwrap(), &opts).unwrap();
        assert!(!plan.is_exact());
        assert!(plan.approximation.unwrap().converged);
        assert_feasible(&plan, 1e-9);
        let gap = evaluate_plan(&plan, &cost).unwrap() - exact;
        assert!(gap >= -1e-8, "eps {eps}: gap {gap}");
        assert!(gap <= prev + 1e-12, "eps {eps}: gap {gap} after {prev}");
        prev = gap;
    }
    assert!(prev < 0.05);
}

#[test]
fn size_cap_is_enforced() {
    let cost = DenseMatrix::zeros(20, 20);
    assert!(DiscreteOtProblem::with_cap(cost.clone(), 399).is_err());
    assert!(DiscreteOtProblem::with_cap(cost, 400).is_ok());
}

#[test]
fn non_finite_cost_rejected() {
    let mut cost = DenseMatrix::zeros(2, 2);
    cost.set(1, 0, f64::NAN);
    assert!(DiscreteOtProblem::new(cost).is_err());
}

fn small_integer_instance() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| proptest::collection::vec(proptest::collection::vec(0i64..=9, m), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn all_pivot_rules_reach_the_vertex_optimum(cost in small_integer_instance()) {
        let (n, m) = (cost.len(), cost[0].len());
        let expected = common::brute_force_vertices(&cost) as f64 / (n * m) as f64;
        let problem = DiscreteOtProblem::new(DenseMatrix::from_fn(n, m, |i, j| cost[i][j] as f64)).unwrap();
        for opts in [
            SimplexOptions::default(),
            SimplexOptions { pivot_rule: PivotRule::Dantzig, ..Default::default() },
            SimplexOptions { bland_after: Some(0), ..Default::default() },
        ] {
            let plan = solve_exact_with(&problem, &opts).unwrap();
            prop_assert_eq!(plan.objective, expected);
            prop_assert!(plan.support_size() <= n + m - 1);
        }
    }
}
