//! Plug-in estimator of the penalized transport bound.
//!
//! For one η: build `H = ±h + η‖Δz‖²` between the two arms, solve the
//! transport problem, and report `Σ π·h` under the optimal plan. The penalty
//! is used to pick the plan, never reported as part of the bound.

mod rate;

pub use rate::{fit_loglog_slope, rate_diagnostic, rate_errors, replicate_seed, summarize, RateReport, RateRow};

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{build_mirror_matrix, negate, sq_dist, standardize_covariates, CostSpec, EtaGrid};
use crate::ot::{solve_exact_with, solve_sinkhorn, DiscreteOtProblem, SimplexOptions, SinkhornOptions, TransportPlan};
use crate::sample::{Group, ObservedSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Exact(SimplexOptions),
    Sinkhorn(SinkhornOptions),
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Exact(SimplexOptions::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    pub solver: Solver,
    /// Standardize each covariate on the pooled sample before penalizing.
    pub standardize_z: bool,
}

/// One side of the bound at one η.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEstimate {
    pub eta: f64,
    pub side: Side,
    /// `Σ π·h`.
    pub value: f64,
    /// `Σ π·η‖Δz‖²`.
    pub penalty: f64,
    /// `Σ π·‖Δz‖²`, the covariate mismatch of the plan.
    pub mismatch: f64,
    pub plan: TransportPlan,
}

/// Lower and upper bounds at one η.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PIBound {
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_penalty: f64,
    pub upper_penalty: f64,
    pub plan_support_lower: usize,
    pub plan_support_upper: usize,
}

/// Control and treated arms in input order.
pub fn split_groups(sample: &ObservedSample) -> Result<(Group, Group)> {
    sample.split()
}

/// Splits and, if requested, standardizes covariates.
pub fn prepare_groups(sample: &ObservedSample, options: &EstimatorOptions) -> Result<(Group, Group)> {
    let (mut g0, mut g1) = split_groups(sample)?;
    if options.standardize_z {
        standardize_covariates(&mut g0, &mut g1);
    }
    Ok((g0, g1))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::EtaNegative(eta))
    }
}

/// Bound for already split arms.
pub fn estimate_groups(
    g0: &Group,
    g1: &Group,
    spec: &CostSpec,
    eta: f64,
    side: Side,
    solver: &Solver,
) -> Result<BoundEstimate> {
    check_eta(eta)?;
    let solved_spec = match side {
        Side::Lower => spec.clone(),
        Side::Upper => negate(spec),
    };
    let cost = build_mirror_matrix(&solved_spec, eta, g0, g1)?;
    let problem = DiscreteOtProblem::new(cost)?;
    let plan = match solver {
        Solver::Exact(opts) => solve_exact_with(&problem, opts)?,
        Solver::Sinkhorn(opts) => solve_sinkhorn(&problem, opts)?,
    };
    let value = plan.evaluate_with(|i, j| spec.eval_unchecked(g0.y(i), g1.y(j)));
    let mismatch = plan.evaluate_with(|i, j| sq_dist(g0.z(i), g1.z(j)));
    Ok(BoundEstimate {
        eta,
        side,
        value,
        penalty: eta * mismatch,
        mismatch,
        plan,
    })
}

/// One side of the penalized bound for `E[h(Y(0), Y(1))]` at penalty `eta`.
pub fn estimate_bound(
    sample: &ObservedSample,
    spec: &CostSpec,
    eta: f64,
    side: Side,
    options: &EstimatorOptions,
) -> Result<BoundEstimate> {
    check_eta(eta)?;
    let (g0, g1) = prepare_groups(sample, options)?;
    estimate_groups(&g0, &g1, spec, eta, side, &options.solver)
}

fn pair(g0: &Group, g1: &Group, spec: &CostSpec, eta: f64, solver: &Solver) -> Result<PIBound> {
    let lo = estimate_groups(g0, g1, spec, eta, Side::Lower, solver)?;
    let hi = estimate_groups(g0, g1, spec, eta, Side::Upper, solver)?;
    Ok(PIBound {
        eta,
        lower: lo.value,
        upper: hi.value,
        lower_penalty: lo.penalty,
        upper_penalty: hi.penalty,
        plan_support_lower: lo.plan.support_size(),
        plan_support_upper: hi.plan.support_size(),
    })
}

/// Lower and upper bounds for every η of the grid, in grid order.
pub fn sweep(
    sample: &ObservedSample,
    spec: &CostSpec,
    grid: &EtaGrid,
    options: &EstimatorOptions,
) -> Result<Vec<PIBound>> {
    let (g0, g1) = prepare_groups(sample, options)?;
    spec.check_dim(g0.dy())?;
    grid.values()
        .par_iter()
        .map(|&eta| pair(&g0, &g1, spec, eta, &options.solver))
        .collect()
}

/// A single side for every η of the grid, in grid order.
pub fn sweep_side(
    sample: &ObservedSample,
    spec: &CostSpec,
    grid: &EtaGrid,
    side: Side,
    options: &EstimatorOptions,
) -> Result<Vec<BoundEstimate>> {
    let (g0, g1) = prepare_groups(sample, options)?;
    spec.check_dim(g0.dy())?;
    grid.values()
        .par_iter()
        .map(|&eta| estimate_groups(&g0, &g1, spec, eta, side, &options.solver))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::solve_exact;

    fn sample(rows: &[(u8, f64, f64)]) -> ObservedSample {
        ObservedSample::from_rows(rows.iter().map(|&(w, y, z)| (w, [y], [z]))).unwrap()
    }

    #[test]
    fn single_pair_is_h() {
        let s = sample(&[(0, 0.5, 1.0), (1, 2.0, -3.0)]);
        for eta in [0.0, 1.0, 1e6] {
            for side in [Side::Lower, Side::Upper] {
                let b = estimate_bound(&s, &CostSpec::SqSum, eta, side, &Default::default()).unwrap();
                assert_eq!(b.value, 6.25);
                assert_eq!(b.mismatch, 16.0);
            }
        }
    }

    #[test]
    fn eta_zero_matches_plain_transport() {
        let s = sample(&[(0, 0.1, 0.0), (1, 1.0, 5.0), (0, -2.0, 1.0), (1, 0.3, 2.0), (1, 0.7, 0.0)]);
        let b = estimate_bound(&s, &CostSpec::SqDiff, 0.0, Side::Lower, &Default::default()).unwrap();
        let (g0, g1) = s.split().unwrap();
        let h = build_mirror_matrix(&CostSpec::SqDiff, 0.0, &g0, &g1).unwrap();
        let direct = solve_exact(&DiscreteOtProblem::new(h).unwrap()).unwrap();
        assert!((b.value - direct.objective).abs() < 1e-12);
        assert_eq!(b.penalty, 0.0);
    }

    #[test]
    fn split_keeps_order() {
        let s = sample(&[(0, 1.0, 0.0), (1, 2.0, 0.0), (0, 3.0, 0.0)]);
        let (g0, g1) = split_groups(&s).unwrap();
        assert_eq!(g0.y(0), &[1.0]);
        assert_eq!(g0.y(1), &[3.0]);
        assert_eq!(g1.y(0), &[2.0]);
    }

    #[test]
    fn rejects_negative_eta() {
        let s = sample(&[(0, 1.0, 0.0), (1, 2.0, 0.0)]);
        assert!(matches!(
            estimate_bound(&s, &CostSpec::SqSum, -1.0, Side::Lower, &Default::default()),
            Err(Error::EtaNegative(_))
        ));
    }

    #[test]
    fn sweep_preserves_grid_order() {
        let s = sample(&[(0, 1.0, 0.0), (1, -1.0, 1.0), (0, 0.0, 1.0), (1, 2.0, 0.0)]);
        let grid = EtaGrid::new(vec![0.0, 0.5, 3.0, 100.0]).unwrap();
        let out = sweep(&s, &CostSpec::SqSum, &grid, &Default::default()).unwrap();
        let etas: Vec<f64> = out.iter().map(|b| b.eta).collect();
        assert_eq!(etas, grid.values());
        for b in &out {
            assert!(b.lower <= b.upper + 1e-9);
        }
    }
}
