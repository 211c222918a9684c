use super::{DiscreteOtProblem, OtError, PlanEntry, SinkhornDiagnostics, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Target L1 marginal deviation.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iters: 10_000,
            tol: 1e-9,
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic transport by log-domain Sinkhorn iterations.
///
/// If the marginal deviation is still above `tol` after `max_iters`
/// iterations, the best iterate seen is returned with
/// `converged = false` in its diagnostics.
pub fn solve_sinkhorn(
    problem: &DiscreteOtProblem,
    options: &SinkhornOptions,
) -> Result<TransportPlan, OtError> {
    let eps = options.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(OtError::InvalidEpsilon(eps));
    }
    let (n, m) = (problem.n(), problem.m());
    let cost = problem.cost();
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let row_error = |f: &[f64], g: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let row = cost.row(i);
                let s: f64 = (0..m).map(|j| ((f[i] + g[j] - row[j]) / eps).exp()).sum();
                (s - 1.0 / n as f64).abs()
            })
            .sum()
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    for it in 1..=options.max_iters.max(1) {
        iterations = it;
        for i in 0..n {
            let row = cost.row(i);
            f[i] = eps * (log_a - log_sum_exp((0..m).map(|j| (g[j] - row[j]) / eps)));
        }
        for j in 0..m {
            g[j] = eps * (log_b - log_sum_exp((0..n).map(|i| (f[i] - cost.get(i, j)) / eps)));
        }
        let err = row_error(&f, &g);
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, f.clone(), g.clone()));
        }
        if err <= options.tol {
            break;
        }
    }
    let (err, f, g) = best.expect("at least one iteration runs");
    let converged = err <= options.tol;
    if !converged {
        log::warn!(
            "sinkhorn did not converge: marginal error {err:.3e} after {iterations} iterations"
        );
    }

    let mut entries = Vec::new();
    let mut objective = 0.0;
    for i in 0..n {
        let row = cost.row(i);
        for j in 0..m {
            let mass = ((f[i] + g[j] - row[j]) / eps).exp();
            if mass > 0.0 {
                objective += mass * row[j];
                entries.push(PlanEntry { i, j, mass });
            }
        }
    }
    Ok(TransportPlan {
        n,
        m,
        entries,
        objective,
        approximation: Some(SinkhornDiagnostics {
            epsilon: eps,
            iterations,
            marginal_error: err,
            converged,
        }),
    })
}
