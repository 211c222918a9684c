//! Monte Carlo study of the estimator error against the Gaussian closed form.

use rayon::prelude::*;
use serde::Serialize;

use super::{estimate_groups, prepare_groups, EstimatorOptions, Side};
use crate::cost::CostSpec;
use crate::gaussian::{pi_bound_closed, GaussianLinearSpec};
use crate::synthetic::{generate, SynthConfig, SynthModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    /// Per-arm sample size.
    pub n: usize,
    pub mean_abs_error: f64,
    /// Standard error of the mean over seeds.
    pub std_error: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub eta: f64,
    /// Closed-form population value the errors are measured against.
    pub target: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln(mean error)` on `ln(N)`.
    pub slope: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for replicate `rep` at per-arm size `n`.
pub fn replicate_seed(base: u64, n: usize, rep: usize) -> u64 {
    splitmix64(base ^ splitmix64(((n as u64) << 32) ^ rep as u64))
}

/// Absolute errors `|V_ip,N,N(η) − V_ip(η)|`, indexed `[size][replicate]`.
pub fn rate_errors(
    model: &GaussianLinearSpec,
    spec: &CostSpec,
    eta: f64,
    sizes: &[usize],
    seeds: usize,
    base_seed: u64,
    options: &EstimatorOptions,
) -> Result<Vec<Vec<f64>>> {
    if seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("sizes must be positive and strictly increasing".into()));
    }
    let target = pi_bound_closed(model, spec, Side::Lower, eta)?;
    // Largest sizes first so the long jobs start early.
    let jobs: Vec<(usize, usize)> = (0..sizes.len())
        .rev()
        .flat_map(|s| (0..seeds).map(move |r| (s, r)))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let n = sizes[s];
            let sample = generate(&SynthConfig {
                model: SynthModel::Linear(model.clone()),
                n,
                m: n,
                seed: replicate_seed(base_seed, n, r),
            })?;
            let (g0, g1) = prepare_groups(&sample, options)?;
            let est = estimate_groups(&g0, &g1, spec, eta, Side::Lower, &options.solver)?;
            Ok((est.value - target).abs())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![vec![0.0; seeds]; sizes.len()];
    for (&(s, r), e) in jobs.iter().zip(errors) {
        out[s][r] = e;
    }
    Ok(out)
}

/// Ordinary least-squares slope of `ln y` on `ln x`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mean absolute error per size and the fitted log-log slope.
pub fn summarize(eta: f64, target: f64, sizes: &[usize], errors: &[Vec<f64>]) -> RateReport {
    let rows: Vec<RateRow> = sizes
        .iter()
        .zip(errors)
        .map(|(&n, errs)| {
            let k = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / k;
            let var = if errs.len() > 1 {
                errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            RateRow {
                n,
                mean_abs_error: mean,
                std_error: (var / k).sqrt(),
                seeds: errs.len(),
            }
        })
        .collect();
    let slope = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_abs_error).collect();
        fit_loglog_slope(&x, &y)
    } else {
        f64::NAN
    };
    RateReport {
        eta,
        target,
        rows,
        slope,
    }
}

/// Error of the lower bound against its closed form over sizes and seeds.
pub fn rate_diagnostic(
    model: &GaussianLinearSpec,
    spec: &CostSpec,
    eta: f64,
    sizes: &[usize],
    seeds: usize,
    base_seed: u64,
    options: &EstimatorOptions,
) -> Result<RateReport> {
    let errors = rate_errors(model, spec, eta, sizes, seeds, base_seed, options)?;
    let target = pi_bound_closed(model, spec, Side::Lower, eta)?;
    Ok(summarize(eta, target, sizes, &errors))
}
