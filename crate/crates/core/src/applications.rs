//! Downstream uses of the bounds: tightening the Neyman variance estimator
//! and bounding the correlation between potential outcomes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cost::{CostSpec, EtaGrid};
use crate::estimator::{estimate_groups, prepare_groups, EstimatorOptions, Side};
use crate::sample::{Group, ObservedSample};
use crate::{Error, Result};
use rayon::prelude::*;

/// Sample mean vector and variance `Σ‖y − ȳ‖² / (k − 1)`.
fn moments(g: &Group) -> (Vec<f64>, f64) {
    let k = g.len() as f64;
    let mut mean = vec![0.0; g.dy()];
    for (y, _) in g.iter() {
        mean.iter_mut().zip(y).for_each(|(m, v)| *m += v / k);
    }
    let ss: f64 = g
        .iter()
        .map(|(y, _)| y.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    (mean, ss / (k - 1.0))
}

fn require_two(g0: &Group, g1: &Group) -> Result<()> {
    for (group, g) in [(0u8, g0), (1u8, g1)] {
        if g.len() < 2 {
            return Err(Error::GroupTooSmall { group, size: g.len() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeymanRow {
    pub eta: f64,
    /// Lower bound of `E‖Y(1) − Y(0)‖²`.
    pub sq_diff_lower: f64,
    pub s_tau_lb: f64,
    pub v_estimate: f64,
    pub relative_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeymanReport {
    pub n: usize,
    pub m: usize,
    pub s0_sq: f64,
    pub s1_sq: f64,
    pub tau_hat: Vec<f64>,
    pub rows: Vec<NeymanRow>,
}

/// Variance bound `s1²/m + s0²/n − S_τ,lb²/N` for every η, with
/// `S_τ,lb² = max(0, L(η) − ‖τ̂‖²)` and `L(η)` the lower bound of
/// `E‖Y(1) − Y(0)‖²`. The relative sample size is `v(η) / v(0)`.
pub fn neyman_bound(sample: &ObservedSample, grid: &EtaGrid, options: &EstimatorOptions) -> Result<NeymanReport> {
    let (g0, g1) = prepare_groups(sample, options)?;
    require_two(&g0, &g1)?;
    let (n, m) = (g0.len(), g1.len());
    let total = (n + m) as f64;
    let (mean0, s0_sq) = moments(&g0);
    let (mean1, s1_sq) = moments(&g1);
    let tau_hat: Vec<f64> = mean1.iter().zip(&mean0).map(|(a, b)| a - b).collect();
    let tau_sq: f64 = tau_hat.iter().map(|t| t * t).sum();
    let neyman = s1_sq / m as f64 + s0_sq / n as f64;

    let mut etas = grid.values().to_vec();
    let has_zero = etas[0] == 0.0;
    if !has_zero {
        etas.insert(0, 0.0);
    }
    let lowers: Vec<f64> = etas
        .par_iter()
        .map(|&eta| Ok(estimate_groups(&g0, &g1, &CostSpec::SqDiff, eta, Side::Lower, &options.solver)?.value))
        .collect::<Result<_>>()?;
    let v_of = |l: f64| {
        let lb = (l - tau_sq).max(0.0);
        (lb, neyman - lb / total)
    };
    let (_, v0) = v_of(lowers[0]);
    if !(v0 > 0.0) {
        return Err(Error::NonPositiveVariance(v0));
    }
    let skip = usize::from(!has_zero);
    let rows = etas
        .iter()
        .zip(&lowers)
        .skip(skip)
        .map(|(&eta, &l)| {
            let (lb, v) = v_of(l);
            NeymanRow {
                eta,
                sq_diff_lower: l,
                s_tau_lb: lb,
                v_estimate: v,
                relative_sample_size: v / v0,
            }
        })
        .collect();
    Ok(NeymanReport {
        n,
        m,
        s0_sq,
        s1_sq,
        tau_hat,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub eta: f64,
    /// Bounds on `E[Y(0)Y(1)]`.
    pub product_lower: f64,
    pub product_upper: f64,
    pub rho_lower: f64,
    pub rho_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub mean0: f64,
    pub mean1: f64,
    pub var0: f64,
    pub var1: f64,
    pub clamped: bool,
    pub rows: Vec<CorrelationRow>,
}

/// Bounds on `ρ = (E[Y(0)Y(1)] − μ0μ1) / √(s0² s1²)` for scalar outcomes.
/// Values are reported raw unless `clamp` is set, which maps them into
/// `[−1, 1]`.
pub fn correlation_bound(
    sample: &ObservedSample,
    grid: &EtaGrid,
    options: &EstimatorOptions,
    clamp: bool,
) -> Result<CorrelationReport> {
    if sample.dy() != 1 {
        return Err(Error::NonScalarOutcome(sample.dy()));
    }
    let (g0, g1) = prepare_groups(sample, options)?;
    require_two(&g0, &g1)?;
    let (mean0, var0) = moments(&g0);
    let (mean1, var1) = moments(&g1);
    for (group, v) in [(0u8, var0), (1u8, var1)] {
        if !(v > 0.0) {
            return Err(Error::ZeroVariance(group));
        }
    }
    let (mu0, mu1) = (mean0[0], mean1[0]);
    let scale = (var0 * var1).sqrt();
    let rho = |p: f64| {
        let r = (p - mu0 * mu1) / scale;
        if clamp {
            r.clamp(-1.0, 1.0)
        } else {
            r
        }
    };
    let rows = grid
        .values()
        .par_iter()
        .map(|&eta| {
            let lo = estimate_groups(&g0, &g1, &CostSpec::Product, eta, Side::Lower, &options.solver)?.value;
            let hi = estimate_groups(&g0, &g1, &CostSpec::Product, eta, Side::Upper, &options.solver)?.value;
            Ok(CorrelationRow {
                eta,
                product_lower: lo,
                product_upper: hi,
                rho_lower: rho(lo),
                rho_upper: rho(hi),
            })
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationReport {
        mean0: mu0,
        mean1: mu1,
        var0,
        var1,
        clamped: clamp,
        rows,
    })
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(&mut out, header);
    for r in rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

impl NeymanReport {
    /// Aligned text table, one row per η.
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![num(r.eta), num(r.s_tau_lb), num(r.v_estimate), num(r.relative_sample_size)])
            .collect();
        format!(
            "n = {}, m = {}, s0^2 = {}, s1^2 = {}\n{}",
            self.n,
            self.m,
            num(self.s0_sq),
            num(self.s1_sq),
            table(&["eta", "s_tau_lb", "variance", "relative_size"], &rows)
        )
    }
}

impl CorrelationReport {
    /// Aligned text table, one row per η.
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![num(r.eta), num(r.rho_lower), num(r.rho_upper), num(r.rho_upper - r.rho_lower)])
            .collect();
        table(&["eta", "rho_lower", "rho_upper", "length"], &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(rows: &[(u8, f64, f64)]) -> ObservedSample {
        ObservedSample::from_rows(rows.iter().map(|&(w, y, z)| (w, [y], [z]))).unwrap()
    }

    #[test]
    fn conservative_estimator_when_bound_is_loose() {
        // Identical arms: L(0) = 0 ≤ τ̂², so the classic estimator is recovered.
        let s = scalar(&[(0, 1.0, 0.0), (0, 2.0, 1.0), (0, 4.0, 2.0), (1, 1.0, 0.0), (1, 2.0, 1.0), (1, 4.0, 2.0)]);
        let grid = EtaGrid::new(vec![0.0]).unwrap();
        let r = neyman_bound(&s, &grid, &Default::default()).unwrap();
        let s2 = (1.0f64 / 3.0 * ((1.0 - 7.0 / 3.0f64).powi(2) + (2.0 - 7.0 / 3.0f64).powi(2) + (4.0 - 7.0 / 3.0f64).powi(2))) * 1.5;
        assert!((r.s0_sq - s2).abs() < 1e-12);
        assert_eq!(r.rows[0].s_tau_lb, 0.0);
        assert_eq!(r.rows[0].v_estimate, r.s1_sq / 3.0 + r.s0_sq / 3.0);
        assert_eq!(r.rows[0].relative_sample_size, 1.0);
    }

    #[test]
    fn baseline_added_when_grid_skips_zero() {
        let s = scalar(&[(0, 1.0, 0.0), (0, 3.0, 1.0), (1, 5.0, 0.0), (1, 2.0, 1.0)]);
        let grid = EtaGrid::new(vec![1.0, 10.0]).unwrap();
        let r = neyman_bound(&s, &grid, &Default::default()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].eta, 1.0);
        assert!(r.rows.iter().all(|row| row.relative_sample_size <= 1.0 + 1e-12));
    }

    #[test]
    fn small_groups_rejected() {
        let s = scalar(&[(0, 1.0, 0.0), (1, 2.0, 0.0), (1, 3.0, 0.0)]);
        let grid = EtaGrid::new(vec![0.0]).unwrap();
        assert!(matches!(
            neyman_bound(&s, &grid, &Default::default()),
            Err(Error::GroupTooSmall { group: 0, size: 1 })
        ));
    }

    #[test]
    fn equal_marginals_give_full_range() {
        let ys = [-1.5, -0.2, 0.3, 0.9, 2.0];
        let rows: Vec<(u8, f64, f64)> = ys
            .iter()
            .map(|&y| (0, y, 0.0))
            .chain(ys.iter().rev().map(|&y| (1, y, 0.0)))
            .collect();
        let grid = EtaGrid::new(vec![0.0]).unwrap();
        let r = correlation_bound(&scalar(&rows), &grid, &Default::default(), false).unwrap();
        // With the n − 1 variance convention the comonotone value is (k−1)/k.
        assert!((r.rows[0].rho_upper - 0.8).abs() < 1e-12);
        assert!(r.rows[0].rho_lower < -0.5);
    }

    #[test]
    fn correlation_checks() {
        let grid = EtaGrid::new(vec![0.0]).unwrap();
        let constant = scalar(&[(0, 1.0, 0.0), (0, 1.0, 1.0), (1, 2.0, 0.0), (1, 3.0, 1.0)]);
        assert!(matches!(
            correlation_bound(&constant, &grid, &Default::default(), false),
            Err(Error::ZeroVariance(0))
        ));
        let vector = ObservedSample::from_rows([(0u8, [1.0, 2.0], [0.0]), (1, [2.0, 1.0], [0.0])]).unwrap();
        assert!(matches!(
            correlation_bound(&vector, &grid, &Default::default(), false),
            Err(Error::NonScalarOutcome(2))
        ));
    }

    #[test]
    fn tables_have_one_line_per_eta() {
        let s = scalar(&[(0, 1.0, 0.0), (0, 3.0, 1.0), (1, 5.0, 0.0), (1, 2.0, 1.0)]);
        let grid = EtaGrid::new(vec![0.0, 1.0, 10.0]).unwrap();
        let c = correlation_bound(&s, &grid, &Default::default(), true).unwrap();
        assert_eq!(c.to_table().lines().count(), 4);
        let n = neyman_bound(&s, &grid, &Default::default()).unwrap();
        assert_eq!(n.to_table().lines().count(), 5);
    }
}
