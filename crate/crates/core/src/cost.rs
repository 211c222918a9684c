//! Outcome costs `h(y0, y1)`, the covariate-penalized cost matrix, and
//! penalty grids.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ot::DenseMatrix;
use crate::sample::Group;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// `h(y0, y1) = y0ᵀA11 y0 + 2 y0ᵀA12 y1 + y1ᵀA22 y1`, blocks stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    dim: usize,
    a11: Vec<f64>,
    a12: Vec<f64>,
    a22: Vec<f64>,
}

/// JSON layout: `{ "a11": [[..]], "a12": [[..]], "a22": [[..]] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticCostJson {
    a11: Vec<Vec<f64>>,
    a12: Vec<Vec<f64>>,
    a22: Vec<Vec<f64>>,
}

fn flatten_square(name: &str, rows: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidCost(format!("block {name} must be {dim}x{dim}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCost(format!("block {name} has non-finite entries")));
    }
    Ok(flat)
}

fn is_symmetric(a: &[f64], dim: usize) -> bool {
    (0..dim).all(|i| (0..i).all(|j| (a[i * dim + j] - a[j * dim + i]).abs() <= SYMMETRY_TOL))
}

impl QuadraticCost {
    pub fn new(a11: Vec<Vec<f64>>, a12: Vec<Vec<f64>>, a22: Vec<Vec<f64>>) -> Result<Self> {
        let dim = a11.len();
        if dim == 0 {
            return Err(Error::InvalidCost("blocks must be non-empty".into()));
        }
        let a11 = flatten_square("a11", &a11, dim)?;
        let a12 = flatten_square("a12", &a12, dim)?;
        let a22 = flatten_square("a22", &a22, dim)?;
        if !is_symmetric(&a11, dim) {
            return Err(Error::InvalidCost("a11 is not symmetric".into()));
        }
        if !is_symmetric(&a22, dim) {
            return Err(Error::InvalidCost("a22 is not symmetric".into()));
        }
        Ok(Self { dim, a11, a12, a22 })
    }

    fn scaled_identity(dim: usize, c11: f64, c12: f64, c22: f64) -> Self {
        let eye = |c: f64| -> Vec<f64> {
            (0..dim * dim)
                .map(|k| if k / dim == k % dim { c } else { 0.0 })
                .collect()
        };
        Self {
            dim,
            a11: eye(c11),
            a12: eye(c12),
            a22: eye(c22),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: QuadraticCostJson = serde_json::from_str(s)?;
        Self::new(raw.a11, raw.a12, raw.a22)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let rows = |a: &[f64]| -> Vec<Vec<f64>> { a.chunks(self.dim).map(<[f64]>::to_vec).collect() };
        let raw = QuadraticCostJson {
            a11: rows(&self.a11),
            a12: rows(&self.a12),
            a22: rows(&self.a22),
        };
        serde_json::to_string(&raw).expect("plain numeric arrays serialize")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a11(&self, i: usize, j: usize) -> f64 {
        self.a11[i * self.dim + j]
    }

    pub fn a12(&self, i: usize, j: usize) -> f64 {
        self.a12[i * self.dim + j]
    }

    pub fn a22(&self, i: usize, j: usize) -> f64 {
        self.a22[i * self.dim + j]
    }

    pub fn negated(&self) -> Self {
        let neg = |a: &[f64]| a.iter().map(|v| -v).collect();
        Self {
            dim: self.dim,
            a11: neg(&self.a11),
            a12: neg(&self.a12),
            a22: neg(&self.a22),
        }
    }

    #[inline]
    fn eval(&self, y0: &[f64], y1: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let (r11, r12, r22) = (
                &self.a11[i * d..(i + 1) * d],
                &self.a12[i * d..(i + 1) * d],
                &self.a22[i * d..(i + 1) * d],
            );
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for j in 0..d {
                s0 += r11[j] * y0[j];
                s1 += r12[j] * y1[j];
                s2 += r22[j] * y1[j];
            }
            acc += y0[i] * (s0 + 2.0 * s1) + y1[i] * s2;
        }
        acc
    }
}

/// User-supplied cost function.
#[derive(Clone)]
pub struct CustomCost {
    name: String,
    func: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl CustomCost {
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for CustomCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCost").field("name", &self.name).finish()
    }
}

/// Outcome cost `h`.
///
/// The presets are dimension-free: `SqSum` is `‖y0 + y1‖²`, `SqDiff` is
/// `‖y0 − y1‖²` and `Product` is `y0·y1`.
#[derive(Debug, Clone)]
pub enum CostSpec {
    SqSum,
    SqDiff,
    Product,
    Quadratic(QuadraticCost),
    Custom(CustomCost),
    Negated(Box<CostSpec>),
}

impl CostSpec {
    /// Checks that the cost accepts outcomes of dimension `dy`.
    pub fn check_dim(&self, dy: usize) -> Result<()> {
        match self {
            CostSpec::Quadratic(q) if q.dim != dy => Err(Error::DimensionMismatch {
                what: "quadratic cost",
                expected: q.dim,
                found: dy,
            }),
            CostSpec::Negated(inner) => inner.check_dim(dy),
            _ => Ok(()),
        }
    }

    /// Evaluates `h(y0, y1)` without dimension checks.
    #[inline]
    pub fn eval_unchecked(&self, y0: &[f64], y1: &[f64]) -> f64 {
        match self {
            CostSpec::SqSum => y0.iter().zip(y1).map(|(a, b)| (a + b) * (a + b)).sum(),
            CostSpec::SqDiff => y0.iter().zip(y1).map(|(a, b)| (a - b) * (a - b)).sum(),
            CostSpec::Product => y0.iter().zip(y1).map(|(a, b)| a * b).sum(),
            CostSpec::Quadratic(q) => q.eval(y0, y1),
            CostSpec::Custom(c) => (c.func)(y0, y1),
            CostSpec::Negated(inner) => -inner.eval_unchecked(y0, y1),
        }
    }

    /// The quadratic blocks behind this cost for outcomes of dimension `dy`,
    /// or `None` for custom functions.
    pub fn to_quadratic(&self, dy: usize) -> Option<QuadraticCost> {
        match self {
            CostSpec::SqSum => Some(QuadraticCost::scaled_identity(dy, 1.0, 1.0, 1.0)),
            CostSpec::SqDiff => Some(QuadraticCost::scaled_identity(dy, 1.0, -1.0, 1.0)),
            CostSpec::Product => Some(QuadraticCost::scaled_identity(dy, 0.0, 0.5, 0.0)),
            CostSpec::Quadratic(q) => Some(q.clone()),
            CostSpec::Custom(_) => None,
            CostSpec::Negated(inner) => inner.to_quadratic(dy).map(|q| q.negated()),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        match self {
            CostSpec::Custom(_) => false,
            CostSpec::Negated(inner) => inner.is_quadratic(),
            _ => true,
        }
    }

    pub fn name(&self) -> String {
        match self {
            CostSpec::SqSum => "sq-sum".into(),
            CostSpec::SqDiff => "sq-diff".into(),
            CostSpec::Product => "product".into(),
            CostSpec::Quadratic(_) => "quadratic".into(),
            CostSpec::Custom(c) => format!("custom:{}", c.name),
            CostSpec::Negated(inner) => format!("-{}", inner.name()),
        }
    }
}

/// Evaluates `h(y0, y1)`.
pub fn eval_cost(spec: &CostSpec, y0: &[f64], y1: &[f64]) -> Result<f64> {
    if y0.len() != y1.len() {
        return Err(Error::DimensionMismatch {
            what: "outcome pair",
            expected: y0.len(),
            found: y1.len(),
        });
    }
    spec.check_dim(y0.len())?;
    Ok(spec.eval_unchecked(y0, y1))
}

/// Cost `−h`. Quadratic blocks are negated in place, negating a negation
/// unwraps it, anything else is wrapped.
pub fn negate(spec: &CostSpec) -> CostSpec {
    match spec {
        CostSpec::Quadratic(q) => CostSpec::Quadratic(q.negated()),
        CostSpec::Negated(inner) => (**inner).clone(),
        other => CostSpec::Negated(Box::new(other.clone())),
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_groups(spec: &CostSpec, g0: &Group, g1: &Group) -> Result<()> {
    if g0.dy() != g1.dy() {
        return Err(Error::DimensionMismatch {
            what: "outcome",
            expected: g0.dy(),
            found: g1.dy(),
        });
    }
    if g0.dz() != g1.dz() {
        return Err(Error::DimensionMismatch {
            what: "covariate",
            expected: g0.dz(),
            found: g1.dz(),
        });
    }
    spec.check_dim(g0.dy())
}

/// `H(j,k) = h(y0_j, y1_k) + η‖z0_j − z1_k‖²`, rows indexed by control units.
pub fn build_mirror_matrix(spec: &CostSpec, eta: f64, g0: &Group, g1: &Group) -> Result<DenseMatrix> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::EtaNegative(eta));
    }
    check_groups(spec, g0, g1)?;
    let (n, m) = (g0.len(), g1.len());
    let mut out = DenseMatrix::zeros(n, m);
    out.as_mut_slice()
        .par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(j, row)| {
            let (y0, z0) = (g0.y(j), g0.z(j));
            for (k, cell) in row.iter_mut().enumerate() {
                let h = spec.eval_unchecked(y0, g1.y(k));
                *cell = if eta == 0.0 {
                    h
                } else {
                    h + eta * sq_dist(z0, g1.z(k))
                };
            }
        });
    if out.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("cost matrix"));
    }
    Ok(out)
}

/// Standardizes each covariate coordinate to mean 0 and variance 1 using the
/// pooled sample of both arms. Constant coordinates are only centered.
pub fn standardize_covariates(g0: &mut Group, g1: &mut Group) {
    let dz = g0.dz();
    let total = (g0.len() + g1.len()) as f64;
    if total == 0.0 {
        return;
    }
    for c in 0..dz {
        let pooled = || {
            g0.iter()
                .map(move |(_, z)| z[c])
                .chain(g1.iter().map(move |(_, z)| z[c]))
        };
        let mean = pooled().sum::<f64>() / total;
        let var = pooled().map(|v| (v - mean) * (v - mean)).sum::<f64>() / total;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        for g in [&mut *g0, &mut *g1] {
            for row in g.z_mut().chunks_mut(dz) {
                row[c] = (row[c] - mean) / scale;
            }
        }
    }
}

/// Strictly increasing list of penalty weights `η ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaGrid(Vec<f64>);

impl EtaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidEtaGrid("grid is empty".into()));
        }
        for &v in &values {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidEtaGrid(format!("{v} is not a finite non-negative value")));
            }
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidEtaGrid("values must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// `count` log-spaced values from `start` to `stop` inclusive.
    pub fn log_spaced(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && stop > start) || count < 2 {
            return Err(Error::InvalidEtaGrid(format!(
                "log range needs 0 < start < stop and count >= 2, got {start}:{stop}:{count}"
            )));
        }
        let (a, b) = (start.ln(), stop.ln());
        let mut values: Vec<f64> = (0..count)
            .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
            .collect();
        values[0] = start;
        values[count - 1] = stop;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for EtaGrid {
    type Err = Error;

    /// Accepts `0,1,10` or a log-spaced range `start:stop:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::InvalidEtaGrid(format!("cannot parse {part:?}"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad(s));
            }
            let start: f64 = parts[0].parse().map_err(|_| bad(parts[0]))?;
            let stop: f64 = parts[1].parse().map_err(|_| bad(parts[1]))?;
            let count: usize = parts[2].parse().map_err(|_| bad(parts[2]))?;
            return Self::log_spaced(start, stop, count);
        }
        let values = s
            .split(',')
            .map(str::trim)
            .map(|p| p.parse::<f64>().map_err(|_| bad(p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}
