//! Location (`Y = f(Z) + ε`) and scale (`Y = f(Z) ⊙ ε`) models with Gaussian
//! noise, and their conditional transport bound for `‖y0 + y1‖²`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{bures_term, sqrt_spd};
use super::{matrix_from_rows, matrix_to_rows, GaussianLinearSpec, OracleError};

const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Additive noise.
    Location,
    /// Coordinate-wise multiplicative noise.
    Scale,
}

/// Law of each covariate coordinate (coordinates are independent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    #[default]
    StandardNormal,
    Uniform { low: f64, high: f64 },
}

impl CovariateLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            CovariateLaw::StandardNormal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            CovariateLaw::Uniform { low, high } => {
                out.iter_mut().for_each(|v| *v = low + (high - low) * rng.random::<f64>())
            }
        }
    }
}

/// `f(z)_j = c_j + Σ_l L_jl z_l + Σ_l Q_jl z_l²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateMap {
    pub intercept: Vec<f64>,
    pub linear: Vec<Vec<f64>>,
    #[serde(default)]
    pub quadratic: Vec<Vec<f64>>,
}

impl CovariateMap {
    /// Scalar `c + b·z + q·z²`.
    pub fn scalar(c: f64, b: f64, q: f64) -> Self {
        Self {
            intercept: vec![c],
            linear: vec![vec![b]],
            quadratic: vec![vec![q]],
        }
    }

    /// `z ↦ βz`.
    pub fn linear_from(beta: &DMatrix<f64>) -> Self {
        Self {
            intercept: vec![0.0; beta.nrows()],
            linear: matrix_to_rows(beta),
            quadratic: Vec::new(),
        }
    }

    pub fn dy(&self) -> usize {
        self.intercept.len()
    }

    pub fn dz(&self) -> usize {
        self.linear.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), OracleError> {
        let (dy, dz) = (self.dy(), self.dz());
        let bad = |msg: &str| Err(OracleError::InvalidModel(msg.to_string()));
        if dy == 0 || dz == 0 {
            return bad("covariate map needs at least one outcome and one covariate");
        }
        if self.linear.len() != dy || self.linear.iter().any(|r| r.len() != dz) {
            return bad("linear coefficients must be dY x dZ");
        }
        if !self.quadratic.is_empty()
            && (self.quadratic.len() != dy || self.quadratic.iter().any(|r| r.len() != dz))
        {
            return bad("quadratic coefficients must be dY x dZ");
        }
        let all = self
            .intercept
            .iter()
            .chain(self.linear.iter().flatten())
            .chain(self.quadratic.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite);
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, z: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut v = self.intercept[j];
            for (l, zl) in z.iter().enumerate() {
                v += self.linear[j][l] * zl;
                if !self.quadratic.is_empty() {
                    v += self.quadratic[j][l] * zl * zl;
                }
            }
            *o = v;
        }
    }

    fn quad(&self, j: usize, l: usize) -> f64 {
        if self.quadratic.is_empty() {
            0.0
        } else {
            self.quadratic[j][l]
        }
    }

    fn sum(&self, other: &Self) -> Self {
        let dz = self.dz();
        Self {
            intercept: self.intercept.iter().zip(&other.intercept).map(|(a, b)| a + b).collect(),
            linear: (0..self.dy())
                .map(|j| (0..dz).map(|l| self.linear[j][l] + other.linear[j][l]).collect())
                .collect(),
            quadratic: (0..self.dy())
                .map(|j| (0..dz).map(|l| self.quad(j, l) + other.quad(j, l)).collect())
                .collect(),
        }
    }

    /// `E‖f(Z)‖²` for `Z ~ N(0, I)`: each coordinate has mean
    /// `c_j + Σ_l Q_jl` and variance `Σ_l L_jl² + 2 Σ_l Q_jl²`.
    fn second_moment_std_normal(&self) -> f64 {
        (0..self.dy())
            .map(|j| {
                let mean = self.intercept[j] + (0..self.dz()).map(|l| self.quad(j, l)).sum::<f64>();
                let var: f64 = (0..self.dz())
                    .map(|l| self.linear[j][l].powi(2) + 2.0 * self.quad(j, l).powi(2))
                    .sum();
                mean * mean + var
            })
            .sum()
    }
}

/// `Y(k) = G(fk(Z), εk)` with `εk ~ N(0, Σk)` and independent covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScaleSpec {
    pub kind: ModelKind,
    pub f0: CovariateMap,
    pub f1: CovariateMap,
    pub sigma0: DMatrix<f64>,
    pub sigma1: DMatrix<f64>,
    pub covariates: CovariateLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationScaleJson {
    kind: ModelKind,
    f0: CovariateMap,
    f1: CovariateMap,
    sigma0: Vec<Vec<f64>>,
    sigma1: Vec<Vec<f64>>,
    #[serde(default)]
    covariates: CovariateLaw,
}

impl LocationScaleSpec {
    pub fn new(
        kind: ModelKind,
        f0: CovariateMap,
        f1: CovariateMap,
        sigma0: DMatrix<f64>,
        sigma1: DMatrix<f64>,
        covariates: CovariateLaw,
    ) -> Result<Self, OracleError> {
        f0.validate()?;
        f1.validate()?;
        if f0.dy() != f1.dy() || f0.dz() != f1.dz() {
            return Err(OracleError::InvalidModel("f0 and f1 must have the same shape".into()));
        }
        let dy = f0.dy();
        for s in [&sigma0, &sigma1] {
            if s.shape() != (dy, dy) {
                return Err(OracleError::DimensionMismatch {
                    expected: dy,
                    found: s.nrows(),
                });
            }
            sqrt_spd(s)?;
        }
        if let CovariateLaw::Uniform { low, high } = covariates {
            if !(low < high && low.is_finite() && high.is_finite()) {
                return Err(OracleError::InvalidModel("uniform covariate law needs low < high".into()));
            }
        }
        Ok(Self {
            kind,
            f0,
            f1,
            sigma0,
            sigma1,
            covariates,
        })
    }

    pub fn from_linear(spec: &GaussianLinearSpec) -> Self {
        Self {
            kind: ModelKind::Location,
            f0: CovariateMap::linear_from(&spec.beta0),
            f1: CovariateMap::linear_from(&spec.beta1),
            sigma0: spec.sigma0.clone(),
            sigma1: spec.sigma1.clone(),
            covariates: CovariateLaw::StandardNormal,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, crate::Error> {
        let raw: LocationScaleJson = serde_json::from_str(s)?;
        Ok(Self::new(
            raw.kind,
            raw.f0,
            raw.f1,
            matrix_from_rows("sigma0", &raw.sigma0)?,
            matrix_from_rows("sigma1", &raw.sigma1)?,
            raw.covariates,
        )?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(LocationScaleJson {
            kind: self.kind,
            f0: self.f0.clone(),
            f1: self.f1.clone(),
            sigma0: matrix_to_rows(&self.sigma0),
            sigma1: matrix_to_rows(&self.sigma1),
            covariates: self.covariates,
        })
        .expect("numeric model serializes")
    }

    pub fn dy(&self) -> usize {
        self.f0.dy()
    }

    pub fn dz(&self) -> usize {
        self.f0.dz()
    }

    /// Conditional bound `min E[‖Y0 + Y1‖² | Z = z]` for one covariate value.
    pub fn conditional_term(&self, z: &[f64]) -> Result<f64, OracleError> {
        let dy = self.dy();
        let mut a = vec![0.0; dy];
        let mut b = vec![0.0; dy];
        self.f0.eval(z, &mut a);
        self.f1.eval(z, &mut b);
        match self.kind {
            ModelKind::Location => {
                let mean: f64 = a.iter().zip(&b).map(|(x, y)| (x + y) * (x + y)).sum();
                Ok(mean + bures_term(&self.sigma0, &self.sigma1)?)
            }
            ModelKind::Scale => {
                if dy == 1 {
                    let s0 = a[0].abs() * self.sigma0[(0, 0)].max(0.0).sqrt();
                    let s1 = b[0].abs() * self.sigma1[(0, 0)].max(0.0).sqrt();
                    return Ok((s0 - s1) * (s0 - s1));
                }
                let scaled = |f: &[f64], s: &DMatrix<f64>| DMatrix::from_fn(dy, dy, |i, j| f[i] * s[(i, j)] * f[j]);
                bures_term(&scaled(&a, &self.sigma0), &scaled(&b, &self.sigma1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VcMethod {
    /// Closed form when the outer expectation has one, Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VcEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for closed forms.
    pub std_error: f64,
    /// Number of covariate draws; zero for closed forms.
    pub draws: usize,
}

/// Conditional transport bound for `‖y0 + y1‖²` in a Gaussian-noise
/// location or scale model.
///
/// Location: `E_Z‖f0(Z) + f1(Z)‖² + S(Σ0, Σ1)`.
/// Scale: `E_Z S(D(f0(Z)) Σ0 D(f0(Z)), D(f1(Z)) Σ1 D(f1(Z)))`.
/// The inner terms are exact; the outer expectation is exact for location
/// models with standard normal covariates under [`VcMethod::Auto`] and a
/// seeded Monte Carlo average otherwise.
pub fn v_c_location_scale(
    spec: &LocationScaleSpec,
    method: VcMethod,
    mc_draws: usize,
    seed: u64,
) -> Result<VcEstimate, OracleError> {
    if method == VcMethod::Auto
        && spec.kind == ModelKind::Location
        && spec.covariates == CovariateLaw::StandardNormal
    {
        let value = spec.f0.sum(&spec.f1).second_moment_std_normal() + bures_term(&spec.sigma0, &spec.sigma1)?;
        return Ok(VcEstimate {
            value,
            std_error: 0.0,
            draws: 0,
        });
    }
    if mc_draws == 0 {
        return Err(OracleError::InvalidModel("Monte Carlo needs at least one draw".into()));
    }
    // Validate the inner term once so the parallel loop cannot fail midway.
    spec.conditional_term(&vec![0.0; spec.dz()])?;

    let chunks = mc_draws.div_ceil(MC_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(mc_draws - c * MC_CHUNK);
            let mut z = vec![0.0; spec.dz()];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                spec.covariates.sample(&mut rng, &mut z);
                let v = spec
                    .conditional_term(&z)
                    .expect("inner term validated before sampling");
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = mc_draws as f64;
    let mean = sum / n;
    let var = if mc_draws > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(VcEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        draws: mc_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn location(f0: CovariateMap, f1: CovariateMap, s0: f64, s1: f64) -> LocationScaleSpec {
        LocationScaleSpec::new(ModelKind::Location, f0, f1, one(s0), one(s1), CovariateLaw::StandardNormal)
            .unwrap()
    }

    #[test]
    fn zero_maps_give_bures_only() {
        let zero = CovariateMap::scalar(0.0, 0.0, 0.0);
        let spec = location(zero.clone(), zero, 4.0, 1.0);
        for method in [VcMethod::Auto, VcMethod::MonteCarlo] {
            let est = v_c_location_scale(&spec, method, 1000, 1).unwrap();
            assert!((est.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_location_closed_form_and_mc() {
        let spec = location(CovariateMap::scalar(0.0, 0.6, 0.0), CovariateMap::scalar(0.0, 1.6, 0.0), 1.0, 1.0);
        let exact = v_c_location_scale(&spec, VcMethod::Auto, 0, 0).unwrap();
        assert!((exact.value - 4.84).abs() < 1e-12);
        assert_eq!(exact.std_error, 0.0);
        let mc = v_c_location_scale(&spec, VcMethod::MonteCarlo, 200_000, 7).unwrap();
        assert!((mc.value - 4.84).abs() < 4.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn quadratic_location_closed_form() {
        // E[(0.8 Z²)²] = 0.64·3.
        let spec = location(CovariateMap::scalar(0.0, 0.0, 0.2), CovariateMap::scalar(0.0, 0.0, 0.6), 1.0, 1.0);
        let exact = v_c_location_scale(&spec, VcMethod::Auto, 0, 0).unwrap();
        assert!((exact.value - 1.92).abs() < 1e-12);
        let mc = v_c_location_scale(&spec, VcMethod::MonteCarlo, 400_000, 3).unwrap();
        assert!((mc.value - 1.92).abs() < 4.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn scale_with_identical_arms_is_zero() {
        let f = CovariateMap::scalar(0.5, 1.1, 0.0);
        let spec = LocationScaleSpec::new(ModelKind::Scale, f.clone(), f, one(2.0), one(2.0), CovariateLaw::StandardNormal)
            .unwrap();
        let est = v_c_location_scale(&spec, VcMethod::Auto, 5000, 11).unwrap();
        assert!(est.value.abs() < 1e-12);
        assert_eq!(est.draws, 5000);
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let spec = LocationScaleSpec::new(
            ModelKind::Scale,
            CovariateMap::scalar(-0.35, 0.5, 0.0),
            CovariateMap::scalar(0.35, 1.1, 0.0),
            one(1.0),
            one(1.0),
            CovariateLaw::StandardNormal,
        )
        .unwrap();
        let a = v_c_location_scale(&spec, VcMethod::Auto, 10_000, 5).unwrap();
        let b = v_c_location_scale(&spec, VcMethod::Auto, 10_000, 5).unwrap();
        let c = v_c_location_scale(&spec, VcMethod::Auto, 10_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn multivariate_scale_matches_diagonal_reduction() {
        // With diagonal Σ the scale model factorizes across coordinates.
        let f0 = CovariateMap {
            intercept: vec![0.1, -0.2],
            linear: vec![vec![0.5], vec![1.0]],
            quadratic: vec![],
        };
        let f1 = CovariateMap {
            intercept: vec![0.3, 0.0],
            linear: vec![vec![-0.4], vec![0.2]],
            quadratic: vec![],
        };
        let s0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let s1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.5]);
        let spec = LocationScaleSpec::new(ModelKind::Scale, f0.clone(), f1.clone(), s0, s1, CovariateLaw::StandardNormal)
            .unwrap();
        let z = [0.7];
        let got = spec.conditional_term(&z).unwrap();
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        f0.eval(&z, &mut a);
        f1.eval(&z, &mut b);
        let expect = (a[0].abs() * 1.0 - b[0].abs() * 0.5f64.sqrt()).powi(2)
            + (a[1].abs() * 2.0f64.sqrt() - b[1].abs() * 1.5f64.sqrt()).powi(2);
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"kind":"scale","f0":{"intercept":[-0.35],"linear":[[0.5]]},
            "f1":{"intercept":[0.35],"linear":[[1.1]]},"sigma0":[[1]],"sigma1":[[1]]}"#;
        let spec = LocationScaleSpec::from_json_str(text).unwrap();
        assert_eq!(spec.kind, ModelKind::Scale);
        assert_eq!(spec.covariates, CovariateLaw::StandardNormal);
        let back = LocationScaleSpec::from_json_str(&spec.to_json_value().to_string()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_mismatched_maps() {
        let f0 = CovariateMap::scalar(0.0, 1.0, 0.0);
        let f1 = CovariateMap {
            intercept: vec![0.0],
            linear: vec![vec![1.0, 2.0]],
            quadratic: vec![],
        };
        assert!(LocationScaleSpec::new(ModelKind::Location, f0, f1, one(1.0), one(1.0), CovariateLaw::StandardNormal)
            .is_err());
    }
}
