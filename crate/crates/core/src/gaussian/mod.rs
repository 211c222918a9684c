//! Closed-form bounds for Gaussian models, used as ground truth for the
//! empirical estimator.
//!
//! For the linear model `Y(k) = βk Z + εk` with `Z ~ N(0, I)` and cost
//! `‖y0 + y1‖²`, the penalized coupling problem is a transport problem
//! between two centered Gaussians on `(y, √η z)`, so its value follows from
//! the Gaussian transport map. Other quadratic presets reduce to this one by
//! flipping the sign of `Y(1)` and/or rescaling `η`.

mod linalg;
mod location_scale;

pub use linalg::{bures_term, gaussian_ot_map, sqrt_psd_eigen, sqrt_spd, PSD_TOL};
pub use location_scale::{
    v_c_location_scale, CovariateLaw, CovariateMap, LocationScaleSpec, ModelKind, VcEstimate,
    VcMethod,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostSpec;
use crate::estimator::Side;
use linalg::symmetrize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("matrix is indefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteInput { min_eigenvalue: f64 },
    #[error("source covariance is singular (smallest eigenvalue {min_eigenvalue:.3e})")]
    SingularSigma0 { min_eigenvalue: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("closed form is only available for scalar outcomes and covariates")]
    NonScalarSpec,
    #[error("no closed form for cost {0}")]
    UnsupportedCost(String),
    #[error("penalty weight must be non-negative and finite, got {0}")]
    InvalidEta(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// `Y(k) = βk Z + εk`, `Z ~ N(0, I_dZ)`, `εk ~ N(0, Σk)` independent.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLinearSpec {
    /// dY×dZ.
    pub beta0: DMatrix<f64>,
    pub beta1: DMatrix<f64>,
    /// Noise covariances, dY×dY.
    pub sigma0: DMatrix<f64>,
    pub sigma1: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianLinearJson {
    beta0: Vec<Vec<f64>>,
    beta1: Vec<Vec<f64>>,
    sigma0: Vec<Vec<f64>>,
    sigma1: Vec<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, OracleError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(OracleError::InvalidModel(format!("{name} must be a non-empty rectangular array")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl GaussianLinearSpec {
    pub fn new(
        beta0: DMatrix<f64>,
        beta1: DMatrix<f64>,
        sigma0: DMatrix<f64>,
        sigma1: DMatrix<f64>,
    ) -> Result<Self, OracleError> {
        let (dy, dz) = beta0.shape();
        if beta1.shape() != (dy, dz) {
            return Err(OracleError::DimensionMismatch {
                expected: dy,
                found: beta1.nrows(),
            });
        }
        for s in [&sigma0, &sigma1] {
            if s.shape() != (dy, dy) {
                return Err(OracleError::DimensionMismatch {
                    expected: dy,
                    found: s.nrows(),
                });
            }
            // Positive definite: the Cholesky factorization must exist.
            sqrt_spd(s)?;
            if s.clone().cholesky().is_none() {
                return Err(OracleError::InvalidModel("noise covariance must be positive definite".into()));
            }
        }
        if beta0.iter().chain(beta1.iter()).any(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite);
        }
        Ok(Self {
            beta0,
            beta1,
            sigma0,
            sigma1,
        })
    }

    /// Scalar model `Y(k) = βk Z + σk εk` with noise standard deviations `σk`.
    pub fn scalar(beta0: f64, beta1: f64, sd0: f64, sd1: f64) -> Result<Self, OracleError> {
        if !(sd0 > 0.0 && sd1 > 0.0) {
            return Err(OracleError::InvalidModel("noise standard deviations must be positive".into()));
        }
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(one(beta0), one(beta1), one(sd0 * sd0), one(sd1 * sd1))
    }

    pub fn from_json_str(s: &str) -> Result<Self, crate::Error> {
        let raw: GaussianLinearJson = serde_json::from_str(s)?;
        Ok(Self::new(
            matrix_from_rows("beta0", &raw.beta0)?,
            matrix_from_rows("beta1", &raw.beta1)?,
            matrix_from_rows("sigma0", &raw.sigma0)?,
            matrix_from_rows("sigma1", &raw.sigma1)?,
        )?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(GaussianLinearJson {
            beta0: matrix_to_rows(&self.beta0),
            beta1: matrix_to_rows(&self.beta1),
            sigma0: matrix_to_rows(&self.sigma0),
            sigma1: matrix_to_rows(&self.sigma1),
        })
        .expect("numeric arrays serialize")
    }

    pub fn dy(&self) -> usize {
        self.beta0.nrows()
    }

    pub fn dz(&self) -> usize {
        self.beta0.ncols()
    }

    /// `(β0, β1, σ0, σ1)` with standard deviations, for scalar models.
    pub fn scalar_params(&self) -> Option<(f64, f64, f64, f64)> {
        if self.dy() != 1 || self.dz() != 1 {
            return None;
        }
        Some((
            self.beta0[(0, 0)],
            self.beta1[(0, 0)],
            self.sigma0[(0, 0)].sqrt(),
            self.sigma1[(0, 0)].sqrt(),
        ))
    }

    /// Covariance of `Y(k)`: `βk βkᵀ + Σk`.
    pub fn outcome_cov(&self, arm: u8) -> DMatrix<f64> {
        let (b, s) = if arm == 0 {
            (&self.beta0, &self.sigma0)
        } else {
            (&self.beta1, &self.sigma1)
        };
        symmetrize(&(b * b.transpose() + s))
    }

    fn with_beta1(&self, beta1: DMatrix<f64>) -> Self {
        Self {
            beta1,
            ..self.clone()
        }
    }
}

fn check_eta(eta: f64) -> Result<(), OracleError> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(OracleError::InvalidEta(eta))
    }
}

/// `V_u = (√(β0² + σ0²) − √(β1² + σ1²))²` for the scalar model and `‖y0 + y1‖²`.
pub fn v_u_closed(spec: &GaussianLinearSpec) -> Result<f64, OracleError> {
    let (b0, b1, s0, s1) = spec.scalar_params().ok_or(OracleError::NonScalarSpec)?;
    let d = (b0 * b0 + s0 * s0).sqrt() - (b1 * b1 + s1 * s1).sqrt();
    Ok(d * d)
}

/// `V_c = (β0 + β1)² + (σ0 − σ1)²` for the scalar model and `‖y0 + y1‖²`.
pub fn v_c_closed(spec: &GaussianLinearSpec) -> Result<f64, OracleError> {
    let (b0, b1, s0, s1) = spec.scalar_params().ok_or(OracleError::NonScalarSpec)?;
    Ok((b0 + b1) * (b0 + b1) + (s0 - s1) * (s0 - s1))
}

/// Penalized bound `V_ip(η)` for the scalar model and `‖y0 + y1‖²`.
pub fn v_ip_closed(spec: &GaussianLinearSpec, eta: f64) -> Result<f64, OracleError> {
    check_eta(eta)?;
    let (b0, b1, s0, s1) = spec.scalar_params().ok_or(OracleError::NonScalarSpec)?;
    let a = b0 * b0 + s0 * s0;
    let b = b1 * b1 + s1 * s1;
    let num = a * b - eta * b0 * b1 + eta * s0 * s1;
    let den = (a * b - 2.0 * eta * b0 * b1 + 2.0 * eta * s0 * s1 + eta * eta).sqrt();
    Ok(a + b - 2.0 * num / den)
}

/// `V_u` for `‖y0 + y1‖²` in any dimension: `E‖Y0‖² + E‖Y1‖² − 2 Tr((S0^½ S1 S0^½)^½)`.
pub fn v_u_general(spec: &GaussianLinearSpec) -> Result<f64, OracleError> {
    let c0 = spec.outcome_cov(0);
    let c1 = spec.outcome_cov(1);
    let root0 = sqrt_spd(&c0)?;
    let cross = sqrt_spd(&symmetrize(&(&root0 * &c1 * &root0)))?;
    Ok(c0.trace() + c1.trace() - 2.0 * cross.trace())
}

/// `V_c` for `‖y0 + y1‖²` in any dimension: `‖β0 + β1‖_F² + S(Σ0, Σ1)`.
pub fn v_c_general(spec: &GaussianLinearSpec) -> Result<f64, OracleError> {
    let sum = &spec.beta0 + &spec.beta1;
    Ok(sum.norm_squared() + bures_term(&spec.sigma0, &spec.sigma1)?)
}

/// `V_ip(η)` for `‖y0 + y1‖²` in any dimension.
///
/// The joint covariances mix blocks of size `η` and `1`, so absolute
/// accuracy degrades once `η` exceeds about `1e5` times the outcome scale.
///
/// Couples `X0 = (Y0, √η Z)` with `X1 = (−Y1, √η Z)`; the cross moment
/// `E[Y0·(−Y1)]` under the Gaussian transport map is
/// `Tr(Σ0^½ (Σ0^½ Σ1 Σ0^½)^½ Σ0^{-½} e eᵀ)` with `e = (I, 0)ᵀ`.
pub fn v_ip_general(spec: &GaussianLinearSpec, eta: f64) -> Result<f64, OracleError> {
    check_eta(eta)?;
    if eta == 0.0 {
        return v_u_general(spec);
    }
    let (dy, dz) = (spec.dy(), spec.dz());
    let d = dy + dz;
    let root_eta = eta.sqrt();
    let joint = |beta: &DMatrix<f64>, cov: DMatrix<f64>, sign: f64| -> DMatrix<f64> {
        let mut s = DMatrix::zeros(d, d);
        s.view_mut((0, 0), (dy, dy)).copy_from(&cov);
        let off = beta * (sign * root_eta);
        s.view_mut((0, dy), (dy, dz)).copy_from(&off);
        s.view_mut((dy, 0), (dz, dy)).copy_from(&off.transpose());
        s.view_mut((dy, dy), (dz, dz))
            .copy_from(&(DMatrix::identity(dz, dz) * eta));
        s
    };
    let big0 = joint(&spec.beta0, spec.outcome_cov(0), 1.0);
    let big1 = joint(&spec.beta1, spec.outcome_cov(1), -1.0);
    let root0 = sqrt_spd(&big0)?;
    let inv_root0 = linalg::inv_sqrt_spd(&big0, f64::MIN_POSITIVE)?;
    let middle = sqrt_spd(&symmetrize(&(&root0 * &big1 * &root0)))?;
    let m = &root0 * middle * inv_root0;
    let cross: f64 = (0..dy).map(|i| m[(i, i)]).sum();
    Ok(big0.view((0, 0), (dy, dy)).trace() + big1.view((0, 0), (dy, dy)).trace() - 2.0 * cross)
}

fn v_ip_any(spec: &GaussianLinearSpec, eta: f64) -> Result<f64, OracleError> {
    if spec.scalar_params().is_some() {
        v_ip_closed(spec, eta)
    } else {
        v_ip_general(spec, eta)
    }
}

/// Population value of the bound reported by the estimator for a preset
/// cost: the `E[h]` under the optimal penalized coupling for `h`
/// (`Side::Lower`) or for `−h` (`Side::Upper`).
///
/// Reductions, with `T = E‖Y0‖² + E‖Y1‖²`:
/// `‖y0 − y1‖²` is `‖y0 + y1‖²` after `β1 → −β1`; `y0·y1` is half of
/// `‖y0 + y1‖² − ‖y0‖² − ‖y1‖²`, which doubles the effective penalty; and
/// `−‖y0 ± y1‖² = ‖y0 ∓ y1‖² − 2‖y0‖² − 2‖y1‖²`.
pub fn pi_bound_closed(
    spec: &GaussianLinearSpec,
    cost: &CostSpec,
    side: Side,
    eta: f64,
) -> Result<f64, OracleError> {
    check_eta(eta)?;
    let total = spec.outcome_cov(0).trace() + spec.outcome_cov(1).trace();
    let flipped = spec.with_beta1(-&spec.beta1);
    let sq_sum = |e: f64| v_ip_any(spec, e);
    let sq_diff = |e: f64| v_ip_any(&flipped, e);
    match (cost, side) {
        (CostSpec::SqSum, Side::Lower) => sq_sum(eta),
        (CostSpec::SqSum, Side::Upper) => Ok(2.0 * total - sq_diff(eta)?),
        (CostSpec::SqDiff, Side::Lower) => sq_diff(eta),
        (CostSpec::SqDiff, Side::Upper) => Ok(2.0 * total - sq_sum(eta)?),
        (CostSpec::Product, Side::Lower) => Ok(0.5 * (sq_sum(2.0 * eta)? - total)),
        (CostSpec::Product, Side::Upper) => Ok(0.5 * (total - sq_diff(2.0 * eta)?)),
        (other, _) => Err(OracleError::UnsupportedCost(other.name())),
    }
}
