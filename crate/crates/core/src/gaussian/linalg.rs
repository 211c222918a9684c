//! Square roots and transport maps for symmetric positive (semi)definite
//! matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use super::OracleError;

/// Symmetry and negative-eigenvalue tolerance, relative to the matrix scale.
pub const PSD_TOL: f64 = 1e-10;

fn scale(b: &DMatrix<f64>) -> f64 {
    b.amax().max(1.0)
}

fn check_symmetric(b: &DMatrix<f64>) -> Result<(), OracleError> {
    if !b.is_square() {
        return Err(OracleError::NotSymmetric {
            max_asymmetry: f64::INFINITY,
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite);
    }
    let max_asymmetry = (b - b.transpose()).amax();
    if max_asymmetry > PSD_TOL * scale(b) {
        return Err(OracleError::NotSymmetric { max_asymmetry });
    }
    Ok(())
}

pub(crate) fn symmetrize(b: &DMatrix<f64>) -> DMatrix<f64> {
    (b + b.transpose()) * 0.5
}

/// Eigendecomposition of a PSD matrix with eigenvalues above `-PSD_TOL·scale`
/// clamped to zero.
fn psd_eigen(b: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, OracleError> {
    check_symmetric(b)?;
    let mut eig = SymmetricEigen::new(symmetrize(b));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * scale(b) {
        return Err(OracleError::IndefiniteInput { min_eigenvalue: min });
    }
    eig.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    Ok(eig)
}

fn recompose(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(v * d * v.transpose()))
}

/// Principal square root of a symmetric PSD matrix.
///
/// 2×2 inputs use `(B + √det·I) / √(tr B + 2√det)`; everything else goes
/// through the symmetric eigendecomposition with tiny negative eigenvalues
/// clamped to zero.
pub fn sqrt_spd(b: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    check_symmetric(b)?;
    match b.nrows() {
        1 => {
            let v = b[(0, 0)];
            if v < -PSD_TOL * scale(b) {
                return Err(OracleError::IndefiniteInput { min_eigenvalue: v });
            }
            Ok(DMatrix::from_element(1, 1, v.max(0.0).sqrt()))
        }
        2 => sqrt_2x2(b),
        _ => sqrt_psd_eigen(b),
    }
}

/// Square root through the eigendecomposition regardless of size.
pub fn sqrt_psd_eigen(b: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    Ok(recompose(&psd_eigen(b)?, f64::sqrt))
}

fn sqrt_2x2(b: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    let b = symmetrize(b);
    let (p, q, r) = (b[(0, 0)], b[(0, 1)], b[(1, 1)]);
    let tr = p + r;
    let det = p * r - q * q;
    let half = 0.5 * tr;
    let disc = (half * half - det).max(0.0).sqrt();
    let min_eig = half - disc;
    if min_eig < -PSD_TOL * scale(&b) {
        return Err(OracleError::IndefiniteInput {
            min_eigenvalue: min_eig,
        });
    }
    let sdet = det.max(0.0).sqrt();
    let denom = (tr + 2.0 * sdet).max(0.0).sqrt();
    if denom == 0.0 {
        return Ok(DMatrix::zeros(2, 2));
    }
    let mut s = b;
    s[(0, 0)] += sdet;
    s[(1, 1)] += sdet;
    Ok(s / denom)
}

/// Inverse principal square root; fails when the smallest eigenvalue is
/// below `min_eigenvalue`.
pub(crate) fn inv_sqrt_spd(b: &DMatrix<f64>, min_eigenvalue: f64) -> Result<DMatrix<f64>, OracleError> {
    let eig = psd_eigen(b)?;
    let min = eig.eigenvalues.min();
    if min < min_eigenvalue {
        return Err(OracleError::SingularSigma0 { min_eigenvalue: min });
    }
    Ok(recompose(&eig, |l| 1.0 / l.sqrt()))
}

/// `S(Σ0, Σ1) = Tr(Σ0 + Σ1 − 2(Σ0^½ Σ1 Σ0^½)^½)`, the squared 2-Wasserstein
/// distance between centered Gaussians.
pub fn bures_term(sigma0: &DMatrix<f64>, sigma1: &DMatrix<f64>) -> Result<f64, OracleError> {
    if sigma0.shape() != sigma1.shape() {
        return Err(OracleError::DimensionMismatch {
            expected: sigma0.nrows(),
            found: sigma1.nrows(),
        });
    }
    if sigma0.nrows() == 1 {
        check_symmetric(sigma0)?;
        check_symmetric(sigma1)?;
        let (a, b) = (sigma0[(0, 0)], sigma1[(0, 0)]);
        if a < -PSD_TOL || b < -PSD_TOL {
            return Err(OracleError::IndefiniteInput {
                min_eigenvalue: a.min(b),
            });
        }
        let (sa, sb) = (a.max(0.0).sqrt(), b.max(0.0).sqrt());
        return Ok((sa - sb) * (sa - sb));
    }
    let root0 = sqrt_spd(sigma0)?;
    let cross = sqrt_spd(&symmetrize(&(&root0 * sigma1 * &root0)))?;
    Ok(sigma0.trace() + sigma1.trace() - 2.0 * cross.trace())
}

/// Symmetric map `A` pushing `N(0, Σ0)` onto `N(0, Σ1)` optimally:
/// `A = Σ0^{-½} (Σ0^½ Σ1 Σ0^½)^½ Σ0^{-½}`.
pub fn gaussian_ot_map(sigma0: &DMatrix<f64>, sigma1: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    if sigma0.shape() != sigma1.shape() {
        return Err(OracleError::DimensionMismatch {
            expected: sigma0.nrows(),
            found: sigma1.nrows(),
        });
    }
    check_symmetric(sigma1)?;
    let inv_root0 = inv_sqrt_spd(sigma0, 1e-12)?;
    let root0 = sqrt_spd(sigma0)?;
    let middle = sqrt_spd(&symmetrize(&(&root0 * sigma1 * &root0)))?;
    Ok(symmetrize(&(&inv_root0 * middle * &inv_root0)))
}
