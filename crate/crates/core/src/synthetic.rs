//! Synthetic experiments from Gaussian-noise location and scale models.
//!
//! Each unit draws `Z`, `ε0`, `ε1` independently and gets both potential
//! outcomes; a uniformly random subset of size `n` is then revealed as
//! control and the rest as treated. Normals come from the ziggurat sampler
//! in `rand_distr` driven by a seeded ChaCha8 stream.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gaussian::{
    sqrt_spd, CovariateLaw, CovariateMap, GaussianLinearSpec, LocationScaleSpec, ModelKind,
};
use crate::sample::ObservedSample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SynthModel {
    Linear(GaussianLinearSpec),
    LocationScale(LocationScaleSpec),
}

impl SynthModel {
    pub fn dy(&self) -> usize {
        match self {
            SynthModel::Linear(s) => s.dy(),
            SynthModel::LocationScale(s) => s.dy(),
        }
    }

    pub fn dz(&self) -> usize {
        match self {
            SynthModel::Linear(s) => s.dz(),
            SynthModel::LocationScale(s) => s.dz(),
        }
    }

    /// The equivalent location/scale description.
    pub fn as_location_scale(&self) -> LocationScaleSpec {
        match self {
            SynthModel::Linear(s) => LocationScaleSpec::from_linear(s),
            SynthModel::LocationScale(s) => s.clone(),
        }
    }

    /// The linear Gaussian description, when the model is one.
    pub fn as_linear(&self) -> Option<&GaussianLinearSpec> {
        match self {
            SynthModel::Linear(s) => Some(s),
            SynthModel::LocationScale(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub model: SynthModel,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

/// Named models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `f0 = 0.6z`, `f1 = 1.6z`, unit noise.
    LinearLocation,
    /// `f0 = 0.2z²`, `f1 = 0.6z²`, unit noise.
    QuadraticLocation,
    /// `Y = f(Z)·ε` with `f0 = 0.5z − 0.35`, `f1 = 1.1z + 0.35`.
    Scale,
    /// `Y(0) = 0.8Z + ε0`, `Y(1) = 1.6Z + ε1`.
    GaussianLinear,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::LinearLocation,
        Preset::QuadraticLocation,
        Preset::Scale,
        Preset::GaussianLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LinearLocation => "linear-location",
            Preset::QuadraticLocation => "quadratic-location",
            Preset::Scale => "scale",
            Preset::GaussianLinear => "gaussian-linear",
        }
    }

    pub fn model(self) -> SynthModel {
        let one = || DMatrix::from_element(1, 1, 1.0);
        let ls = |kind, f0, f1| {
            SynthModel::LocationScale(
                LocationScaleSpec::new(kind, f0, f1, one(), one(), CovariateLaw::StandardNormal)
                    .expect("preset is valid"),
            )
        };
        match self {
            Preset::LinearLocation => ls(
                ModelKind::Location,
                CovariateMap::scalar(0.0, 0.6, 0.0),
                CovariateMap::scalar(0.0, 1.6, 0.0),
            ),
            Preset::QuadraticLocation => ls(
                ModelKind::Location,
                CovariateMap::scalar(0.0, 0.0, 0.2),
                CovariateMap::scalar(0.0, 0.0, 0.6),
            ),
            Preset::Scale => ls(
                ModelKind::Scale,
                CovariateMap::scalar(-0.35, 0.5, 0.0),
                CovariateMap::scalar(0.35, 1.1, 0.0),
            ),
            Preset::GaussianLinear => SynthModel::Linear(
                GaussianLinearSpec::scalar(0.8, 1.6, 1.0, 1.0).expect("preset is valid"),
            ),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidConfig(format!("unknown preset '{s}', expected one of {}", names.join(", ")))
            })
    }
}

fn normals<R: Rng>(rng: &mut R, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
}

/// `root · ξ` with `ξ` standard normal.
fn correlated(rng: &mut ChaCha8Rng, root: &DMatrix<f64>, xi: &mut [f64], out: &mut [f64]) {
    normals(rng, xi);
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..xi.len()).map(|k| root[(i, k)] * xi[k]).sum();
    }
}

/// Draws a completely randomized experiment with `n` controls and `m`
/// treated units, rows in unit order.
pub fn generate(config: &SynthConfig) -> Result<ObservedSample> {
    let (n, m) = (config.n, config.m);
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("group sizes must be at least 1".into()));
    }
    let spec = config.model.as_location_scale();
    let (dy, dz) = (spec.dy(), spec.dz());
    let root0 = sqrt_spd(&spec.sigma0)?;
    let root1 = sqrt_spd(&spec.sigma1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let total = n + m;
    let mut treated = vec![0u8; total];
    treated[n..].fill(1);
    treated.shuffle(&mut rng);

    let mut builder = ObservedSample::new(dy, dz);
    let mut z = vec![0.0; dz];
    let mut f = vec![0.0; dy];
    let mut eps0 = vec![0.0; dy];
    let mut eps1 = vec![0.0; dy];
    let mut xi = vec![0.0; dy];
    let mut y = vec![0.0; dy];
    for &w in &treated {
        spec.covariates.sample(&mut rng, &mut z);
        correlated(&mut rng, &root0, &mut xi, &mut eps0);
        correlated(&mut rng, &root1, &mut xi, &mut eps1);
        let (map, eps) = if w == 0 { (&spec.f0, &eps0) } else { (&spec.f1, &eps1) };
        map.eval(&z, &mut f);
        for j in 0..dy {
            y[j] = match spec.kind {
                ModelKind::Location => f[j] + eps[j],
                ModelKind::Scale => f[j] * eps[j],
            };
        }
        builder.push(w, &y, &z)?;
    }
    builder.finish()
}
