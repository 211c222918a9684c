//! Partial-identification bounds for causal estimands of the form
//! `E[h(Y(0), Y(1))]` from randomized experiments with covariates.
//!
//! The bounds come from a discrete optimal-transport problem between the
//! empirical laws of `(Y(0), Z)` and `(Y(1), Z)`, where the covariates of
//! the two arms are pulled together by a penalty `η‖z0 − z1‖²`. At `η = 0`
//! this is the covariate-free transport bound; as `η` grows it approaches
//! the conditional transport bound.
//!
//! Module map:
//! - [`ot`]: exact network simplex and entropic Sinkhorn solvers.
//! - [`cost`]: outcome costs `h`, the penalized cost matrix and η grids.
//! - [`estimator`]: the plug-in bound estimator, η sweeps and the rate study.
//! - [`gaussian`]: closed-form bounds for Gaussian models and SPD matrix
//!   helpers.
//! - [`synthetic`]: location/scale data generators.
//! - [`applications`]: Neyman variance tightening and correlation bounds.

pub mod applications;
pub mod cost;
mod error;
pub mod estimator;
pub mod gaussian;
pub mod ot;
pub mod sample;
pub mod synthetic;

pub use cost::{CostSpec, EtaGrid, QuadraticCost};
pub use error::{Error, Result};
pub use estimator::{estimate_bound, sweep, BoundEstimate, EstimatorOptions, PIBound, Side, Solver};
pub use gaussian::{GaussianLinearSpec, LocationScaleSpec};
pub use ot::{DenseMatrix, DiscreteOtProblem, OtError, TransportPlan};
pub use sample::{Group, ObservedSample};
