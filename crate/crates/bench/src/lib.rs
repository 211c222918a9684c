//! Shared inputs for the benchmarks in `benches/`.

use mirror_ot_core::synthetic::{generate, Preset, SynthConfig};
use mirror_ot_core::{DenseMatrix, ObservedSample};

/// Squared-distance cost between two deterministic 1-D point sets.
pub fn grid_cost(n: usize, m: usize) -> DenseMatrix {
    let x = |i: usize, k: usize| ((i * 7919) % k) as f64 / k as f64;
    DenseMatrix::from_fn(n, m, |i, j| {
        let d = x(i, n) - x(j, m) + 0.1;
        d * d
    })
}

pub fn preset_sample(n: usize) -> ObservedSample {
    generate(&SynthConfig {
        model: Preset::GaussianLinear.model(),
        n,
        m: n,
        seed: 1,
    })
    .expect("preset generates")
}
