#![allow(dead_code)]

use std::sync::Arc;

use lambda_lab::manifold::{MetricField, PeriodicGrid, Scheme, SymTensorField};
use lambda_lab::sample::{MetricSpec, Perturbation, ScalarMode};

pub fn grid2(res: usize) -> Arc<PeriodicGrid> {
    Arc::new(PeriodicGrid::cube(2, res, Scheme::Spectral).unwrap())
}

/// `e^{2u}δ` with `u = amp·sin x₁`.
pub fn conformal_sine(grid: &Arc<PeriodicGrid>, amp: f64) -> MetricField {
    let u = grid.sample(|x| amp * x[0].sin());
    MetricField::conformal(grid, &u).unwrap()
}

/// `C u` for `u = cos x₁`: the single component `h₂₂ = −cos x₁`.
pub fn cu_mode(grid: &Arc<PeriodicGrid>) -> SymTensorField {
    Perturbation {
        conformal: vec![ScalarMode {
            k: vec![1, 0],
            amp: 1.0,
            phase: 0.0,
        }],
        ..Default::default()
    }
    .evaluate(grid)
    .unwrap()
}

pub fn metric(grid: &Arc<PeriodicGrid>, p: Perturbation) -> MetricField {
    MetricSpec {
        perturbation: p,
        ..Default::default()
    }
    .build(grid)
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
