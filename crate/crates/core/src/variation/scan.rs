//! Sampled check that `|D³λ(g)[h]| / (‖h‖_{C²}‖h‖²_{H¹})` stays bounded.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::series::third_variation;
use crate::error::Result;
use crate::manifold::{norm, MetricField, NormKind, PeriodicGrid, Scheme};
use crate::par::{self, Execution};
use crate::sample::{random_perturbation, Family, MetricSpec, Perturbation, TensorMode};
use crate::spectral::ground_state;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundScanConfig {
    pub res: usize,
    pub samples: usize,
    pub seed: u64,
    /// `C²` radius of the base-metric perturbations around `δ`.
    pub metric_radius: f64,
    /// Ray parameters `s` for `h = s·h₀` (`‖h₀‖_{C²} = 1`).
    pub ladder: Vec<f64>,
}

impl Default for BoundScanConfig {
    fn default() -> Self {
        Self {
            res: 32,
            samples: 100,
            seed: 42,
            metric_radius: 0.02,
            ladder: vec![0.02, 0.01, 0.005],
        }
    }
}

/// One `(g, h = s·h₀)` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub sample: usize,
    /// `true` for single-mode `h₀`, `false` for multi-mode mixtures.
    pub single_mode: bool,
    pub s: f64,
    pub d3: f64,
    pub h_c2: f64,
    pub h_h1: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundScanReport {
    pub seed: u64,
    pub samples: usize,
    pub rows: Vec<BoundRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Largest `max/min` of the ratio across one sample's ladder.
    pub max_ladder_spread: f64,
}

/// Seeded generator for sample `i`, independent of evaluation order.
pub(crate) fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn single_mode<R: rand::Rng>(rng: &mut R, n: usize) -> Perturbation {
    let p = random_perturbation(rng, n, Family::Mixed);
    Perturbation {
        tensor: p.tensor.into_iter().take(1).collect::<Vec<TensorMode>>(),
        ..Default::default()
    }
}

pub fn third_variation_bound_scan(
    config: &BoundScanConfig,
    exec: Execution,
) -> Result<BoundScanReport> {
    let grid = Arc::new(PeriodicGrid::cube(2, config.res, Scheme::Spectral)?);
    let rows = par::map(exec, config.samples, |i| -> Result<Vec<BoundRow>> {
        let mut rng = sample_rng(config.seed, i);
        let n = grid.dim();
        let base = random_perturbation(&mut rng, n, Family::Mixed)
            .with_c2_norm(&grid, config.metric_radius)?;
        let single = i % 2 == 0;
        let h0 = if single {
            single_mode(&mut rng, n)
        } else {
            random_perturbation(&mut rng, n, Family::Mixed)
        };
        let h0 = h0.with_c2_norm(&grid, 1.0)?;
        let g = MetricSpec {
            perturbation: base,
            ..Default::default()
        }
        .build(&grid)?;
        let sd = ground_state(&g, 2)?;
        let flat = MetricField::flat(&grid);
        config
            .ladder
            .iter()
            .map(|&s| {
                let h = h0.scaled(s).evaluate(&grid)?;
                let d3 = third_variation(&g, &sd, &h)?.value;
                let h_c2 = norm(&flat, &h, NormKind::Ck(2), None)?;
                let h_h1 = norm(&flat, &h, NormKind::H1, None)?;
                Ok(BoundRow {
                    sample: i,
                    single_mode: single,
                    s,
                    d3,
                    h_c2,
                    h_h1,
                    ratio: d3.abs() / (h_c2 * h_h1 * h_h1),
                })
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut spread: f64 = 1.0;
    for sample in &rows {
        let hi = sample.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let lo = sample.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            spread = spread.max(hi / lo);
        }
    }
    let rows: Vec<BoundRow> = rows.into_iter().flatten().collect();
    Ok(BoundScanReport {
        seed: config.seed,
        samples: config.samples,
        max_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        min_ratio: rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
        max_ladder_spread: spread,
        rows,
    })
}
