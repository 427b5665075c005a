//! Analytic metric perturbations built from low Fourier modes.
//!
//! Every sample is a closed-form tensor field, so the same sample can be
//! evaluated on grids of different resolution (needed for refinement and
//! grid-stability comparisons).

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::manifold::{MetricField, PeriodicGrid, SymTensorField};

/// `amp · cos(k·x + phase)` with integer wavevector `k` (in units of `2π/L_i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarMode {
    pub k: Vec<i32>,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

/// `b · cos(k·x + phase)` for a one-form with coefficient vector `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorMode {
    pub k: Vec<i32>,
    pub amp: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

/// `A · cos(k·x + phase)` for a symmetric matrix `A` (full rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorMode {
    pub k: Vec<i32>,
    pub amp: Vec<Vec<f64>>,
    #[serde(default)]
    pub phase: f64,
}

/// Closed-form symmetric 2-tensor `h = A + C u + div* X + Σ tensor modes`
/// where `C u = (Δu)δ − Hess u` and `div* X = −½ L_X δ` (flat background).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Constant symmetric matrix.
    #[serde(default)]
    pub constant: Option<Vec<Vec<f64>>>,
    /// Generators `u` of conformal directions `C u`.
    #[serde(default)]
    pub conformal: Vec<ScalarMode>,
    /// Gauge directions `div* X`.
    #[serde(default)]
    pub gauge: Vec<VectorMode>,
    #[serde(default)]
    pub tensor: Vec<TensorMode>,
}

fn wave(grid: &PeriodicGrid, k: &[i32]) -> Result<[f64; 3]> {
    let n = grid.dim();
    if k.len() != n {
        return Err(LabError::Config(format!(
            "wavevector {k:?} has wrong dimension (grid is {n}D)"
        )));
    }
    let mut out = [0.0; 3];
    for a in 0..n {
        out[a] = 2.0 * std::f64::consts::PI * k[a] as f64 / grid.periods()[a];
    }
    Ok(out)
}

fn phase_at(kv: &[f64; 3], x: &[f64], phase: f64) -> f64 {
    x.iter().zip(kv).map(|(a, b)| a * b).sum::<f64>() + phase
}

fn check_matrix(m: &[Vec<f64>], n: usize) -> Result<[[f64; 3]; 3]> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(LabError::Config(format!("matrix must be {n}×{n}")));
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            if (m[i][j] - m[j][i]).abs() > 1e-14 {
                return Err(LabError::Config("matrix must be symmetric".into()));
            }
            out[i][j] = m[i][j];
        }
    }
    Ok(out)
}

impl Perturbation {
    pub fn is_zero(&self) -> bool {
        self.constant.is_none()
            && self.conformal.is_empty()
            && self.gauge.is_empty()
            && self.tensor.is_empty()
    }

    /// Multiplies every amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        if let Some(c) = &mut p.constant {
            c.iter_mut().flatten().for_each(|v| *v *= s);
        }
        p.conformal.iter_mut().for_each(|m| m.amp *= s);
        p.gauge
            .iter_mut()
            .for_each(|m| m.amp.iter_mut().for_each(|v| *v *= s));
        p.tensor
            .iter_mut()
            .for_each(|m| m.amp.iter_mut().flatten().for_each(|v| *v *= s));
        p
    }

    /// Concatenation (sum of tensors).
    pub fn plus(&self, other: &Self) -> Self {
        let mut p = self.clone();
        p.constant = match (&self.constant, &other.constant) {
            (Some(a), Some(b)) => Some(
                a.iter()
                    .zip(b)
                    .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
                    .collect(),
            ),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        p.conformal.extend(other.conformal.iter().cloned());
        p.gauge.extend(other.gauge.iter().cloned());
        p.tensor.extend(other.tensor.iter().cloned());
        p
    }

    /// Evaluates the tensor on `grid`.
    pub fn evaluate(&self, grid: &Arc<PeriodicGrid>) -> Result<SymTensorField> {
        let n = grid.dim();
        let constant = self
            .constant
            .as_ref()
            .map(|c| check_matrix(c, n))
            .transpose()?;
        let conformal = self
            .conformal
            .iter()
            .map(|m| Ok((wave(grid, &m.k)?, m.amp, m.phase)))
            .collect::<Result<Vec<_>>>()?;
        let gauge = self
            .gauge
            .iter()
            .map(|m| {
                if m.amp.len() != n {
                    return Err(LabError::Config(
                        "gauge amplitude has wrong dimension".into(),
                    ));
                }
                Ok((wave(grid, &m.k)?, m.amp.clone(), m.phase))
            })
            .collect::<Result<Vec<_>>>()?;
        let tensor = self
            .tensor
            .iter()
            .map(|m| Ok((wave(grid, &m.k)?, check_matrix(&m.amp, n)?, m.phase)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymTensorField::sample(grid, |x, i, j| {
            let mut v = constant.map_or(0.0, |c| c[i][j]);
            for (kv, a, ph) in &conformal {
                let k2: f64 = kv.iter().map(|k| k * k).sum();
                let delta = if i == j { k2 } else { 0.0 };
                v += a * phase_at(kv, x, *ph).cos() * (kv[i] * kv[j] - delta);
            }
            for (kv, b, ph) in &gauge {
                v += 0.5 * (b[j] * kv[i] + b[i] * kv[j]) * phase_at(kv, x, *ph).sin();
            }
            for (kv, a, ph) in &tensor {
                v += a[i][j] * phase_at(kv, x, *ph).cos();
            }
            v
        }))
    }

    /// Conformal generator `u = Σ amp cos(k·x + phase)` on `grid`.
    pub fn conformal_generator(&self, grid: &Arc<PeriodicGrid>) -> Result<Vec<f64>> {
        let modes = self
            .conformal
            .iter()
            .map(|m| Ok((wave(grid, &m.k)?, m.amp, m.phase)))
            .collect::<Result<Vec<_>>>()?;
        Ok(grid.sample(|x| {
            modes
                .iter()
                .map(|(kv, a, ph)| a * phase_at(kv, x, *ph).cos())
                .sum()
        }))
    }
}

/// How to build a metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// Constant background matrix (identity when absent).
    #[serde(default)]
    pub background: Option<Vec<Vec<f64>>>,
    /// Conformal factor modes: the metric is `e^{2u}(background + perturbation)`.
    #[serde(default)]
    pub conformal_factor: Vec<ScalarMode>,
    #[serde(default)]
    pub perturbation: Perturbation,
    /// LFLD snapshot of the metric; overrides everything else.
    #[serde(default)]
    pub snapshot: Option<std::path::PathBuf>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            background: None,
            conformal_factor: Vec::new(),
            perturbation: Perturbation::default(),
            snapshot: None,
        }
    }
}

impl MetricSpec {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn build(&self, grid: &Arc<PeriodicGrid>) -> Result<MetricField> {
        if let Some(path) = &self.snapshot {
            return MetricField::new(crate::manifold::snapshot::read_field(path, grid)?);
        }
        let n = grid.dim();
        let bg = match &self.background {
            Some(m) => check_matrix(m, n)?,
            None => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
        let mut g = SymTensorField::constant(grid, &bg);
        if !self.perturbation.is_zero() {
            g = g.add(&self.perturbation.evaluate(grid)?);
        }
        if !self.conformal_factor.is_empty() {
            let u = Perturbation {
                conformal: self.conformal_factor.clone(),
                ..Default::default()
            }
            .conformal_generator(grid)?;
            let factor: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
            for c in 0..g.n_components() {
                g.comp_mut(c)
                    .iter_mut()
                    .zip(&factor)
                    .for_each(|(v, f)| *v *= f);
            }
        }
        MetricField::new(g)
    }
}

/// Which directions a random sample mixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Pure gauge `div* X`.
    Gauge,
    /// Conformal directions `C u`.
    Conformal,
    /// Constant trace-free tensors (the TT sector on flat T²).
    Tt,
    /// Constant symmetric matrices (the flat family).
    Flat,
    /// Random combination of all of the above plus a generic tensor mode.
    Mixed,
}

const MAX_K: i32 = 2;

fn random_k<R: Rng>(rng: &mut R, n: usize) -> Vec<i32> {
    loop {
        let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-MAX_K..=MAX_K)).collect();
        let k2: i32 = k.iter().map(|v| v * v).sum();
        if k2 > 0 && k2 <= MAX_K * MAX_K {
            return k;
        }
    }
}

fn random_sym<R: Rng>(rng: &mut R, n: usize, trace_free: bool) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen::<f64>() - 0.5;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    if trace_free {
        let t = (0..n).map(|i| m[i][i]).sum::<f64>() / n as f64;
        (0..n).for_each(|i| m[i][i] -= t);
    }
    m
}

/// Draws a perturbation of the given family with unit-scale amplitudes.
pub fn random_perturbation<R: Rng>(rng: &mut R, n: usize, family: Family) -> Perturbation {
    let conformal = |rng: &mut R| {
        (0..2)
            .map(|_| ScalarMode {
                k: random_k(rng, n),
                amp: rng.gen::<f64>() - 0.5,
                phase: rng.gen::<f64>() * std::f64::consts::TAU,
            })
            .collect::<Vec<_>>()
    };
    let gauge = |rng: &mut R| {
        (0..2)
            .map(|_| VectorMode {
                k: random_k(rng, n),
                amp: (0..n).map(|_| rng.gen::<f64>() - 0.5).collect(),
                phase: rng.gen::<f64>() * std::f64::consts::TAU,
            })
            .collect::<Vec<_>>()
    };
    match family {
        Family::Gauge => Perturbation {
            gauge: gauge(rng),
            ..Default::default()
        },
        Family::Conformal => Perturbation {
            conformal: conformal(rng),
            ..Default::default()
        },
        Family::Tt => Perturbation {
            constant: Some(random_sym(rng, n, true)),
            ..Default::default()
        },
        Family::Flat => Perturbation {
            constant: Some(random_sym(rng, n, false)),
            ..Default::default()
        },
        Family::Mixed => {
            let weights: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            Perturbation {
                constant: Some(random_sym(rng, n, false)),
                conformal: conformal(rng),
                gauge: gauge(rng),
                tensor: vec![TensorMode {
                    k: random_k(rng, n),
                    amp: random_sym(rng, n, false),
                    phase: rng.gen::<f64>() * std::f64::consts::TAU,
                }],
            }
            .weighted(&weights)
        }
    }
}

impl Perturbation {
    fn weighted(mut self, w: &[f64]) -> Self {
        if let Some(c) = &mut self.constant {
            c.iter_mut().flatten().for_each(|v| *v *= w[0]);
        }
        self.conformal.iter_mut().for_each(|m| m.amp *= w[1]);
        self.gauge
            .iter_mut()
            .for_each(|m| m.amp.iter_mut().for_each(|v| *v *= w[2]));
        self.tensor
            .iter_mut()
            .for_each(|m| m.amp.iter_mut().flatten().for_each(|v| *v *= w[3]));
        self
    }

    /// Rescales so that the (grid-independent) `C²` norm equals `radius`.
    pub fn with_c2_norm(&self, grid: &Arc<PeriodicGrid>, radius: f64) -> Result<Self> {
        let h = self.evaluate(grid)?;
        let g = MetricField::flat(grid);
        let c2 = crate::manifold::norm(&g, &h, crate::manifold::NormKind::Ck(2), None)?;
        if c2 == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.scaled(radius / c2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ops::{divergence, divergence_adjoint};
    use crate::manifold::{Scheme, VectorField};

    #[test]
    fn analytic_directions_match_grid_operators() {
        let grid = Arc::new(PeriodicGrid::cube(2, 16, Scheme::Spectral).unwrap());
        let flat = MetricField::flat(&grid);
        let p = Perturbation {
            gauge: vec![VectorMode {
                k: vec![1, -1],
                amp: vec![0.3, 0.2],
                phase: 0.4,
            }],
            ..Default::default()
        };
        let x = VectorField::sample(&grid, |x, k| [0.3, 0.2][k] * (x[0] - x[1] + 0.4).cos());
        let expect = divergence_adjoint(&flat, &x);
        let got = p.evaluate(&grid).unwrap();
        assert!(got.sub(&expect).max_abs() < 1e-12);
        let c = Perturbation {
            conformal: vec![ScalarMode {
                k: vec![2, 1],
                amp: 0.5,
                phase: 1.0,
            }],
            ..Default::default()
        };
        assert!(divergence(&flat, &c.evaluate(&grid).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn cu_example_has_single_component() {
        let grid = Arc::new(PeriodicGrid::cube(2, 16, Scheme::Spectral).unwrap());
        let c = Perturbation {
            conformal: vec![ScalarMode {
                k: vec![1, 0],
                amp: 1.0,
                phase: 0.0,
            }],
            ..Default::default()
        };
        let h = c.evaluate(&grid).unwrap();
        assert!(h.ij(0, 0).iter().chain(h.ij(0, 1)).all(|v| v.abs() < 1e-15));
        let expect = grid.sample(|x| -x[0].cos());
        assert!(h
            .ij(1, 1)
            .iter()
            .zip(&expect)
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
