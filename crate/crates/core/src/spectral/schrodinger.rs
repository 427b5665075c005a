use std::sync::Arc;

use crate::manifold::grid::PeriodicGrid;
use crate::manifold::metric::MetricField;
use crate::manifold::ops::{flux_coefficients, laplacian_with, scalar_curvature};
use crate::manifold::sym_index;
use crate::scalar::{Jet4, Scalar};

/// `H_g = −4Δ_g + R_g`, self-adjoint in `L²(dV_g)`.
#[derive(Clone, Debug)]
pub struct Schrodinger<S: Scalar = f64> {
    grid: Arc<PeriodicGrid>,
    flux: Vec<Vec<S>>,
    sqrt_det: Vec<S>,
    inv_sqrt_det: Vec<S>,
    potential: Vec<S>,
}

impl<S: Scalar> Schrodinger<S> {
    pub fn new(g: &MetricField<S>) -> Self {
        let potential = scalar_curvature(g).into_components().remove(0);
        Self {
            grid: g.grid().clone(),
            flux: flux_coefficients(g),
            sqrt_det: g.sqrt_det().to_vec(),
            inv_sqrt_det: g.sqrt_det().iter().map(|s| s.recip()).collect(),
            potential,
        }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    /// `R_g` per node.
    pub fn potential(&self) -> &[S] {
        &self.potential
    }

    pub fn sqrt_det(&self) -> &[S] {
        &self.sqrt_det
    }

    /// `H u`.
    pub fn apply(&self, u: &[S]) -> Vec<S> {
        let lap = laplacian_with(&self.grid, &self.flux, &self.inv_sqrt_det, u);
        lap.iter()
            .zip(&self.potential)
            .zip(u)
            .map(|((l, r), v)| l.scale(-4.0) + *r * *v)
            .collect()
    }

    /// The quadratic form `⟨u, H u⟩ = ∫ 4|Du|² + R u² dV` (plus the Nyquist
    /// penalty), evaluated from first derivatives so that nearly constant `u`
    /// incurs no cancellation.
    pub fn energy(&self, u: &[S]) -> S {
        let grid = &self.grid;
        let n = grid.dim();
        let du: Vec<Vec<S>> = (0..n).map(|a| grid.diff(a, u)).collect();
        let pen = grid.nyquist_penalty(u);
        let mut grad = S::zero();
        let mut pot = S::zero();
        let mut nyq = S::zero();
        for node in 0..grid.len() {
            for i in 0..n {
                for j in 0..n {
                    grad += self.flux[sym_index(n, i, j)][node] * du[i][node] * du[j][node];
                }
            }
            pot += self.potential[node] * u[node] * u[node] * self.sqrt_det[node];
            nyq += pen[node] * u[node];
        }
        ((grad + nyq).scale(4.0) + pot).scale(grid.cell_volume())
    }

    /// `∫ u v dV_g`.
    pub fn inner(&self, u: &[S], v: &[S]) -> S {
        let mut acc = S::zero();
        for ((a, b), s) in u.iter().zip(v).zip(&self.sqrt_det) {
            acc += *a * *b * *s;
        }
        acc.scale(self.grid.cell_volume())
    }
}

impl Schrodinger<f64> {
    /// Quadrature weights `√det g · ΔV`.
    pub fn weights(&self) -> Vec<f64> {
        let dv = self.grid.cell_volume();
        self.sqrt_det.iter().map(|s| s * dv).collect()
    }

    /// `W^{1/2} H W^{-1/2}` as a dense row-major symmetric matrix.
    pub fn symmetrized_matrix(&self, exec: crate::par::Execution) -> Vec<f64> {
        let n = self.grid.len();
        let s: Vec<f64> = self.weights().iter().map(|w| w.sqrt()).collect();
        let cols = crate::par::map(exec, n, |j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0 / s[j];
            let mut col = self.apply(&e);
            for (c, si) in col.iter_mut().zip(&s) {
                *c *= si;
            }
            col
        });
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = 0.5 * (cols[j][i] + cols[i][j]);
            }
        }
        m
    }
}

/// `H_{g+εh}` assembled over jets: one application yields `H u`, `H′[h]u`,
/// `H″[h,h]u` and `H‴[h,h,h]u` exactly (up to round-off).
#[derive(Clone, Debug)]
pub struct PerturbedSchrodinger {
    op: Schrodinger<Jet4>,
    /// `√det g` of the base metric for `L²(dV_g)` pairings.
    base_sqrt_det: Vec<f64>,
}

impl PerturbedSchrodinger {
    pub fn new(g: &MetricField, h: &crate::manifold::SymTensorField) -> crate::error::Result<Self> {
        let jet = MetricField::<Jet4>::perturbed::<4>(g, h)?;
        Ok(Self {
            op: Schrodinger::new(&jet),
            base_sqrt_det: g.sqrt_det().to_vec(),
        })
    }

    /// `[H u, H′u, H″u, H‴u]`.
    pub fn apply_all(&self, u: &[f64]) -> [Vec<f64>; 4] {
        let lifted: Vec<Jet4> = u.iter().map(|&v| Jet4::constant(v)).collect();
        let out = self.op.apply(&lifted);
        std::array::from_fn(|k| out.iter().map(|j| j.derivative(k)).collect())
    }

    /// `H^{(k)} u` for one order.
    pub fn apply(&self, order: usize, u: &[f64]) -> Vec<f64> {
        let lifted: Vec<Jet4> = u.iter().map(|&v| Jet4::constant(v)).collect();
        self.op
            .apply(&lifted)
            .iter()
            .map(|j| j.derivative(order))
            .collect()
    }

    /// ε-derivatives of the potential `R_{g+εh}`.
    pub fn potential_derivative(&self, order: usize) -> Vec<f64> {
        self.op
            .potential()
            .iter()
            .map(|j| j.derivative(order))
            .collect()
    }

    pub fn base_sqrt_det(&self) -> &[f64] {
        &self.base_sqrt_det
    }
}
