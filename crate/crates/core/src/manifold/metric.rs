use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::manifold::field::SymTensorField;
use crate::manifold::grid::PeriodicGrid;
use crate::scalar::Scalar;

/// Smallest eigenvalue a metric may have at any node.
pub const MIN_EIGENVALUE: f64 = 1e-12;

#[inline]
pub(crate) fn det<S: Scalar>(n: usize, m: &[S; 9]) -> S {
    if n == 2 {
        m[0] * m[4] - m[1] * m[3]
    } else {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }
}

#[inline]
pub(crate) fn inverse<S: Scalar>(n: usize, m: &[S; 9]) -> [S; 9] {
    let d = det(n, m).recip();
    let mut r = [S::zero(); 9];
    if n == 2 {
        r[0] = m[4] * d;
        r[1] = -m[1] * d;
        r[3] = -m[3] * d;
        r[4] = m[0] * d;
    } else {
        r[0] = (m[4] * m[8] - m[5] * m[7]) * d;
        r[1] = (m[2] * m[7] - m[1] * m[8]) * d;
        r[2] = (m[1] * m[5] - m[2] * m[4]) * d;
        r[3] = (m[5] * m[6] - m[3] * m[8]) * d;
        r[4] = (m[0] * m[8] - m[2] * m[6]) * d;
        r[5] = (m[2] * m[3] - m[0] * m[5]) * d;
        r[6] = (m[3] * m[7] - m[4] * m[6]) * d;
        r[7] = (m[1] * m[6] - m[0] * m[7]) * d;
        r[8] = (m[0] * m[4] - m[1] * m[3]) * d;
    }
    r
}

/// Eigenvalues of a real symmetric 2×2 or 3×3 matrix, ascending.
pub fn sym_eigenvalues(n: usize, m: &[f64; 9]) -> [f64; 3] {
    if n == 2 {
        let tr = 0.5 * (m[0] + m[4]);
        let d = (0.25 * (m[0] - m[4]).powi(2) + m[1] * m[1]).sqrt();
        return [tr - d, tr + d, 0.0];
    }
    let p1 = m[1] * m[1] + m[2] * m[2] + m[5] * m[5];
    let q = (m[0] + m[4] + m[8]) / 3.0;
    if p1 == 0.0 {
        let mut e = [m[0], m[4], m[8]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (m[0] - q).powi(2) + (m[4] - q).powi(2) + (m[8] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for i in 0..3 {
        b[i * 4] -= q;
    }
    for v in b.iter_mut() {
        *v /= p;
    }
    let r = (det(3, &b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(f64::total_cmp);
    e
}

/// Riemannian metric on the grid with cached inverse and volume density.
#[derive(Clone, Debug)]
pub struct MetricField<S: Scalar = f64> {
    g: SymTensorField<S>,
    inv: SymTensorField<S>,
    sqrt_det: Vec<S>,
}

impl<S: Scalar> MetricField<S> {
    /// Rejects any node whose matrix is not positive definite.
    pub fn new(g: SymTensorField<S>) -> Result<Self> {
        let grid = g.grid().clone();
        let n = grid.dim();
        let mut inv = SymTensorField::zeros(&grid);
        let mut sqrt_det = Vec::with_capacity(grid.len());
        for node in 0..grid.len() {
            let m = g.at(node);
            let mut vals = [0.0; 9];
            for (v, s) in vals.iter_mut().zip(&m) {
                *v = s.value();
            }
            let lo = sym_eigenvalues(n, &vals)[0];
            if !(lo > MIN_EIGENVALUE) {
                return Err(LabError::NotPositiveDefinite {
                    node,
                    min_eigenvalue: lo,
                });
            }
            inv.set_at(node, &inverse(n, &m));
            sqrt_det.push(det(n, &m).sqrt());
        }
        Ok(Self { g, inv, sqrt_det })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.g.grid()
    }

    pub fn tensor(&self) -> &SymTensorField<S> {
        &self.g
    }

    pub fn inverse(&self) -> &SymTensorField<S> {
        &self.inv
    }

    /// `√det g` per node.
    pub fn sqrt_det(&self) -> &[S] {
        &self.sqrt_det
    }

    /// Riemannian volume element per node, `√det g · ΔV`.
    pub fn volume_weights(&self) -> Vec<S> {
        let dv = self.grid().cell_volume();
        self.sqrt_det.iter().map(|s| s.scale(dv)).collect()
    }

    pub fn volume(&self) -> S {
        let dv = self.grid().cell_volume();
        let mut acc = S::zero();
        for s in &self.sqrt_det {
            acc += *s;
        }
        acc.scale(dv)
    }

    /// `g + ε h` as a jet-valued metric.
    pub fn perturbed<const K: usize>(
        g: &MetricField<f64>,
        h: &SymTensorField<f64>,
    ) -> Result<MetricField<crate::scalar::Jet<K>>> {
        let jet = g.g.zip_to_jet::<K>(h);
        MetricField::new(jet)
    }
}

impl MetricField<f64> {
    /// The Euclidean metric `δ`.
    pub fn flat(grid: &Arc<PeriodicGrid>) -> Self {
        Self::new(SymTensorField::identity(grid)).expect("identity is positive definite")
    }

    /// A constant-coefficient metric.
    pub fn constant(grid: &Arc<PeriodicGrid>, m: &[[f64; 3]; 3]) -> Result<Self> {
        Self::new(SymTensorField::constant(grid, m))
    }

    /// The conformal metric `e^{2u} δ`.
    pub fn conformal(grid: &Arc<PeriodicGrid>, u: &[f64]) -> Result<Self> {
        let n = grid.dim();
        let mut g = SymTensorField::zeros(grid);
        for i in 0..n {
            *g.ij_mut(i, i) = u.iter().map(|v| (2.0 * v).exp()).collect();
        }
        Self::new(g)
    }

    /// `g + s·h`, checked for positivity.
    pub fn plus(&self, s: f64, h: &SymTensorField<f64>) -> Result<Self> {
        Self::new(self.g.axpy(s, h))
    }

    /// Largest eigenvalue of `g^{-1}` over all nodes.
    pub fn max_inverse_eigenvalue(&self) -> f64 {
        let n = self.grid().dim();
        (0..self.grid().len())
            .map(|node| sym_eigenvalues(n, &self.inv.at(node))[n - 1])
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of `g` over all nodes.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.grid().dim();
        (0..self.grid().len())
            .map(|node| sym_eigenvalues(n, &self.g.at(node))[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `true` if every coefficient is constant to within `tol`.
    pub fn is_constant(&self, tol: f64) -> bool {
        self.g.components().iter().all(|c| {
            let c0 = c[0];
            c.iter().all(|v| (v - c0).abs() <= tol)
        })
    }
}

impl SymTensorField<f64> {
    fn zip_to_jet<const K: usize>(
        &self,
        h: &SymTensorField<f64>,
    ) -> SymTensorField<crate::scalar::Jet<K>> {
        let comps = self
            .components()
            .iter()
            .zip(h.components())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| crate::scalar::Jet::linear(x, y))
                    .collect()
            })
            .collect();
        SymTensorField::from_components(self.grid(), comps).expect("shape")
    }
}
