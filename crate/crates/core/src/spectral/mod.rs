//! Ground-state machinery for `H_g = −4Δ_g + R_g`: λ(g), `w_g`, `f_g`, the
//! low spectrum, resolvents and contour quadrature.

mod eigen;
mod schrodinger;

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use eigen::{ground_state_fast, EigenBasis, GroundState};
pub use schrodinger::{PerturbedSchrodinger, Schrodinger};

use crate::error::{LabError, Result};
use crate::linalg::{dot, pcg};
use crate::manifold::{MetricField, ScalarField};

/// Smallest admissible `λ₂ − λ₁`.
pub const GAP_TOLERANCE: f64 = 1e-8;
/// Residual target for eigenpairs, `‖Hw − λw‖_{L²}`.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
/// Contour quadrature defaults.
pub const CONTOUR_POINTS: usize = 64;

/// Relative residual target of the reduced-resolvent CG solve.
const RESOLVENT_TOLERANCE: f64 = 1e-13;

/// Which eigensolver computes the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense up to 4096 nodes, iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Largest node count handled by the dense solver under [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 4096;

/// λ(g), ground state, minimizer and low spectrum of one metric.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub lambda: f64,
    pub w: ScalarField,
    pub f: ScalarField,
    /// Lowest eigenvalues, ascending; `spectrum[0] == lambda`.
    pub spectrum: Vec<f64>,
    pub gap: f64,
    pub volume: f64,
    /// `‖H w − λ w‖_{L²(dV_g)}`.
    pub residual: f64,
    op: Arc<Schrodinger>,
    weights: Vec<f64>,
    basis: Option<Arc<EigenBasis>>,
}

/// JSON summary of a [`SpectralData`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectralSummary {
    pub lambda: f64,
    pub spectrum: Vec<f64>,
    pub gap: f64,
    pub vol: f64,
}

/// `ground_state` with the default solver choice.
pub fn ground_state(g: &MetricField, k: usize) -> Result<SpectralData> {
    ground_state_with(g, k, EigenMethod::Auto)
}

pub fn ground_state_with(g: &MetricField, k: usize, method: EigenMethod) -> Result<SpectralData> {
    if k < 2 {
        return Err(LabError::Precondition(format!(
            "need at least 2 eigenvalues, asked for {k}"
        )));
    }
    let op = Arc::new(Schrodinger::new(g));
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Iterative => false,
        EigenMethod::Auto => g.grid().len() <= DENSE_LIMIT,
    };
    let (values, vectors, basis) = if dense {
        let basis = EigenBasis::dense(&op)?;
        let k = k.min(basis.len());
        let mut vecs: Vec<Vec<f64>> = (0..k).map(|i| basis.vector(i).to_vec()).collect();
        let values = basis.values();
        vecs[0] = eigen::polish(&op, &vecs[0], values[0], values[1] - values[0]);
        (values[..k].to_vec(), vecs, Some(Arc::new(basis)))
    } else {
        let (vals, vecs) = eigen::subspace_iteration(&op, k)?;
        (vals, vecs, None)
    };
    SpectralData::assemble(g, op, values, vectors, basis)
}

impl SpectralData {
    fn assemble(
        g: &MetricField,
        op: Arc<Schrodinger>,
        mut values: Vec<f64>,
        mut vectors: Vec<Vec<f64>>,
        basis: Option<Arc<EigenBasis>>,
    ) -> Result<Self> {
        let weights = op.weights();
        let w = &mut vectors[0];
        if w.iter().sum::<f64>() < 0.0 {
            w.iter_mut().for_each(|v| *v = -*v);
        }
        let norm = dot(&weights, &w.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        w.iter_mut().for_each(|v| *v /= norm);
        if let Some(node) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(LabError::Precondition(format!(
                "ground state not positive at node {node}"
            )));
        }
        let lambda = op.energy(w);
        values[0] = lambda;
        let gap = values[1] - values[0];
        if !(gap > GAP_TOLERANCE) {
            return Err(LabError::GapCollapse { gap });
        }
        let hw = op.apply(w);
        let r: Vec<f64> = hw
            .iter()
            .zip(w.iter())
            .map(|(a, b)| a - lambda * b)
            .collect();
        let residual = op.inner(&r, &r).sqrt();
        let grid = g.grid();
        let wf = ScalarField::from_values(grid, w.clone())?;
        let f = ScalarField::from_values(grid, w.iter().map(|v| -2.0 * v.ln()).collect())?;
        Ok(Self {
            lambda,
            w: wf,
            f,
            spectrum: values,
            gap,
            volume: g.volume(),
            residual,
            op,
            weights,
            basis,
        })
    }

    pub fn operator(&self) -> &Schrodinger {
        &self.op
    }

    /// `√det g · ΔV` per node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> Option<&EigenBasis> {
        self.basis.as_deref()
    }

    /// `⟨a, b⟩_{L²(dV_g)}`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    fn inner_c(&self, a: &[f64], b: &[Complex64]) -> Complex64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| y * (x * w))
            .sum()
    }

    /// `b − ⟨w, b⟩ w`.
    pub fn deflate(&self, b: &[f64]) -> Vec<f64> {
        let w = self.w.values();
        let c = self.inner(w, b);
        b.iter().zip(w).map(|(x, y)| x - c * y).collect()
    }

    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            lambda: self.lambda,
            spectrum: self.spectrum.clone(),
            gap: self.gap,
            vol: self.volume,
        }
    }

    /// Writes `summary.json`, `w.lfld` and `f.lfld` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary())?,
        )?;
        crate::manifold::snapshot::write_field(&dir.join("w.lfld"), &self.w)?;
        crate::manifold::snapshot::write_field(&dir.join("f.lfld"), &self.f)?;
        Ok(())
    }

    /// Reduced resolvent `S b = (λ₁ − H)^{-1}(b − ⟨w,b⟩w)` by a deflated,
    /// preconditioned CG solve (independent of any stored eigenbasis).
    pub fn reduced_resolvent(&self, b: &[f64]) -> Result<Vec<f64>> {
        let s: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let what: Vec<f64> = self.w.values().iter().zip(&s).map(|(a, b)| a * b).collect();
        let project = |v: &mut Vec<f64>| {
            let c = dot(&what, v);
            v.iter_mut().zip(&what).for_each(|(x, y)| *x -= c * y);
        };
        let lambda = self.lambda;
        let apply = |v: &[f64]| {
            let mut p = v.to_vec();
            project(&mut p);
            let u: Vec<f64> = p.iter().zip(&s).map(|(a, b)| a / b).collect();
            let hu = self.op.apply(&u);
            let mut out: Vec<f64> = hu
                .iter()
                .zip(&u)
                .zip(&s)
                .map(|((h, x), si)| (h - lambda * x) * si)
                .collect();
            project(&mut out);
            out
        };
        let grid = self.op.grid().clone();
        let precond = |v: &[f64]| {
            let mut p = v.to_vec();
            project(&mut p);
            grid.fourier_multiply(&mut p, |mu| 1.0 / (4.0 * mu.iter().sum::<f64>() + 0.25));
            project(&mut p);
            p
        };
        let mut rhs: Vec<f64> = b.iter().zip(&s).map(|(a, b)| a * b).collect();
        let full = dot(&rhs, &rhs).sqrt();
        project(&mut rhs);
        if dot(&rhs, &rhs).sqrt() <= 1e-14 * full {
            return Ok(vec![0.0; b.len()]);
        }
        // Deflating w leaves an absolute error ~ε√N‖b‖ in the right-hand
        // side; when b is mostly along w that floor exceeds the target.
        let proj = dot(&rhs, &rhs).sqrt();
        let floor = 4.0 * f64::EPSILON * (rhs.len() as f64).sqrt() * full / proj;
        let out = pcg(
            apply,
            &rhs,
            precond,
            None,
            RESOLVENT_TOLERANCE.max(floor),
            2000,
        )?;
        let mut y = out.x;
        project(&mut y);
        Ok(y.iter().zip(&s).map(|(a, b)| -a / b).collect())
    }

    /// Reduced resolvent from the stored eigenbasis:
    /// `Σ_{k≥2} u_k ⟨u_k, b⟩ / (λ₁ − λ_k)`.
    pub fn reduced_resolvent_spectral(&self, b: &[f64]) -> Result<Vec<f64>> {
        let basis = self.require_basis()?;
        let coef = basis.coefficients(b);
        let l1 = basis.values()[0];
        let scaled: Vec<f64> = coef
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 {
                    0.0
                } else {
                    c / (l1 - basis.values()[k])
                }
            })
            .collect();
        Ok(basis.synthesize(&scaled))
    }

    fn require_basis(&self) -> Result<&EigenBasis> {
        self.basis
            .as_deref()
            .ok_or_else(|| LabError::Precondition("operation needs the dense eigenbasis".into()))
    }

    /// Solves `(z − H) x = b` for complex `z` off the spectrum.
    pub fn resolvent_solve(&self, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let basis = self.require_basis()?;
        let dist = basis
            .values()
            .iter()
            .map(|&l| (z - l).norm())
            .fold(f64::INFINITY, f64::min);
        if dist < 1e-8 * (1.0 + z.norm()) {
            return Err(LabError::NearSpectrum {
                z: format!("{z}"),
                distance: dist,
            });
        }
        let re: Vec<f64> = b.iter().map(|c| c.re).collect();
        let im: Vec<f64> = b.iter().map(|c| c.im).collect();
        let cr = basis.coefficients(&re);
        let ci = basis.coefficients(&im);
        let coef: Vec<Complex64> = cr
            .iter()
            .zip(&ci)
            .zip(basis.values())
            .map(|((a, b), &l)| Complex64::new(*a, *b) / (z - l))
            .collect();
        let xr = basis.synthesize(&coef.iter().map(|c| c.re).collect::<Vec<_>>());
        let xi = basis.synthesize(&coef.iter().map(|c| c.im).collect::<Vec<_>>());
        Ok(xr
            .into_iter()
            .zip(xi)
            .map(|(a, b)| Complex64::new(a, b))
            .collect())
    }

    /// Default contour radius `(λ₂ − λ₁)/4`.
    pub fn default_radius(&self) -> f64 {
        self.gap / 4.0
    }

    /// `(1/2πi) ∮_{|z−λ₁|=r} F(z) dz` by the `points`-point trapezoidal rule.
    pub fn contour_integrate(
        &self,
        radius: f64,
        points: usize,
        f: impl Fn(Complex64) -> Result<Complex64>,
    ) -> Result<Complex64> {
        let limit = self.gap / 2.0;
        if !(radius > 0.0 && radius < limit) {
            return Err(LabError::ContourRadius { radius, limit });
        }
        if points < 32 {
            return Err(LabError::Precondition(format!(
                "contour needs at least 32 points, got {points}"
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..points {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / points as f64;
            let dz = Complex64::from_polar(radius, theta);
            acc += f(Complex64::new(self.lambda, 0.0) + dz)? * dz;
        }
        Ok(acc / points as f64)
    }

    /// `⟨l, A₁ R(z) A₂ R(z) ⋯ R(z) A_m r⟩` for real operators `A_i` (applied
    /// to real and imaginary parts separately) and the full resolvent `R(z)`.
    pub fn resolvent_chain(
        &self,
        z: Complex64,
        left: &[f64],
        ops: &[&dyn Fn(&[f64]) -> Vec<f64>],
        right: &[f64],
    ) -> Result<Complex64> {
        let apply = |op: &dyn Fn(&[f64]) -> Vec<f64>, v: &[Complex64]| -> Vec<Complex64> {
            let re = op(&v.iter().map(|c| c.re).collect::<Vec<_>>());
            let im = op(&v.iter().map(|c| c.im).collect::<Vec<_>>());
            re.into_iter()
                .zip(im)
                .map(|(a, b)| Complex64::new(a, b))
                .collect()
        };
        let mut v: Vec<Complex64> = right.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for (i, op) in ops.iter().enumerate().rev() {
            if i + 1 < ops.len() {
                v = self.resolvent_solve(z, &v)?;
            }
            v = apply(*op, &v);
        }
        Ok(self.inner_c(left, &v))
    }
}
