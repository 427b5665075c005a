use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{conformal_op, require_constant};
use crate::error::{LabError, Result};
use crate::linalg::{dot, symmetric_eigen};
use crate::manifold::norms::inner;
use crate::manifold::{
    sym_len, MetricField, ScalarField, SymTensorField, TensorOperators, VectorField,
};
use crate::par::{self, Execution};

/// Invariant subspace on which `Δ^L` is restricted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    All,
    KerDiv,
    Tt,
    /// `im C`, the conformal directions inside `ker div`.
    Conformal,
    /// `ℝg`.
    Scale,
}

impl FromStr for Sector {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all" => Ok(Self::All),
            "ker_div" => Ok(Self::KerDiv),
            "tt" => Ok(Self::Tt),
            "conformal" | "im_c" => Ok(Self::Conformal),
            "scale" => Ok(Self::Scale),
            _ => Err(LabError::Precondition(format!("unknown sector '{s}'"))),
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::KerDiv => "ker_div",
            Self::Tt => "tt",
            Self::Conformal => "conformal",
            Self::Scale => "scale",
        })
    }
}

/// The complete discrete spectrum of `Δ^L` on one sector, ascending.
#[derive(Clone, Debug, Serialize)]
pub struct SectorSpectrum {
    pub sector: Sector,
    pub values: Vec<f64>,
}

impl SectorSpectrum {
    pub fn lowest(&self, k: usize) -> &[f64] {
        &self.values[..k.min(self.values.len())]
    }

    /// The `k` largest eigenvalues, descending.
    pub fn top(&self, k: usize) -> Vec<f64> {
        self.values.iter().rev().take(k).copied().collect()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Number of eigenvalues with `|μ| ≤ tol`.
    pub fn kernel_dimension(&self, tol: f64) -> usize {
        self.values.iter().filter(|v| v.abs() <= tol).count()
    }
}

/// Lowest `k` eigenvalues of `Δ^L` on `sector`, ascending.
pub fn lichnerowicz_spectrum(g: &MetricField, sector: Sector, k: usize) -> Result<Vec<f64>> {
    Ok(sector_spectrum(g, sector, Execution::Parallel)?
        .lowest(k)
        .to_vec())
}

/// Relative threshold below which a singular value counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Full spectrum of `Δ^L` restricted to `sector` at a constant metric.
///
/// With constant coefficients every discrete operator maps the span of
/// tensor-product Fourier rows with fixed `(|k_1|, …, |k_n|)` into itself, so
/// the spectrum is assembled block by block: the actual discrete
/// Lichnerowicz, divergence and trace operators are applied to each block
/// basis and the restricted symmetric eigenproblem is solved exactly.
pub fn sector_spectrum(g: &MetricField, sector: Sector, exec: Execution) -> Result<SectorSpectrum> {
    require_constant(g)?;
    let grid = g.grid().clone();
    let n = grid.dim();
    let m = sym_len(n);
    let ops = TensorOperators::with_curvature(g);

    // Pairing of the constant unit tensors: Gram = P ⊗ I in the block basis.
    let units: Vec<SymTensorField> = (0..m)
        .map(|c| {
            let mut t = SymTensorField::zeros(&grid);
            t.comp_mut(c).iter_mut().for_each(|v| *v = 1.0);
            t
        })
        .collect();
    let len = grid.len() as f64;
    let pairing: Vec<f64> = (0..m * m)
        .map(|i| inner(g, &units[i / m], &units[i % m], None) / len)
        .collect();

    let groups: Vec<Vec<Vec<usize>>> = (0..n).map(|a| grid.wavenumber_groups(a)).collect();
    let mut blocks: Vec<Vec<usize>> = vec![vec![]];
    for gr in &groups {
        blocks = blocks
            .iter()
            .flat_map(|b| (0..gr.len()).map(move |k| [b.clone(), vec![k]].concat()))
            .collect();
    }
    if sector == Sector::Scale {
        blocks.truncate(1);
    }

    let per_block = par::map(exec, blocks.len(), |bi| -> Result<Vec<f64>> {
        // Row choices on every axis.
        let mut combos: Vec<Vec<usize>> = vec![vec![]];
        for (a, &k) in blocks[bi].iter().enumerate() {
            combos = combos
                .iter()
                .flat_map(|c| {
                    groups[a][k]
                        .iter()
                        .map(move |&r| [c.clone(), vec![r]].concat())
                })
                .collect();
        }
        let phis: Vec<Vec<f64>> = combos.iter().map(|c| grid.product_basis(c)).collect();
        let r = phis.len();
        let d = m * r;
        let coef_sym = |t: &SymTensorField| -> Vec<f64> {
            (0..m)
                .flat_map(|c| phis.iter().map(move |p| dot(t.comp(c), p)))
                .collect()
        };
        let coef_vec = |t: &VectorField| -> Vec<f64> {
            (0..n)
                .flat_map(|c| phis.iter().map(move |p| dot(t.comp(c), p)))
                .collect()
        };
        let basis_field = |j: usize| {
            let mut t = SymTensorField::zeros(&grid);
            t.comp_mut(j / r).copy_from_slice(&phis[j % r]);
            t
        };
        let gram = |x: &[f64], y: &[f64]| -> f64 {
            let mut s = 0.0;
            for c in 0..m {
                for c2 in 0..m {
                    let p = pairing[c * m + c2];
                    if p != 0.0 {
                        s += p * dot(&x[c * r..(c + 1) * r], &y[c2 * r..(c2 + 1) * r]);
                    }
                }
            }
            s
        };
        // Columns spanning the sector inside this block.
        let span: Vec<Vec<f64>> = match sector {
            Sector::All => (0..d)
                .map(|j| (0..d).map(|i| f64::from(u8::from(i == j))).collect())
                .collect(),
            Sector::KerDiv | Sector::Tt => {
                let mut rows: Vec<Vec<f64>> = Vec::new();
                let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
                    .map(|j| {
                        let e = basis_field(j);
                        let div = coef_vec(&ops.divergence(&e));
                        let tr = coef_sym(&scalar_as_tensor(&grid, &crate::manifold::trace(g, &e)));
                        (div, tr[..r].to_vec())
                    })
                    .collect();
                for i in 0..n * r {
                    rows.push(cols.iter().map(|c| c.0[i]).collect());
                }
                if sector == Sector::Tt {
                    for i in 0..r {
                        rows.push(cols.iter().map(|c| c.1[i]).collect());
                    }
                }
                null_space(d, &rows)?
            }
            Sector::Conformal => phis
                .iter()
                .map(|p| {
                    coef_sym(&conformal_op(
                        g,
                        &ScalarField::from_values(&grid, p.clone()).expect("shape"),
                    ))
                })
                .collect(),
            Sector::Scale => vec![coef_sym(g.tensor())],
        };
        let q = g_orthonormalize(&span, gram)?;
        if q.is_empty() {
            return Ok(Vec::new());
        }
        // Restricted operator in the G-orthonormal basis: M = Qᵀ G A Q.
        let aq: Vec<Vec<f64>> = q
            .iter()
            .map(|v| {
                let mut t = SymTensorField::zeros(&grid);
                for (j, &cj) in v.iter().enumerate() {
                    if cj != 0.0 {
                        for (o, p) in t.comp_mut(j / r).iter_mut().zip(&phis[j % r]) {
                            *o += cj * p;
                        }
                    }
                }
                coef_sym(&ops.lichnerowicz(&t))
            })
            .collect();
        let s = q.len();
        let mut mat = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                mat[i * s + j] = 0.5 * (gram(&q[i], &aq[j]) + gram(&q[j], &aq[i]));
            }
        }
        Ok(symmetric_eigen(s, &mat)?.0)
    });
    let mut values = Vec::new();
    for b in per_block {
        values.extend(b?);
    }
    values.sort_by(f64::total_cmp);
    Ok(SectorSpectrum { sector, values })
}

/// `u` stored in component 0, so tensor coefficient maps can project it.
fn scalar_as_tensor(
    grid: &std::sync::Arc<crate::manifold::PeriodicGrid>,
    u: &ScalarField,
) -> SymTensorField {
    let mut t = SymTensorField::zeros(grid);
    t.comp_mut(0).copy_from_slice(u.values());
    t
}

/// Orthonormal basis (Euclidean) of `{x : rows·x = 0}`.
fn null_space(d: usize, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut btb = vec![0.0; d * d];
    for row in rows {
        for i in 0..d {
            if row[i] != 0.0 {
                for j in 0..d {
                    btb[i * d + j] += row[i] * row[j];
                }
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(d, &btb)?;
    let scale = vals.last().copied().unwrap_or(0.0).max(1.0);
    Ok((0..d)
        .filter(|&k| vals[k] <= RANK_TOLERANCE * scale)
        .map(|k| vecs[k * d..(k + 1) * d].to_vec())
        .collect())
}

/// Basis of `span` orthonormal for the Gram form, dropping dependent columns.
fn g_orthonormalize(
    span: &[Vec<f64>],
    gram: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let s = span.len();
    if s == 0 {
        return Ok(Vec::new());
    }
    let mut gm = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..s {
            gm[i * s + j] = gram(&span[i], &span[j]);
        }
    }
    let (vals, vecs) = symmetric_eigen(s, &gm)?;
    // Sector vectors have O(1) coefficients or larger; anything far below is
    // roundoff from an operator annihilating a degenerate grid mode.
    let floor = RANK_TOLERANCE * vals.last().copied().unwrap_or(0.0).max(1.0);
    let d = span[0].len();
    Ok((0..s)
        .filter(|&k| vals[k] > floor)
        .map(|k| {
            let mut out = vec![0.0; d];
            for (i, col) in span.iter().enumerate() {
                let c = vecs[k * s + i] / vals[k].sqrt();
                for (o, x) in out.iter_mut().zip(col) {
                    *o += c * x;
                }
            }
            out
        })
        .collect())
}
