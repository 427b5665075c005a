use crate::error::{LabError, Result};
use crate::linalg::{axpy, dot, pcg, symmetric_eigen};
use crate::par::Execution;
use crate::spectral::schrodinger::Schrodinger;
use crate::spectral::EIGEN_TOLERANCE;

/// Complete eigendecomposition of `H`, eigenfields orthonormal in `L²(dV_g)`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    values: Vec<f64>,
    /// Column-major; column `k` is `u_k`.
    vectors: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
}

impl EigenBasis {
    pub fn dense(op: &Schrodinger) -> Result<Self> {
        let n = op.grid().len();
        let m = op.symmetrized_matrix(Execution::Parallel);
        let (values, mut vectors) = symmetric_eigen(n, &m)?;
        let weights = op.weights();
        let inv_s: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        for col in vectors.chunks_mut(n) {
            for (v, s) in col.iter_mut().zip(&inv_s) {
                *v *= s;
            }
        }
        Ok(Self {
            values,
            vectors,
            weights,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// `⟨u_k, b⟩_{L²(dV_g)}` for every `k`.
    pub fn coefficients(&self, b: &[f64]) -> Vec<f64> {
        let wb: Vec<f64> = b.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
        self.vectors.chunks(self.n).map(|u| dot(u, &wb)).collect()
    }

    /// `Σ_k c_k u_k`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (u, &ck) in self.vectors.chunks(self.n).zip(c) {
            if ck != 0.0 {
                axpy(&mut out, ck, u);
            }
        }
        out
    }
}

/// λ₁ and the ground state from the iterative solver.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub lambda: f64,
    /// Positive, `L²(dV_g)`-normalized.
    pub w: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Symmetrized operator `Â = W^{1/2} H W^{-1/2}` with helpers.
struct Symmetrized<'a> {
    op: &'a Schrodinger,
    s: Vec<f64>,
}

impl<'a> Symmetrized<'a> {
    fn new(op: &'a Schrodinger) -> Self {
        Self {
            op,
            s: op.weights().iter().map(|w| w.sqrt()).collect(),
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = v.iter().zip(&self.s).map(|(a, b)| a / b).collect();
        self.op
            .apply(&u)
            .iter()
            .zip(&self.s)
            .map(|(a, b)| a * b)
            .collect()
    }

    fn energy(&self, v: &[f64]) -> f64 {
        let u: Vec<f64> = v.iter().zip(&self.s).map(|(a, b)| a / b).collect();
        self.op.energy(&u)
    }

    fn precond(&self, shift: f64) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |r: &[f64]| {
            let mut p = r.to_vec();
            self.op
                .grid()
                .fourier_multiply(&mut p, |mu| 1.0 / (4.0 * mu.iter().sum::<f64>() + shift));
            p
        }
    }

    /// Solves `(Â − σ) x = b`, `σ` below the spectrum.
    fn shifted_solve(
        &self,
        sigma: f64,
        b: &[f64],
        x0: Option<Vec<f64>>,
        tol: f64,
    ) -> Result<Vec<f64>> {
        let min_pot = self
            .op
            .potential()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let pre_shift = (min_pot - sigma).max(0.05);
        let a = |v: &[f64]| {
            let mut y = self.apply(v);
            axpy(&mut y, -sigma, v);
            y
        };
        Ok(pcg(a, b, self.precond(pre_shift), x0, tol, 4000)?.x)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Shifted inverse iteration for the ground state alone. `guess` (an
/// unnormalized ground-state estimate, e.g. from a nearby metric) speeds up
/// convergence.
pub fn ground_state_fast(op: &Schrodinger, guess: Option<&[f64]>, tol: f64) -> Result<GroundState> {
    let sym = Symmetrized::new(op);
    let mut v: Vec<f64> = match guess {
        Some(g) => g.iter().zip(&sym.s).map(|(a, b)| a * b).collect(),
        None => sym.s.clone(),
    };
    normalize(&mut v);
    let safe_shift = op.potential().iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut residual = f64::INFINITY;
    for it in 0..200 {
        let hv = sym.apply(&v);
        let rq = sym.energy(&v);
        let r: Vec<f64> = hv.iter().zip(&v).map(|(a, b)| a - rq * b).collect();
        residual = dot(&r, &r).sqrt();
        if residual < tol {
            let mut w: Vec<f64> = v.iter().zip(&sym.s).map(|(a, b)| a / b).collect();
            if w.iter().sum::<f64>() < 0.0 {
                w.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(GroundState {
                lambda: rq,
                w,
                residual,
                iterations: it,
            });
        }
        // Far from convergence use a shift safely below the spectrum; close to
        // it, a tighter shift gives a much smaller contraction factor.
        let sigma = if residual > 1e-3 {
            safe_shift
        } else {
            (rq - (4.0 * residual).max(0.02)).max(safe_shift)
        };
        let solve_tol = (1e-3 * residual).clamp(1e-14, 1e-6);
        let next = match sym.shifted_solve(sigma, &v, None, solve_tol) {
            Ok(x) => x,
            Err(_) => sym.shifted_solve(safe_shift, &v, None, solve_tol)?,
        };
        v = next;
        normalize(&mut v);
    }
    Err(LabError::EigenNonConvergence {
        iterations: 200,
        residual,
    })
}

/// Refines a ground-state estimate by inverse iteration with the shift
/// `λ − gap/20`, keeping the iterate with the smallest residual. The dense
/// solver's eigenvectors carry residuals near `10⁻¹²`; quantities linear in
/// the eigenvector error (such as `⟨w, H′w⟩`) need better.
pub(crate) fn polish(op: &Schrodinger, w: &[f64], lambda: f64, gap: f64) -> Vec<f64> {
    let sym = Symmetrized::new(op);
    let residual = |v: &[f64]| {
        let hv = sym.apply(v);
        let rq = sym.energy(v);
        let r: Vec<f64> = hv.iter().zip(v).map(|(a, b)| a - rq * b).collect();
        dot(&r, &r).sqrt()
    };
    let mut v: Vec<f64> = w.iter().zip(&sym.s).map(|(a, b)| a * b).collect();
    normalize(&mut v);
    let mut best = (residual(&v), v);
    let shift = 0.05 * gap;
    for _ in 0..3 {
        let x0: Vec<f64> = best.1.iter().map(|x| x / shift).collect();
        let Ok(mut x) = sym.shifted_solve(lambda - shift, &best.1, Some(x0), 1e-13) else {
            break;
        };
        normalize(&mut x);
        let r = residual(&x);
        if r >= best.0 {
            break;
        }
        best = (r, x);
    }
    let mut out: Vec<f64> = best.1.iter().zip(&sym.s).map(|(a, b)| a / b).collect();
    if out.iter().sum::<f64>() < 0.0 {
        out.iter_mut().for_each(|x| *x = -*x);
    }
    out
}

/// Lowest `k` eigenpairs by block inverse subspace iteration with
/// Rayleigh–Ritz, for grids too large for the dense solver.
pub(crate) fn subspace_iteration(op: &Schrodinger, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let sym = Symmetrized::new(op);
    let grid = op.grid();
    let n = grid.len();
    let p = (k + 6).max(8);
    // Start from low Fourier modes, which span the flat low spectrum.
    let mut block: Vec<Vec<f64>> = vec![sym.s.clone()];
    for m in 0..p - 1 {
        let dim = grid.dim();
        let (axis, sine, freq) = (m % dim, (m / dim) % 2 == 1, (1 + m / (2 * dim)) as f64);
        block.push(
            (0..n)
                .map(|i| {
                    let x =
                        grid.coords(i)[axis] * 2.0 * std::f64::consts::PI / grid.periods()[axis];
                    // a tiny node-dependent tilt breaks exact symmetries of the start
                    let t = freq * x + 1e-4 * (i % 7) as f64;
                    if sine {
                        t.sin()
                    } else {
                        t.cos()
                    }
                })
                .collect(),
        );
    }
    let safe_shift = op.potential().iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut values = vec![0.0; p];
    let mut residual = f64::INFINITY;
    for _ in 0..500 {
        orthonormalize(&mut block)?;
        // Rayleigh–Ritz on the block.
        let hb: Vec<Vec<f64>> = block.iter().map(|v| sym.apply(v)).collect();
        let mut small = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                small[i * p + j] = 0.5 * (dot(&block[i], &hb[j]) + dot(&block[j], &hb[i]));
            }
        }
        let (vals, vecs) = symmetric_eigen(p, &small)?;
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|c| {
                    let mut out = vec![0.0; n];
                    for (r, s) in src.iter().enumerate() {
                        axpy(&mut out, vecs[c * p + r], s);
                    }
                    out
                })
                .collect()
        };
        block = rotate(&block);
        let hblock = rotate(&hb);
        values = vals;
        residual = (0..k)
            .map(|i| {
                let r: Vec<f64> = hblock[i]
                    .iter()
                    .zip(&block[i])
                    .map(|(a, b)| a - values[i] * b)
                    .collect();
                dot(&r, &r).sqrt()
            })
            .fold(0.0, f64::max);
        if residual < EIGEN_TOLERANCE {
            let vectors = block[..k]
                .iter()
                .map(|v| v.iter().zip(&sym.s).map(|(a, b)| a / b).collect())
                .collect();
            return Ok((values[..k].to_vec(), vectors));
        }
        block = block
            .iter()
            .map(|v| sym.shifted_solve(safe_shift, v, Some(v.clone()), 1e-13))
            .collect::<Result<_>>()?;
    }
    Err(LabError::EigenNonConvergence {
        iterations: 500,
        residual,
    })
}

fn orthonormalize(block: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..block.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = dot(&block[i], &block[j]);
                let (head, tail) = block.split_at_mut(i);
                axpy(&mut tail[0], -c, &head[j]);
            }
        }
        if normalize(&mut block[i]) < 1e-300 {
            return Err(LabError::EigenNonConvergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
    }
    Ok(())
}
