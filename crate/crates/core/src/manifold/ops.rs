//! Tensor calculus on the periodic grid.
//!
//! Conventions (pinned by the analytic tests):
//! - `Δ` has nonpositive spectrum; `Δu = (1/√g)[D_i(√g g^{ij} D_j u) − Σ_a c_a P_a u]`
//!   where `P_a` projects onto the Nyquist mode of axis `a`.
//! - `(div h)_k = g^{ij} ∇_i h_{jk}`; `div*` is its exact discrete adjoint in
//!   the `L²(dV_g)` pairings, so `div* X = −½ L_X g`.
//! - `R_{abcd} = g_{ae} R^e_{bcd}` with `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + …`,
//!   `Rc_{bd} = R^a_{bad}`; the unit sphere has `R_{abcd} = g_ac g_bd − g_ad g_bc`.
//! - `Δ^L h = Δh + 2 R_{ipjq} h^{pq}` with `Δ = −∇*∇` on symmetric 2-tensors.

use crate::manifold::field::{sym_index, sym_len, ScalarField, SymTensorField, VectorField};
use crate::manifold::grid::PeriodicGrid;
use crate::manifold::metric::MetricField;
use crate::scalar::Scalar;

/// `D_a g_c` for every axis `a` and packed component `c`, stored at `a * m + c`.
pub fn metric_derivatives<S: Scalar>(g: &MetricField<S>) -> Vec<Vec<S>> {
    let grid = g.grid();
    let n = grid.dim();
    let m = sym_len(n);
    let mut out = Vec::with_capacity(n * m);
    for a in 0..n {
        for c in 0..m {
            out.push(grid.diff(a, g.tensor().comp(c)));
        }
    }
    out
}

/// Levi-Civita coefficients `Γ^k_{ij}`, stored at `k * m + sym(i, j)`.
#[derive(Clone, Debug)]
pub struct Christoffel<S: Scalar = f64> {
    pub n: usize,
    pub data: Vec<Vec<S>>,
}

impl<S: Scalar> Christoffel<S> {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize, node: usize) -> S {
        self.data[k * sym_len(self.n) + sym_index(self.n, i, j)][node]
    }

    /// All `n³` values at one node, `[k][i][j]` flattened as `(k*3+i)*3+j`.
    #[inline]
    pub fn at(&self, node: usize) -> [S; 27] {
        let n = self.n;
        let m = sym_len(n);
        let mut out = [S::zero(); 27];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = self.data[k * m + sym_index(n, i, j)][node];
                    out[(k * 3 + i) * 3 + j] = v;
                    out[(k * 3 + j) * 3 + i] = v;
                }
            }
        }
        out
    }
}

pub fn christoffel<S: Scalar>(g: &MetricField<S>) -> Christoffel<S> {
    let dg = metric_derivatives(g);
    christoffel_from(g, &dg)
}

pub(crate) fn christoffel_from<S: Scalar>(g: &MetricField<S>, dg: &[Vec<S>]) -> Christoffel<S> {
    let grid = g.grid();
    let n = grid.dim();
    let m = sym_len(n);
    let mut data = vec![vec![S::zero(); grid.len()]; n * m];
    let d = |a: usize, i: usize, j: usize, node: usize| dg[a * m + sym_index(n, i, j)][node];
    for node in 0..grid.len() {
        let ginv = g.inverse().at(node);
        for i in 0..n {
            for j in i..n {
                // Γ_{l,ij} = ½ (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
                let mut lower = [S::zero(); 3];
                for (l, low) in lower.iter_mut().enumerate().take(n) {
                    *low = (d(i, j, l, node) + d(j, i, l, node) - d(l, i, j, node)).scale(0.5);
                }
                for k in 0..n {
                    let mut s = S::zero();
                    for l in 0..n {
                        s += ginv[k * 3 + l] * lower[l];
                    }
                    data[k * m + sym_index(n, i, j)][node] = s;
                }
            }
        }
    }
    Christoffel { n, data }
}

/// Riemann, Ricci and scalar curvature of a metric.
#[derive(Clone, Debug)]
pub struct Curvature<S: Scalar = f64> {
    n: usize,
    /// `R_{abcd}` stored at `((a*n + b)*n + c)*n + d`.
    pub riemann: Vec<Vec<S>>,
    pub ricci: SymTensorField<S>,
    pub scalar: ScalarField<S>,
}

impl<S: Scalar> Curvature<S> {
    #[inline]
    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize, node: usize) -> S {
        let n = self.n;
        self.riemann[((a * n + b) * n + c) * n + d][node]
    }
}

pub fn curvature<S: Scalar>(g: &MetricField<S>) -> Curvature<S> {
    let gamma = christoffel(g);
    curvature_from(g, &gamma)
}

pub(crate) fn curvature_from<S: Scalar>(
    g: &MetricField<S>,
    gamma: &Christoffel<S>,
) -> Curvature<S> {
    let grid = g.grid();
    let n = grid.dim();
    let m = sym_len(n);
    // dgamma[(c * n + k) * m + sym(i,j)] = D_c Γ^k_{ij}
    let mut dgamma = Vec::with_capacity(n * n * m);
    for c in 0..n {
        for comp in &gamma.data {
            dgamma.push(grid.diff(c, comp));
        }
    }
    let dgam = |c: usize, k: usize, i: usize, j: usize, node: usize| {
        dgamma[(c * n + k) * m + sym_index(n, i, j)][node]
    };
    let n4 = n * n * n * n;
    let mut riemann = vec![vec![S::zero(); grid.len()]; n4];
    let mut ricci = SymTensorField::zeros(grid);
    let mut scalar = vec![S::zero(); grid.len()];
    for node in 0..grid.len() {
        let gm = g.tensor().at(node);
        let ginv = g.inverse().at(node);
        let gam = gamma.at(node);
        let gm3 = |k: usize, i: usize, j: usize| gam[(k * 3 + i) * 3 + j];
        // upper[a][b][c][d] = R^a_{bcd}
        let mut upper = [S::zero(); 81];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        if c == d {
                            continue;
                        }
                        let mut v = dgam(c, a, d, b, node) - dgam(d, a, c, b, node);
                        for e in 0..n {
                            v += gm3(a, c, e) * gm3(e, d, b) - gm3(a, d, e) * gm3(e, c, b);
                        }
                        upper[((a * 3 + b) * 3 + c) * 3 + d] = v;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = S::zero();
                        for e in 0..n {
                            v += gm[a * 3 + e] * upper[((e * 3 + b) * 3 + c) * 3 + d];
                        }
                        riemann[((a * n + b) * n + c) * n + d][node] = v;
                    }
                }
            }
        }
        let mut r = S::zero();
        for b in 0..n {
            for d in b..n {
                let mut v = S::zero();
                for a in 0..n {
                    v += upper[((a * 3 + b) * 3 + a) * 3 + d];
                }
                // symmetrize the discrete Ricci tensor
                let mut w = S::zero();
                for a in 0..n {
                    w += upper[((a * 3 + d) * 3 + a) * 3 + b];
                }
                let rc = (v + w).scale(0.5);
                ricci.ij_mut(b, d)[node] = rc;
                let weight = if b == d {
                    ginv[b * 3 + d]
                } else {
                    ginv[b * 3 + d].scale(2.0)
                };
                r += weight * rc;
            }
        }
        scalar[node] = r;
    }
    Curvature {
        n,
        riemann,
        ricci,
        scalar: ScalarField::from_values(grid, scalar).expect("shape"),
    }
}

/// Scalar curvature `R_g`.
pub fn scalar_curvature<S: Scalar>(g: &MetricField<S>) -> ScalarField<S> {
    curvature(g).scalar
}

/// `D u` as a one-form.
pub fn gradient<S: Scalar>(u: &ScalarField<S>) -> VectorField<S> {
    let grid = u.grid();
    let comps = (0..grid.dim()).map(|a| grid.diff(a, u.values())).collect();
    VectorField::from_components(grid, comps).expect("shape")
}

/// `√g g^{ij}` per node, packed.
pub(crate) fn flux_coefficients<S: Scalar>(g: &MetricField<S>) -> Vec<Vec<S>> {
    let sd = g.sqrt_det();
    g.inverse()
        .components()
        .iter()
        .map(|c| c.iter().zip(sd).map(|(&a, &s)| a * s).collect())
        .collect()
}

/// Divergence-form Laplacian with precomputed flux coefficients `√g g^{ij}`
/// and inverse density `1/√g`.
pub(crate) fn laplacian_with<S: Scalar>(
    grid: &PeriodicGrid,
    flux: &[Vec<S>],
    inv_sqrt_det: &[S],
    u: &[S],
) -> Vec<S> {
    let n = grid.dim();
    let du: Vec<Vec<S>> = (0..n).map(|a| grid.diff(a, u)).collect();
    let mut acc = grid.nyquist_penalty(u);
    for v in acc.iter_mut() {
        *v = -*v;
    }
    for i in 0..n {
        let mut f = vec![S::zero(); u.len()];
        for j in 0..n {
            let coef = &flux[sym_index(n, i, j)];
            for ((fv, c), d) in f.iter_mut().zip(coef).zip(&du[j]) {
                *fv += *c * *d;
            }
        }
        let df = grid.diff(i, &f);
        for (a, d) in acc.iter_mut().zip(df) {
            *a += d;
        }
    }
    for (a, s) in acc.iter_mut().zip(inv_sqrt_det) {
        *a *= *s;
    }
    acc
}

pub fn laplace_beltrami<S: Scalar>(g: &MetricField<S>, u: &ScalarField<S>) -> ScalarField<S> {
    let flux = flux_coefficients(g);
    let inv: Vec<S> = g.sqrt_det().iter().map(|s| s.recip()).collect();
    let out = laplacian_with(g.grid(), &flux, &inv, u.values());
    ScalarField::from_values(g.grid(), out).expect("shape")
}

/// `Hess u = D²u − Γ·Du`.
pub fn hessian<S: Scalar>(g: &MetricField<S>, u: &ScalarField<S>) -> SymTensorField<S> {
    let gamma = christoffel(g);
    hessian_with(&gamma, u)
}

pub(crate) fn hessian_with<S: Scalar>(
    gamma: &Christoffel<S>,
    u: &ScalarField<S>,
) -> SymTensorField<S> {
    let grid = u.grid();
    let n = grid.dim();
    let du: Vec<Vec<S>> = (0..n).map(|a| grid.diff(a, u.values())).collect();
    let mut h = SymTensorField::zeros(grid);
    for i in 0..n {
        for j in i..n {
            let ddu = grid.diff(i, &du[j]);
            let out = h.ij_mut(i, j);
            for node in 0..grid.len() {
                let mut v = ddu[node];
                for k in 0..n {
                    v -= gamma.get(k, i, j, node) * du[k][node];
                }
                out[node] = v;
            }
        }
    }
    h
}

/// `(div h)_k = (1/√g) D_i(√g g^{ij} h_{jk}) − ½ h^{il} D_k g_{il}`.
pub fn divergence<S: Scalar>(g: &MetricField<S>, h: &SymTensorField<S>) -> VectorField<S> {
    let dg = metric_derivatives(g);
    divergence_with(g, &dg, h)
}

pub(crate) fn divergence_with<S: Scalar>(
    g: &MetricField<S>,
    dg: &[Vec<S>],
    h: &SymTensorField<S>,
) -> VectorField<S> {
    let grid = g.grid();
    let n = grid.dim();
    let m = sym_len(n);
    let len = grid.len();
    let sd = g.sqrt_det();
    // flux[i][k] = √g g^{ij} h_{jk}; upper[sym(i,l)] = h^{il}
    let mut flux = vec![vec![S::zero(); len]; n * n];
    let mut upper = vec![vec![S::zero(); len]; m];
    for node in 0..len {
        let gi = g.inverse().at(node);
        let hm = h.at(node);
        let mut mixed = [S::zero(); 9];
        for i in 0..n {
            for k in 0..n {
                let mut s = S::zero();
                for j in 0..n {
                    s += gi[i * 3 + j] * hm[j * 3 + k];
                }
                mixed[i * 3 + k] = s;
                flux[i * n + k][node] = s * sd[node];
            }
        }
        for i in 0..n {
            for l in i..n {
                let mut s = S::zero();
                for k in 0..n {
                    s += mixed[i * 3 + k] * gi[k * 3 + l];
                }
                upper[sym_index(n, i, l)][node] = s;
            }
        }
    }
    let mut comps = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = vec![S::zero(); len];
        for i in 0..n {
            let d = grid.diff(i, &flux[i * n + k]);
            for (a, v) in acc.iter_mut().zip(d) {
                *a += v;
            }
        }
        for node in 0..len {
            let mut corr = S::zero();
            for i in 0..n {
                for l in 0..n {
                    corr += upper[sym_index(n, i, l)][node] * dg[k * m + sym_index(n, i, l)][node];
                }
            }
            acc[node] = acc[node] / sd[node] - corr.scale(0.5);
        }
        comps.push(acc);
    }
    VectorField::from_components(grid, comps).expect("shape")
}

/// Exact discrete adjoint of [`divergence`]:
/// `(div* ω)_{ij} = −½ (g_{jk} D_i ω^k + g_{ik} D_j ω^k) − ½ ω^k D_k g_{ij}`.
pub fn divergence_adjoint<S: Scalar>(g: &MetricField<S>, x: &VectorField<S>) -> SymTensorField<S> {
    let dg = metric_derivatives(g);
    divergence_adjoint_with(g, &dg, x)
}

pub(crate) fn divergence_adjoint_with<S: Scalar>(
    g: &MetricField<S>,
    dg: &[Vec<S>],
    x: &VectorField<S>,
) -> SymTensorField<S> {
    let grid = g.grid();
    let n = grid.dim();
    let m = sym_len(n);
    let len = grid.len();
    let mut raised = vec![vec![S::zero(); len]; n];
    for node in 0..len {
        let gi = g.inverse().at(node);
        for k in 0..n {
            let mut s = S::zero();
            for l in 0..n {
                s += gi[k * 3 + l] * x.comp(l)[node];
            }
            raised[k][node] = s;
        }
    }
    // draised[i * n + k] = D_i ω^k
    let mut draised = Vec::with_capacity(n * n);
    for i in 0..n {
        for r in &raised {
            draised.push(grid.diff(i, r));
        }
    }
    let mut out = SymTensorField::zeros(grid);
    for node in 0..len {
        let gm = g.tensor().at(node);
        for i in 0..n {
            for j in i..n {
                let mut v = S::zero();
                for k in 0..n {
                    v += gm[j * 3 + k] * draised[i * n + k][node]
                        + gm[i * 3 + k] * draised[j * n + k][node];
                    v += raised[k][node] * dg[k * m + sym_index(n, i, j)][node];
                }
                out.ij_mut(i, j)[node] = v.scale(-0.5);
            }
        }
    }
    out
}

/// Codifferential-style divergence of a one-form: `(1/√g) D_l(√g g^{kl} ω_k)`.
pub fn divergence_form<S: Scalar>(g: &MetricField<S>, w: &VectorField<S>) -> ScalarField<S> {
    let grid = g.grid();
    let n = grid.dim();
    let len = grid.len();
    let sd = g.sqrt_det();
    let mut acc = vec![S::zero(); len];
    for l in 0..n {
        let mut f = vec![S::zero(); len];
        for k in 0..n {
            let gi = g.inverse().ij(k, l);
            for node in 0..len {
                f[node] += sd[node] * gi[node] * w.comp(k)[node];
            }
        }
        for (a, d) in acc.iter_mut().zip(grid.diff(l, &f)) {
            *a += d;
        }
    }
    for (a, s) in acc.iter_mut().zip(sd) {
        *a = *a / *s;
    }
    ScalarField::from_values(grid, acc).expect("shape")
}

/// `tr_g h = g^{ij} h_{ij}`.
pub fn trace<S: Scalar>(g: &MetricField<S>, h: &SymTensorField<S>) -> ScalarField<S> {
    let grid = g.grid();
    let n = grid.dim();
    let vals = (0..grid.len())
        .map(|node| {
            let gi = g.inverse().at(node);
            let hm = h.at(node);
            let mut s = S::zero();
            for i in 0..n {
                for j in 0..n {
                    s += gi[i * 3 + j] * hm[i * 3 + j];
                }
            }
            s
        })
        .collect();
    ScalarField::from_values(grid, vals).expect("shape")
}

/// `u · g` for a scalar `u`.
pub fn scalar_times_metric<S: Scalar>(g: &MetricField<S>, u: &ScalarField<S>) -> SymTensorField<S> {
    let comps = g
        .tensor()
        .components()
        .iter()
        .map(|c| c.iter().zip(u.values()).map(|(&a, &b)| a * b).collect())
        .collect();
    SymTensorField::from_components(g.grid(), comps).expect("shape")
}

/// Pointwise `⟨h, k⟩_g = g^{ac} g^{bd} h_{ab} k_{cd}`.
pub fn inner_pointwise<S: Scalar>(
    g: &MetricField<S>,
    h: &SymTensorField<S>,
    k: &SymTensorField<S>,
) -> Vec<S> {
    let n = g.grid().dim();
    (0..g.grid().len())
        .map(|node| {
            let gi = g.inverse().at(node);
            let a = h.at(node);
            let b = k.at(node);
            sym_pair(n, &gi, &a, &b)
        })
        .collect()
}

#[inline]
pub(crate) fn sym_pair<S: Scalar>(n: usize, gi: &[S; 9], a: &[S; 9], b: &[S; 9]) -> S {
    // tr(G a G b)
    let mut ga = [S::zero(); 9];
    let mut gb = [S::zero(); 9];
    for i in 0..n {
        for j in 0..n {
            let mut s = S::zero();
            let mut t = S::zero();
            for k in 0..n {
                s += gi[i * 3 + k] * a[k * 3 + j];
                t += gi[i * 3 + k] * b[k * 3 + j];
            }
            ga[i * 3 + j] = s;
            gb[i * 3 + j] = t;
        }
    }
    let mut s = S::zero();
    for i in 0..n {
        for j in 0..n {
            s += ga[i * 3 + j] * gb[j * 3 + i];
        }
    }
    s
}

/// Pointwise `g^{kl} ω_k η_l`.
pub fn covector_inner_pointwise<S: Scalar>(
    g: &MetricField<S>,
    a: &VectorField<S>,
    b: &VectorField<S>,
) -> Vec<S> {
    let n = g.grid().dim();
    (0..g.grid().len())
        .map(|node| {
            let gi = g.inverse().at(node);
            let mut s = S::zero();
            for k in 0..n {
                for l in 0..n {
                    s += gi[k * 3 + l] * a.comp(k)[node] * b.comp(l)[node];
                }
            }
            s
        })
        .collect()
}

/// `∫ f dV_g` summed in node order.
pub fn integrate<S: Scalar>(g: &MetricField<S>, f: &[S]) -> S {
    let mut acc = S::zero();
    for (v, s) in f.iter().zip(g.sqrt_det()) {
        acc += *v * *s;
    }
    acc.scale(g.grid().cell_volume())
}

/// `⟨h, k⟩_{L²(dV_g)}` for symmetric 2-tensors.
pub fn l2_inner_sym<S: Scalar>(
    g: &MetricField<S>,
    h: &SymTensorField<S>,
    k: &SymTensorField<S>,
) -> S {
    integrate(g, &inner_pointwise(g, h, k))
}

pub fn l2_inner_covector<S: Scalar>(
    g: &MetricField<S>,
    a: &VectorField<S>,
    b: &VectorField<S>,
) -> S {
    integrate(g, &covector_inner_pointwise(g, a, b))
}

pub fn l2_inner_scalar<S: Scalar>(g: &MetricField<S>, u: &ScalarField<S>, v: &ScalarField<S>) -> S {
    let p: Vec<S> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a * b)
        .collect();
    integrate(g, &p)
}

/// Cached geometry for repeated tensor-Laplacian applications at one metric.
#[derive(Clone, Debug)]
pub struct TensorOperators<S: Scalar = f64> {
    metric: MetricField<S>,
    dg: Vec<Vec<S>>,
    gamma: Christoffel<S>,
    curv: Option<Curvature<S>>,
}

impl<S: Scalar> TensorOperators<S> {
    pub fn new(g: &MetricField<S>) -> Self {
        let dg = metric_derivatives(g);
        let gamma = christoffel_from(g, &dg);
        Self {
            metric: g.clone(),
            dg,
            gamma,
            curv: None,
        }
    }

    pub fn with_curvature(g: &MetricField<S>) -> Self {
        let mut ops = Self::new(g);
        ops.curv = Some(curvature_from(g, &ops.gamma));
        ops
    }

    pub fn metric(&self) -> &MetricField<S> {
        &self.metric
    }

    pub fn christoffel(&self) -> &Christoffel<S> {
        &self.gamma
    }

    pub fn curvature(&self) -> Option<&Curvature<S>> {
        self.curv.as_ref()
    }

    pub fn divergence(&self, h: &SymTensorField<S>) -> VectorField<S> {
        divergence_with(&self.metric, &self.dg, h)
    }

    pub fn divergence_adjoint(&self, x: &VectorField<S>) -> SymTensorField<S> {
        divergence_adjoint_with(&self.metric, &self.dg, x)
    }

    /// `∇h` stored at `i * m + sym(j, k)`.
    pub fn covariant_derivative(&self, h: &SymTensorField<S>) -> Vec<Vec<S>> {
        let grid = self.metric.grid();
        let n = grid.dim();
        let m = sym_len(n);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            for c in 0..m {
                out.push(grid.diff(i, h.comp(c)));
            }
        }
        for node in 0..grid.len() {
            let gam = self.gamma.at(node);
            let hm = h.at(node);
            for i in 0..n {
                for j in 0..n {
                    for k in j..n {
                        let mut s = S::zero();
                        for l in 0..n {
                            s += gam[(l * 3 + i) * 3 + j] * hm[l * 3 + k]
                                + gam[(l * 3 + i) * 3 + k] * hm[j * 3 + l];
                        }
                        out[i * m + sym_index(n, j, k)][node] -= s;
                    }
                }
            }
        }
        out
    }

    /// Exact adjoint of [`Self::covariant_derivative`].
    pub fn covariant_adjoint(&self, t: &[Vec<S>]) -> SymTensorField<S> {
        let g = &self.metric;
        let grid = g.grid();
        let n = grid.dim();
        let m = sym_len(n);
        let len = grid.len();
        let sd = g.sqrt_det();
        // weighted[i * m + sym(j,k)] = √g T^{ijk}
        let mut weighted = vec![vec![S::zero(); len]; n * m];
        let mut b = vec![[S::zero(); 9]; len];
        for node in 0..len {
            let gi = g.inverse().at(node);
            let mut full = [S::zero(); 27];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        full[(i * 3 + j) * 3 + k] = t[i * m + sym_index(n, j, k)][node];
                    }
                }
            }
            // raise each index in turn
            let mut r1 = [S::zero(); 27];
            for a in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = S::zero();
                        for i in 0..n {
                            s += gi[a * 3 + i] * full[(i * 3 + j) * 3 + k];
                        }
                        r1[(a * 3 + j) * 3 + k] = s;
                    }
                }
            }
            let mut r2 = [S::zero(); 27];
            for a in 0..n {
                for bb in 0..n {
                    for k in 0..n {
                        let mut s = S::zero();
                        for j in 0..n {
                            s += gi[bb * 3 + j] * r1[(a * 3 + j) * 3 + k];
                        }
                        r2[(a * 3 + bb) * 3 + k] = s;
                    }
                }
            }
            let mut up = [S::zero(); 27];
            for a in 0..n {
                for bb in 0..n {
                    for c in 0..n {
                        let mut s = S::zero();
                        for k in 0..n {
                            s += gi[c * 3 + k] * r2[(a * 3 + bb) * 3 + k];
                        }
                        up[(a * 3 + bb) * 3 + c] = s;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for k in j..n {
                        weighted[i * m + sym_index(n, j, k)][node] =
                            up[(i * 3 + j) * 3 + k] * sd[node];
                    }
                }
            }
            // −2 √g Γ^m_{ij} T^{ijk}
            let gam = self.gamma.at(node);
            let mut bm = [S::zero(); 9];
            for mm in 0..n {
                for k in 0..n {
                    let mut s = S::zero();
                    for i in 0..n {
                        for j in 0..n {
                            s += gam[(mm * 3 + i) * 3 + j] * up[(i * 3 + j) * 3 + k];
                        }
                    }
                    bm[mm * 3 + k] = (s * sd[node]).scale(-2.0);
                }
            }
            b[node] = bm;
        }
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let d = grid.diff(i, &weighted[i * m + sym_index(n, j, k)]);
                    for node in 0..len {
                        b[node][j * 3 + k] -= d[node];
                        if j != k {
                            b[node][k * 3 + j] -= d[node];
                        }
                    }
                }
            }
        }
        let mut out = SymTensorField::zeros(grid);
        for node in 0..len {
            let gm = g.tensor().at(node);
            let bm = b[node];
            let mut c = [S::zero(); 9];
            for x in 0..n {
                for y in 0..n {
                    c[x * 3 + y] = (bm[x * 3 + y] + bm[y * 3 + x]).scale(0.5);
                }
            }
            let inv_sd = sd[node].recip();
            for x in 0..n {
                for y in x..n {
                    let mut s = S::zero();
                    for a in 0..n {
                        for bb in 0..n {
                            s += gm[x * 3 + a] * gm[y * 3 + bb] * c[a * 3 + bb];
                        }
                    }
                    out.ij_mut(x, y)[node] = s * inv_sd;
                }
            }
        }
        out
    }

    /// Nyquist penalty on symmetric tensors, self-adjoint in `L²(dV_g)`.
    fn tensor_penalty(&self, h: &SymTensorField<S>) -> SymTensorField<S> {
        let g = &self.metric;
        let grid = g.grid();
        let n = grid.dim();
        if !grid.has_nyquist() {
            return SymTensorField::zeros(grid);
        }
        let ph: Vec<Vec<S>> = h
            .components()
            .iter()
            .map(|c| grid.nyquist_penalty(c))
            .collect();
        let ph = SymTensorField::from_components(grid, ph).expect("shape");
        let sd = g.sqrt_det();
        let mut out = SymTensorField::zeros(grid);
        for node in 0..grid.len() {
            let gm = g.tensor().at(node);
            let p = ph.at(node);
            let inv_sd = sd[node].recip();
            for x in 0..n {
                for y in x..n {
                    let mut s = S::zero();
                    for a in 0..n {
                        for b in 0..n {
                            s += gm[x * 3 + a] * gm[y * 3 + b] * p[a * 3 + b];
                        }
                    }
                    out.ij_mut(x, y)[node] = s * inv_sd;
                }
            }
        }
        out
    }

    /// Rough Laplacian `Δh = −∇*∇h` (plus the Nyquist penalty).
    pub fn rough_laplacian(&self, h: &SymTensorField<S>) -> SymTensorField<S> {
        let t = self.covariant_derivative(h);
        let a = self.covariant_adjoint(&t);
        let p = self.tensor_penalty(h);
        a.zip_with(&p, |x, y| -x - y)
    }

    /// `(Rm∘h)_{ij} = R_{ipjq} h^{pq}`.
    pub fn riemann_action(&self, h: &SymTensorField<S>) -> SymTensorField<S> {
        let curv = self
            .curv
            .as_ref()
            .expect("TensorOperators built without curvature");
        let g = &self.metric;
        let grid = g.grid();
        let n = grid.dim();
        let mut out = SymTensorField::zeros(grid);
        for node in 0..grid.len() {
            let gi = g.inverse().at(node);
            let hm = h.at(node);
            let mut up = [S::zero(); 9];
            for p in 0..n {
                for q in 0..n {
                    let mut s = S::zero();
                    for a in 0..n {
                        for b in 0..n {
                            s += gi[p * 3 + a] * gi[q * 3 + b] * hm[a * 3 + b];
                        }
                    }
                    up[p * 3 + q] = s;
                }
            }
            for i in 0..n {
                for j in i..n {
                    let mut s = S::zero();
                    for p in 0..n {
                        for q in 0..n {
                            s += curv.riemann(i, p, j, q, node) * up[p * 3 + q];
                        }
                    }
                    out.ij_mut(i, j)[node] = s;
                }
            }
        }
        out
    }

    /// `Δ^L h = Δh + 2 Rm∘h`.
    pub fn lichnerowicz(&self, h: &SymTensorField<S>) -> SymTensorField<S> {
        let lap = self.rough_laplacian(h);
        let rm = self.riemann_action(h);
        lap.axpy(2.0, &rm)
    }
}

pub fn lichnerowicz<S: Scalar>(g: &MetricField<S>, h: &SymTensorField<S>) -> SymTensorField<S> {
    TensorOperators::with_curvature(g).lichnerowicz(h)
}

pub fn rough_laplacian<S: Scalar>(g: &MetricField<S>, h: &SymTensorField<S>) -> SymTensorField<S> {
    TensorOperators::new(g).rough_laplacian(h)
}
