use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Scalar;

/// How first derivatives are discretized along each periodic axis.
///
/// Both choices are real skew-symmetric circulant matrices, so every
/// divergence-form operator built from them is exactly self-adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fourier pseudo-spectral differentiation.
    #[default]
    Spectral,
    /// Second-order centered differences.
    Centered,
}

/// Classification of a tensor-product Fourier mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ModeKind {
    Constant,
    /// Wavenumber 0 or Nyquist on every axis (not all 0): annihilated by every
    /// first difference.
    Degenerate,
    Regular,
}

/// One periodic axis: circulant derivative stencil, Nyquist penalty and the
/// real orthonormal Fourier basis that diagonalizes both.
#[derive(Clone, Debug)]
pub(crate) struct Axis {
    pub len: usize,
    pub spacing: f64,
    /// Circulant first column: `(D u)_i = Σ_m stencil[m] u_{i-m}`.
    stencil: Vec<(usize, f64)>,
    /// Penalty coefficient acting on the Nyquist mode (zero for odd lengths).
    pub nyquist_penalty: f64,
    /// Row-major `len × len`; row `b` is the b-th orthonormal basis vector.
    basis: Vec<f64>,
    /// Signed integer wavenumber of each basis row.
    pub wavenumber: Vec<i64>,
    /// Eigenvalue of `−D∘D + c·P` on each basis row.
    pub symbol: Vec<f64>,
}

impl Axis {
    fn new(len: usize, period: f64, scheme: Scheme) -> Self {
        let spacing = period / len as f64;
        let mut stencil = Vec::new();
        let even = len % 2 == 0;
        match scheme {
            Scheme::Spectral => {
                let scale = 2.0 * PI / period;
                for m in 1..len {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let x = m as f64 * PI / len as f64;
                    let v = if even {
                        0.5 * sign / x.tan()
                    } else {
                        0.5 * sign / x.sin()
                    };
                    // D_ij = S'(x_i − x_j), the derivative of the periodic sinc.
                    stencil.push((m, v * scale));
                }
            }
            Scheme::Centered => {
                stencil.push((1, 0.5 / spacing));
                stencil.push((len - 1, -0.5 / spacing));
            }
        }
        let nyquist_penalty = if even {
            match scheme {
                Scheme::Spectral => (PI * len as f64 / period).powi(2),
                Scheme::Centered => 4.0 / (spacing * spacing),
            }
        } else {
            0.0
        };

        let mut basis = Vec::with_capacity(len * len);
        let mut wavenumber = Vec::with_capacity(len);
        let n = len as f64;
        let push_row = |basis: &mut Vec<f64>, f: &dyn Fn(usize) -> f64| {
            for j in 0..len {
                basis.push(f(j));
            }
        };
        push_row(&mut basis, &|_| 1.0 / n.sqrt());
        wavenumber.push(0);
        let kmax = (len - 1) / 2;
        for k in 1..=kmax {
            let w = 2.0 * PI * k as f64 / n;
            push_row(&mut basis, &|j| (2.0 / n).sqrt() * (w * j as f64).cos());
            wavenumber.push(k as i64);
            push_row(&mut basis, &|j| (2.0 / n).sqrt() * (w * j as f64).sin());
            wavenumber.push(k as i64);
        }
        if even {
            push_row(
                &mut basis,
                &|j| if j % 2 == 0 { 1.0 } else { -1.0 } / n.sqrt(),
            );
            wavenumber.push((len / 2) as i64);
        }

        let mut axis = Self {
            len,
            spacing,
            stencil,
            nyquist_penalty,
            basis,
            wavenumber,
            symbol: Vec::new(),
        };
        // Symbols measured numerically so they match the stencil exactly.
        let mut symbol = Vec::with_capacity(len);
        for b in 0..len {
            let row: Vec<f64> = axis.basis[b * len..(b + 1) * len].to_vec();
            let mut d = vec![0.0; len];
            axis.diff_line(&row, &mut d);
            let mut dd = vec![0.0; len];
            axis.diff_line(&d, &mut dd);
            let mut p = vec![0.0; len];
            axis.nyquist_line(&row, &mut p);
            let mut s = 0.0;
            for j in 0..len {
                s += row[j] * (-dd[j] + axis.nyquist_penalty * p[j]);
            }
            symbol.push(s);
        }
        axis.symbol = symbol;
        axis
    }

    #[inline]
    fn diff_line<S: Scalar>(&self, src: &[S], dst: &mut [S]) {
        let n = self.len;
        for (i, out) in dst.iter_mut().enumerate() {
            let mut acc = S::zero();
            for &(m, c) in &self.stencil {
                let j = if i >= m { i - m } else { i + n - m };
                acc += src[j].scale(c);
            }
            *out = acc;
        }
    }

    #[inline]
    fn nyquist_line<S: Scalar>(&self, src: &[S], dst: &mut [S]) {
        if self.nyquist_penalty == 0.0 {
            for d in dst.iter_mut() {
                *d = S::zero();
            }
            return;
        }
        let n = self.len;
        let mut s = S::zero();
        for (j, v) in src.iter().enumerate() {
            s += if j % 2 == 0 { *v } else { -*v };
        }
        let s = s.scale(1.0 / n as f64);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = if i % 2 == 0 { s } else { -s };
        }
    }

    pub fn basis_row(&self, b: usize) -> &[f64] {
        &self.basis[b * self.len..(b + 1) * self.len]
    }
}

/// Discretized torus `T^n = ℝ^n / (L₁ℤ × … × Lₙℤ)` with `res_i` nodes per axis.
///
/// Node `(i_0, …, i_{n-1})` has linear index `i_0 + res_0 (i_1 + res_1 i_2)`.
#[derive(Clone, Debug)]
pub struct PeriodicGrid {
    n: usize,
    res: Vec<usize>,
    periods: Vec<f64>,
    scheme: Scheme,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.res == other.res
            && self.periods == other.periods
            && self.scheme == other.scheme
    }
}

impl PeriodicGrid {
    pub fn new(res: &[usize], periods: &[f64], scheme: Scheme) -> Result<Self> {
        let n = res.len();
        if !(2..=3).contains(&n) {
            return Err(LabError::InvalidGrid(format!(
                "dimension {n} not in {{2, 3}}"
            )));
        }
        if periods.len() != n {
            return Err(LabError::InvalidGrid(
                "periods length differs from res length".into(),
            ));
        }
        if let Some(r) = res.iter().find(|&&r| r < 8) {
            return Err(LabError::InvalidGrid(format!("resolution {r} below 8")));
        }
        if let Some(p) = periods.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
            return Err(LabError::InvalidGrid(format!("period {p} not positive")));
        }
        let axes: Vec<Axis> = res
            .iter()
            .zip(periods)
            .map(|(&r, &l)| Axis::new(r, l, scheme))
            .collect();
        let mut strides = Vec::with_capacity(n);
        let mut s = 1;
        for &r in res {
            strides.push(s);
            s *= r;
        }
        Ok(Self {
            n,
            res: res.to_vec(),
            periods: periods.to_vec(),
            scheme,
            axes,
            strides,
            len: s,
        })
    }

    /// `[0, 2π)^n` with `res` nodes per axis.
    pub fn cube(n: usize, res: usize, scheme: Scheme) -> Result<Self> {
        Self::new(&vec![res; n], &vec![2.0 * PI; n], scheme)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.spacing)
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn flat_volume(&self) -> f64 {
        self.periods.iter().product()
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut r = node;
        for a in 0..self.n {
            idx[a] = r % self.res[a];
            r /= self.res[a];
        }
        idx
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        (0..self.n)
            .map(|a| (idx[a] % self.res[a]) * self.strides[a])
            .sum()
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.n {
            x[a] = idx[a] as f64 * self.axes[a].spacing;
        }
        x
    }

    /// Samples `f(x)` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len)
            .map(|i| f(&self.coords(i)[..self.n]))
            .collect()
    }

    /// Basis rows of axis `a` grouped by `|wavenumber|`, ascending. Each
    /// group spans a subspace invariant under every translation-invariant
    /// operator along that axis.
    pub(crate) fn wavenumber_groups(&self, a: usize) -> Vec<Vec<usize>> {
        let ax = &self.axes[a];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (b, &k) in ax.wavenumber.iter().enumerate() {
            let k = k.unsigned_abs() as usize;
            if groups.len() <= k {
                groups.resize(k + 1, Vec::new());
            }
            groups[k].push(b);
        }
        groups
    }

    /// Tensor-product basis function `Π_a row_{b_a}(x_a)`, Euclidean-normalized.
    pub(crate) fn product_basis(&self, rows: &[usize]) -> Vec<f64> {
        (0..self.len)
            .map(|node| {
                let idx = self.multi_index(node);
                (0..self.n)
                    .map(|a| self.axes[a].basis_row(rows[a])[idx[a]])
                    .product()
            })
            .collect()
    }

    fn for_each_line<S: Scalar>(
        &self,
        axis: usize,
        src: &[S],
        dst: &mut [S],
        mut op: impl FnMut(&Axis, &[S], &mut [S]),
    ) {
        let ax = &self.axes[axis];
        let stride = self.strides[axis];
        let len = ax.len;
        let mut buf = vec![S::zero(); len];
        let mut out = vec![S::zero(); len];
        let outer = self.len / (stride * len);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * len + inner;
                for j in 0..len {
                    buf[j] = src[base + j * stride];
                }
                op(ax, &buf, &mut out);
                for j in 0..len {
                    dst[base + j * stride] = out[j];
                }
            }
        }
    }

    /// Periodic first derivative along `axis`.
    pub fn diff<S: Scalar>(&self, axis: usize, src: &[S]) -> Vec<S> {
        let mut dst = vec![S::zero(); src.len()];
        self.for_each_line(axis, src, &mut dst, |ax, b, o| ax.diff_line(b, o));
        dst
    }

    /// `Σ_a c_a P_a u`: the metric-independent Nyquist penalty.
    pub fn nyquist_penalty<S: Scalar>(&self, src: &[S]) -> Vec<S> {
        let mut total = vec![S::zero(); src.len()];
        let mut dst = vec![S::zero(); src.len()];
        for a in 0..self.n {
            let c = self.axes[a].nyquist_penalty;
            if c == 0.0 {
                continue;
            }
            self.for_each_line(a, src, &mut dst, |ax, b, o| ax.nyquist_line(b, o));
            for (t, d) in total.iter_mut().zip(&dst) {
                *t += d.scale(c);
            }
        }
        total
    }

    pub fn has_nyquist(&self) -> bool {
        self.axes.iter().any(|a| a.nyquist_penalty > 0.0)
    }

    /// Applies a multiplier that is a function of the per-axis symbols of
    /// `−D∘D + c P`, i.e. a translation-invariant operator built from the
    /// flat Laplacian pieces. Used for preconditioning.
    pub fn fourier_multiply(&self, data: &mut [f64], mult: impl Fn(&[f64]) -> f64) {
        self.fourier_multiply_modes(data, |mu, _| mult(mu));
    }

    /// As [`fourier_multiply`](Self::fourier_multiply), also telling the
    /// multiplier what kind of mode it acts on.
    pub(crate) fn fourier_multiply_modes(
        &self,
        data: &mut [f64],
        mult: impl Fn(&[f64], ModeKind) -> f64,
    ) {
        let mut tmp = vec![0.0; data.len()];
        for a in 0..self.n {
            self.for_each_line(a, data, &mut tmp, |ax, b, o| {
                for (k, ok) in o.iter_mut().enumerate() {
                    let row = ax.basis_row(k);
                    *ok = row.iter().zip(b).map(|(r, v)| r * v).sum();
                }
            });
            data.copy_from_slice(&tmp);
        }
        let mut mu = [0.0; 3];
        for (node, v) in data.iter_mut().enumerate() {
            let idx = self.multi_index(node);
            let (mut degenerate, mut constant) = (true, true);
            for a in 0..self.n {
                let ax = &self.axes[a];
                mu[a] = ax.symbol[idx[a]];
                let k = ax.wavenumber[idx[a]] as usize;
                constant &= k == 0;
                degenerate &= k == 0 || (ax.nyquist_penalty > 0.0 && 2 * k == ax.len);
            }
            let kind = if constant {
                ModeKind::Constant
            } else if degenerate {
                ModeKind::Degenerate
            } else {
                ModeKind::Regular
            };
            *v *= mult(&mu[..self.n], kind);
        }
        for a in 0..self.n {
            self.for_each_line(a, data, &mut tmp, |ax, b, o| {
                for (j, oj) in o.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (k, bk) in b.iter().enumerate() {
                        s += ax.basis[k * ax.len + j] * bk;
                    }
                    *oj = s;
                }
            });
            data.copy_from_slice(&tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(PeriodicGrid::new(&[4, 16], &[1.0, 1.0], Scheme::Spectral).is_err());
        assert!(PeriodicGrid::new(&[16, 16], &[1.0, -1.0], Scheme::Spectral).is_err());
        assert!(PeriodicGrid::new(&[16], &[1.0], Scheme::Spectral).is_err());
        assert!(PeriodicGrid::new(&[16, 16], &[1.0], Scheme::Spectral).is_err());
    }

    #[test]
    fn derivative_is_skew_and_kills_constants() {
        for scheme in [Scheme::Spectral, Scheme::Centered] {
            for res in [8, 9, 16] {
                let g = PeriodicGrid::new(&[res, 10], &[2.0, 3.0], scheme).unwrap();
                let ones = vec![1.0; g.len()];
                assert!(g.diff(0, &ones).iter().all(|v| v.abs() < 1e-12));
                let u: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
                let v: Vec<f64> = (0..g.len()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
                for a in 0..2 {
                    let du = g.diff(a, &u);
                    let dv = g.diff(a, &v);
                    let l: f64 = v.iter().zip(&du).map(|(x, y)| x * y).sum();
                    let r: f64 = dv.iter().zip(&u).map(|(x, y)| x * y).sum();
                    assert!((l + r).abs() < 1e-10 * (1.0 + l.abs()));
                }
            }
        }
    }

    #[test]
    fn spectral_derivative_is_exact_on_fourier_modes() {
        let g = PeriodicGrid::cube(2, 16, Scheme::Spectral).unwrap();
        let u = g.sample(|x| (3.0 * x[0]).sin() + (2.0 * x[1]).cos());
        let du = g.diff(0, &u);
        let exact = g.sample(|x| 3.0 * (3.0 * x[0]).cos());
        for (a, b) in du.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symbols_match_analytic_values() {
        let g = PeriodicGrid::cube(2, 16, Scheme::Spectral).unwrap();
        let ax = &g.axes[0];
        for (k, s) in ax.wavenumber.iter().zip(&ax.symbol) {
            let expect = if *k == 8 { 64.0 } else { (*k * *k) as f64 };
            assert!((s - expect).abs() < 1e-9, "{k} {s}");
        }
    }

    #[test]
    fn fourier_multiply_identity_round_trips() {
        let g = PeriodicGrid::new(&[8, 10], &[1.0, 2.0], Scheme::Centered).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut v = u.clone();
        g.fourier_multiply(&mut v, |_| 1.0);
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
