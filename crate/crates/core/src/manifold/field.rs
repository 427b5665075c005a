use std::marker::PhantomData;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::manifold::grid::PeriodicGrid;
use crate::scalar::Scalar;

/// Index of the symmetric pair `(i, j)` in packed storage
/// (`00, 01, 11` in 2D; `00, 01, 02, 11, 12, 22` in 3D).
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed pairs `(i, j)`, `i ≤ j`, in storage order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

/// Tensor type carried by a [`Field`].
pub trait Kind: Copy + Send + Sync + 'static {
    const NAME: &'static str;
    fn components(n: usize) -> usize;
}

#[derive(Clone, Copy, Debug)]
pub struct Scalar0;
/// One-forms; `VectorField` components are covariant.
#[derive(Clone, Copy, Debug)]
pub struct Covector;
#[derive(Clone, Copy, Debug)]
pub struct Sym2;

impl Kind for Scalar0 {
    const NAME: &'static str = "scalar";
    fn components(_: usize) -> usize {
        1
    }
}

impl Kind for Covector {
    const NAME: &'static str = "vector";
    fn components(n: usize) -> usize {
        n
    }
}

impl Kind for Sym2 {
    const NAME: &'static str = "sym2";
    fn components(n: usize) -> usize {
        sym_len(n)
    }
}

/// Component-major field of `K`-tensors on a periodic grid.
#[derive(Clone, Debug)]
pub struct Field<K: Kind, S: Scalar = f64> {
    grid: Arc<PeriodicGrid>,
    comps: Vec<Vec<S>>,
    _kind: PhantomData<K>,
}

pub type ScalarField<S = f64> = Field<Scalar0, S>;
pub type VectorField<S = f64> = Field<Covector, S>;
pub type SymTensorField<S = f64> = Field<Sym2, S>;

impl<K: Kind, S: Scalar> Field<K, S> {
    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        let m = K::components(grid.dim());
        Self {
            grid: grid.clone(),
            comps: vec![vec![S::zero(); grid.len()]; m],
            _kind: PhantomData,
        }
    }

    pub fn from_components(grid: &Arc<PeriodicGrid>, comps: Vec<Vec<S>>) -> Result<Self> {
        let m = K::components(grid.dim());
        if comps.len() != m || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(LabError::Shape(format!(
                "{} field expects {m} components of {} values",
                K::NAME,
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
            _kind: PhantomData,
        })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[S] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut Vec<S> {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<S>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<S>> {
        self.comps
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Field<K, T> {
        Field {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
            _kind: PhantomData,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        debug_assert!(*self.grid == *other.grid);
        Field {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
            _kind: PhantomData,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v.scale(s))
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b.scale(s))
    }

    /// Node-major copy of the values (`node * m + c`).
    pub fn node_major(&self) -> Vec<S> {
        let m = self.comps.len();
        let len = self.grid.len();
        let mut out = Vec::with_capacity(len * m);
        for i in 0..len {
            for c in &self.comps {
                out.push(c[i]);
            }
        }
        debug_assert_eq!(out.len(), len * m);
        out
    }

    pub fn from_node_major(grid: &Arc<PeriodicGrid>, data: &[S]) -> Result<Self> {
        let m = K::components(grid.dim());
        if data.len() != m * grid.len() {
            return Err(LabError::Shape(format!(
                "expected {} values, found {}",
                m * grid.len(),
                data.len()
            )));
        }
        let comps = (0..m)
            .map(|c| (0..grid.len()).map(|i| data[i * m + c]).collect())
            .collect();
        Self::from_components(grid, comps)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(|v| v.value().abs())
            .fold(0.0, f64::max)
    }
}

impl<S: Scalar> ScalarField<S> {
    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<S>) -> Result<Self> {
        Self::from_components(grid, vec![values])
    }

    pub fn constant(grid: &Arc<PeriodicGrid>, v: S) -> Self {
        Self::from_components(grid, vec![vec![v; grid.len()]]).expect("shape")
    }

    pub fn values(&self) -> &[S] {
        &self.comps[0]
    }

    pub fn values_mut(&mut self) -> &mut Vec<S> {
        &mut self.comps[0]
    }
}

impl ScalarField<f64> {
    pub fn sample(grid: &Arc<PeriodicGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_values(grid, grid.sample(f)).expect("shape")
    }
}

impl<S: Scalar> SymTensorField<S> {
    /// Component `(i, j)`; symmetric by construction.
    pub fn ij(&self, i: usize, j: usize) -> &[S] {
        &self.comps[sym_index(self.grid.dim(), i, j)]
    }

    pub fn ij_mut(&mut self, i: usize, j: usize) -> &mut Vec<S> {
        let n = self.grid.dim();
        &mut self.comps[sym_index(n, i, j)]
    }

    /// Full `n × n` matrix at a node (row-major, `[S; 9]`).
    #[inline]
    pub fn at(&self, node: usize) -> [S; 9] {
        let n = self.grid.dim();
        let mut m = [S::zero(); 9];
        for i in 0..n {
            for j in i..n {
                let v = self.comps[sym_index(n, i, j)][node];
                m[i * 3 + j] = v;
                m[j * 3 + i] = v;
            }
        }
        m
    }

    pub fn set_at(&mut self, node: usize, m: &[S; 9]) {
        let n = self.grid.dim();
        for i in 0..n {
            for j in i..n {
                self.comps[sym_index(n, i, j)][node] = m[i * 3 + j];
            }
        }
    }

    /// `Σ_ij c_ij δ_ij`-style constant tensor from a full matrix.
    pub fn constant(grid: &Arc<PeriodicGrid>, m: &[[f64; 3]; 3]) -> Self {
        let n = grid.dim();
        let comps = sym_pairs(n)
            .iter()
            .map(|&(i, j)| vec![S::from_f64(m[i][j]); grid.len()])
            .collect();
        Self::from_components(grid, comps).expect("shape")
    }

    pub fn identity(grid: &Arc<PeriodicGrid>) -> Self {
        Self::constant(grid, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }
}

impl SymTensorField<f64> {
    pub fn sample(grid: &Arc<PeriodicGrid>, f: impl Fn(&[f64], usize, usize) -> f64) -> Self {
        let n = grid.dim();
        let comps = sym_pairs(n)
            .iter()
            .map(|&(i, j)| grid.sample(|x| f(x, i, j)))
            .collect();
        Self::from_components(grid, comps).expect("shape")
    }
}

impl VectorField<f64> {
    pub fn sample(grid: &Arc<PeriodicGrid>, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let comps = (0..grid.dim()).map(|k| grid.sample(|x| f(x, k))).collect();
        Self::from_components(grid, comps).expect("shape")
    }
}
