//! Discrete quadrature norms of fields on the torus.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::manifold::field::{sym_index, Covector, Field, Kind, Scalar0, ScalarField, Sym2};
use crate::manifold::metric::MetricField;

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    /// `L²(e^{−f} dV_g)`; requires the weight `f`.
    L2f,
    H1,
    H2,
    /// Sum of sup norms of all coordinate derivatives of order `≤ j`, `j ≤ 3`.
    Ck(u8),
}

impl FromStr for NormKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Self::L2),
            "l2f" | "l2_f" => Ok(Self::L2f),
            "h1" => Ok(Self::H1),
            "h2" => Ok(Self::H2),
            "c0" => Ok(Self::Ck(0)),
            "c1" => Ok(Self::Ck(1)),
            "c2" => Ok(Self::Ck(2)),
            "c3" => Ok(Self::Ck(3)),
            _ => Err(LabError::UnknownNormKind(s.to_string())),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::L2 => write!(f, "l2"),
            Self::L2f => write!(f, "l2f"),
            Self::H1 => write!(f, "h1"),
            Self::H2 => write!(f, "h2"),
            Self::Ck(j) => write!(f, "c{j}"),
        }
    }
}

/// Pointwise metric pairing of two tensors of one kind.
pub trait MetricPairing: Kind {
    fn pair(n: usize, ginv: &[f64; 9], a: &[f64], b: &[f64]) -> f64;
}

impl MetricPairing for Scalar0 {
    fn pair(_: usize, _: &[f64; 9], a: &[f64], b: &[f64]) -> f64 {
        a[0] * b[0]
    }
}

impl MetricPairing for Covector {
    fn pair(n: usize, gi: &[f64; 9], a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += gi[k * 3 + l] * a[k] * b[l];
            }
        }
        s
    }
}

impl MetricPairing for Sym2 {
    fn pair(n: usize, gi: &[f64; 9], a: &[f64], b: &[f64]) -> f64 {
        let full = |v: &[f64]| {
            let mut m = [0.0; 9];
            for i in 0..n {
                for j in 0..n {
                    m[i * 3 + j] = v[sym_index(n, i, j)];
                }
            }
            m
        };
        crate::manifold::ops::sym_pair(n, gi, &full(a), &full(b))
    }
}

/// `Σ_nodes ⟨a, b⟩_g · w` with `w` the volume weight times an optional density.
fn weighted_inner<K: MetricPairing>(
    g: &MetricField,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    density: Option<&[f64]>,
) -> f64 {
    let grid = g.grid();
    let n = grid.dim();
    let m = a.len();
    let dv = grid.cell_volume();
    let mut va = [0.0; 6];
    let mut vb = [0.0; 6];
    let mut acc = 0.0;
    for node in 0..grid.len() {
        for c in 0..m {
            va[c] = a[c][node];
            vb[c] = b[c][node];
        }
        let gi = g.inverse().at(node);
        let mut w = g.sqrt_det()[node] * dv;
        if let Some(d) = density {
            w *= d[node];
        }
        acc += K::pair(n, &gi, &va[..m], &vb[..m]) * w;
    }
    acc
}

/// All coordinate derivatives `D^α` of exact order `k` (ordered multi-indices).
fn derivatives_of_order(g: &MetricField, comps: &[Vec<f64>], k: usize) -> Vec<Vec<Vec<f64>>> {
    let grid = g.grid();
    let mut layer = vec![comps.to_vec()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(layer.len() * grid.dim());
        for f in &layer {
            for a in 0..grid.dim() {
                next.push(f.iter().map(|c| grid.diff(a, c)).collect());
            }
        }
        layer = next;
    }
    layer
}

/// Norm of any field in the requested kind. `f` is needed only for `L2f`.
pub fn norm<K: MetricPairing>(
    g: &MetricField,
    field: &Field<K>,
    kind: NormKind,
    f: Option<&ScalarField>,
) -> Result<f64> {
    let comps = field.components();
    let sobolev = |order: usize| {
        let mut s = 0.0;
        for k in 0..=order {
            for d in derivatives_of_order(g, comps, k) {
                s += weighted_inner::<K>(g, &d, &d, None);
            }
        }
        s.max(0.0).sqrt()
    };
    Ok(match kind {
        NormKind::L2 => weighted_inner::<K>(g, comps, comps, None).max(0.0).sqrt(),
        NormKind::L2f => {
            let f =
                f.ok_or_else(|| LabError::Precondition("L2f norm requires the weight f".into()))?;
            let density: Vec<f64> = f.values().iter().map(|v| (-v).exp()).collect();
            weighted_inner::<K>(g, comps, comps, Some(&density))
                .max(0.0)
                .sqrt()
        }
        NormKind::H1 => sobolev(1),
        NormKind::H2 => sobolev(2),
        NormKind::Ck(j) => {
            if j > 3 {
                return Err(LabError::UnknownNormKind(format!("c{j}")));
            }
            let mut s = 0.0;
            for k in 0..=j as usize {
                s += derivatives_of_order(g, comps, k)
                    .iter()
                    .flatten()
                    .flatten()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
            }
            s
        }
    })
}

/// `L²(dV_g)` or `L²(e^{−f}dV_g)` inner product of two fields of one kind.
pub fn inner<K: MetricPairing>(
    g: &MetricField,
    a: &Field<K>,
    b: &Field<K>,
    f: Option<&ScalarField>,
) -> f64 {
    match f {
        None => weighted_inner::<K>(g, a.components(), b.components(), None),
        Some(f) => {
            let density: Vec<f64> = f.values().iter().map(|v| (-v).exp()).collect();
            weighted_inner::<K>(g, a.components(), b.components(), Some(&density))
        }
    }
}
