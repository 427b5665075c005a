use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::manifold::ops::{christoffel, curvature};
use crate::manifold::{sym_pairs, MetricField, Scheme, SymTensorField};

/// Which evolution equation is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `∂_t g = −2Rc + L_W g`, `W^k = g^{ij}Γ^k_{ij}` against the flat background.
    #[default]
    DeTurck,
    /// Plain Ricci flow `∂_t g = −2Rc` (weakly parabolic; short runs only).
    Ricci,
}

/// Stability constant `κ` of the explicit step bound `Δt ≤ κ h²_min / max eig g^{-1}`.
///
/// RK4 is stable on the negative real axis up to `≈ 2.78`; the largest symbol
/// of `g^{ab}D_aD_b` plus the Nyquist damping is `≈ n(π/h)²` for the
/// spectral derivative and `n·4/h²` for centered differences.
pub fn stability_constant(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Spectral => 0.08,
        Scheme::Centered => 0.2,
    }
}

/// Largest admissible time step for `g`.
pub fn max_time_step(g: &MetricField) -> f64 {
    let grid = g.grid();
    let h = grid.min_spacing();
    stability_constant(grid.scheme()) * h * h / g.max_inverse_eigenvalue()
}

/// Right-hand side of the flow at `g`. Both gauges include the
/// metric-independent Nyquist damping `−Σ_a c_a P_a g`, which stops the
/// otherwise undamped checkerboard mode from drifting.
pub fn flow_rhs(g: &MetricField, gauge: Gauge) -> SymTensorField {
    let grid = g.grid();
    let n = grid.dim();
    let len = grid.len();
    let mut rhs = curvature(g).ricci.scaled(-2.0);
    if gauge == Gauge::DeTurck {
        let gamma = christoffel(g);
        // W^k = g^{ij} Γ^k_ij (the flat background has vanishing Christoffels)
        let mut w = vec![vec![0.0; len]; n];
        for node in 0..len {
            let gi = g.inverse().at(node);
            for (k, wk) in w.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gi[i * 3 + j] * gamma.get(k, i, j, node);
                    }
                }
                wk[node] = s;
            }
        }
        let dw: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|a| w.iter().map(|wk| grid.diff(a, wk)).collect())
            .collect();
        let gt = g.tensor();
        let dg: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|a| gt.components().iter().map(|c| grid.diff(a, c)).collect())
            .collect();
        // (L_W g)_ij = W^k D_k g_ij + g_kj D_i W^k + g_ik D_j W^k
        for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
            let out = rhs.comp_mut(c);
            for node in 0..len {
                let mut s = 0.0;
                for k in 0..n {
                    s += w[k][node] * dg[k][c][node]
                        + gt.ij(k, j)[node] * dw[i][k][node]
                        + gt.ij(i, k)[node] * dw[j][k][node];
                }
                out[node] += s;
            }
        }
    }
    if grid.has_nyquist() {
        for c in rhs.components_mut().iter_mut().zip(g.tensor().components()) {
            let p = grid.nyquist_penalty(c.1);
            c.0.iter_mut().zip(&p).for_each(|(r, q)| *r -= q);
        }
    }
    rhs
}

/// One classical RK4 step. Fails if `dt` exceeds the stability bound or an
/// intermediate metric loses positivity.
pub fn flow_step(g: &MetricField, dt: f64, gauge: Gauge, t: f64) -> Result<MetricField> {
    let bound = max_time_step(g);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(LabError::Precondition(format!(
            "time step {dt:e} outside (0, {bound:e}]"
        )));
    }
    let positive = |m: Result<MetricField>| m.map_err(|_| LabError::PositivityLoss { t });
    let k1 = flow_rhs(g, gauge);
    let g2 = positive(g.plus(0.5 * dt, &k1))?;
    let k2 = flow_rhs(&g2, gauge);
    let g3 = positive(g.plus(0.5 * dt, &k2))?;
    let k3 = flow_rhs(&g3, gauge);
    let g4 = positive(g.plus(dt, &k3))?;
    let k4 = flow_rhs(&g4, gauge);
    let incr = k1.add(&k2.scaled(2.0)).add(&k3.scaled(2.0)).add(&k4);
    positive(g.plus(dt / 6.0, &incr))
}

/// One Ricci–DeTurck RK4 step against a flat (constant) background, whose
/// Christoffel symbols vanish.
pub fn deturck_step(g: &MetricField, background: &MetricField, dt: f64) -> Result<MetricField> {
    crate::decomp::require_constant(background)?;
    flow_step(g, dt, Gauge::DeTurck, 0.0)
}
