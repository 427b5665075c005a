//! Finite-difference oracle for λ-derivatives along a line `g + εh`.

use serde::{Deserialize, Serialize};

use super::{Method, VariationResult};
use crate::error::{LabError, Result};
use crate::manifold::{MetricField, SymTensorField};
use crate::spectral::{ground_state_fast, Schrodinger};

/// Residual target for the line evaluations of λ.
const LINE_TOLERANCE: f64 = 1e-10;

/// Step ladder `{ε, ε/2, ε/4}` for two Richardson levels. Steps are in
/// units of `1 / max|h_ij|`, so the ladder is invariant under `h → s·h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdLadder {
    pub step: f64,
}

impl Default for FdLadder {
    fn default() -> Self {
        Self { step: 1e-2 }
    }
}

impl FdLadder {
    /// Default ladder per order. Round-off in the curvature of `g + εh` puts
    /// a floor near `10⁻¹⁶` under every λ evaluation; the third difference
    /// divides it by `ε³`, so order 3 starts from a larger step.
    pub fn for_order(order: u8) -> Self {
        if order >= 3 {
            Self { step: 4e-2 }
        } else {
            Self::default()
        }
    }

    fn steps(&self) -> [f64; 3] {
        [self.step, self.step / 2.0, self.step / 4.0]
    }
}

/// `λ(g + ε h)` for each `ε`, warm-starting each solve from the ground state
/// of `g`.
pub fn lambda_along(g: &MetricField, h: &SymTensorField, eps: &[f64]) -> Result<Vec<f64>> {
    let base = ground_state_fast(&Schrodinger::new(g), None, LINE_TOLERANCE)?;
    eps.iter()
        .map(|&e| {
            if e == 0.0 {
                return Ok(base.lambda);
            }
            let ge = g.plus(e, h)?;
            Ok(ground_state_fast(&Schrodinger::new(&ge), Some(&base.w), LINE_TOLERANCE)?.lambda)
        })
        .collect()
}

/// Centered difference of the requested order at step `e`, from
/// `λ(kε)` for `k = −2..=2`.
fn stencil(order: u8, e: f64, v: &[f64; 5]) -> f64 {
    let [m2, m1, z, p1, p2] = *v;
    match order {
        1 => (p1 - m1) / (2.0 * e),
        2 => (p1 - 2.0 * z + m1) / (e * e),
        _ => (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * e.powi(3)),
    }
}

/// Richardson-extrapolated centered difference of order 1, 2 or 3
/// (truncation error `O(ε⁶)`).
pub fn finite_difference(
    g: &MetricField,
    h: &SymTensorField,
    order: u8,
    ladder: FdLadder,
) -> Result<VariationResult> {
    if !(1..=3).contains(&order) {
        return Err(LabError::Precondition(format!(
            "finite differences support orders 1–3, got {order}"
        )));
    }
    let mut out = VariationResult::new(order, Method::FiniteDifference, 0.0);
    out.diagnostics.fd_step = Some(ladder.step);
    out.diagnostics.richardson_order = Some(6);
    let scale = h.max_abs();
    if scale == 0.0 {
        return Ok(out);
    }
    let steps = ladder.steps().map(|e| e / scale);
    let offsets: &[f64] = if order == 3 {
        &[-2.0, -1.0, 1.0, 2.0]
    } else {
        &[-1.0, 1.0]
    };
    let mut eps = vec![0.0];
    for e in steps {
        eps.extend(offsets.iter().map(|k| k * e));
    }
    let lam = lambda_along(g, h, &eps)?;
    let m = offsets.len();
    let d: Vec<f64> = steps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let v = &lam[1 + m * i..1 + m * (i + 1)];
            let full = if m == 4 {
                [v[0], v[1], lam[0], v[2], v[3]]
            } else {
                [f64::NAN, v[0], lam[0], v[1], f64::NAN]
            };
            stencil(order, e, &full)
        })
        .collect();
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    out.value = (16.0 * r1[1] - r1[0]) / 15.0;
    Ok(out)
}
