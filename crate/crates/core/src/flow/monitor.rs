use crate::error::Result;
use crate::manifold::norms::inner;
use crate::manifold::ops::curvature;
use crate::manifold::{hessian, norm, MetricField, NormKind, ScalarField};
use crate::spectral::{ground_state_fast, Schrodinger};

use super::{LAMBDA_NOISE_FLOOR, RICCI_NOISE_FLOOR};

/// λ and gradient-field norms of one metric.
#[derive(Clone, Debug)]
pub struct Diagnosis {
    pub lambda: f64,
    /// Ground state (for warm starts).
    pub w: Vec<f64>,
    pub ricci_l2: f64,
    pub ricci_l2f: f64,
    /// `‖Rc + Hess f‖_{L²}`.
    pub gradient_l2: f64,
    /// `‖Rc + Hess f‖_{L²_f}`.
    pub gradient_l2f: f64,
    /// `⟨Hess f, Rc + Hess f⟩_{L²_f}`.
    pub orthogonality: f64,
    pub curvature_sup: f64,
}

impl Diagnosis {
    pub fn lojasiewicz_ratio(&self) -> Option<f64> {
        (self.lambda.abs() >= LAMBDA_NOISE_FLOOR)
            .then(|| self.gradient_l2 / self.lambda.abs().sqrt())
    }

    pub fn transversality_ratio(&self) -> Option<f64> {
        (self.ricci_l2 >= RICCI_NOISE_FLOOR).then(|| self.gradient_l2 / self.ricci_l2)
    }
}

/// Residual target of the monitor eigen-solves. λ is a Rayleigh quotient,
/// so its error is of the order of the squared residual.
const MONITOR_TOLERANCE: f64 = 1e-10;

pub fn diagnose(g: &MetricField, warm: Option<&[f64]>) -> Result<Diagnosis> {
    let gs = ground_state_fast(&Schrodinger::new(g), warm, MONITOR_TOLERANCE)?;
    let f = ScalarField::from_values(g.grid(), gs.w.iter().map(|v| -2.0 * v.ln()).collect())?;
    let curv = curvature(g);
    let rc = curv.ricci;
    let hess = hessian(g, &f);
    let grad = rc.add(&hess);
    let l2f = |a| norm(g, a, NormKind::L2f, Some(&f));
    Ok(Diagnosis {
        lambda: gs.lambda,
        ricci_l2: norm(g, &rc, NormKind::L2, None)?,
        ricci_l2f: l2f(&rc)?,
        gradient_l2: norm(g, &grad, NormKind::L2, None)?,
        gradient_l2f: l2f(&grad)?,
        orthogonality: inner(g, &hess, &grad, Some(&f)),
        curvature_sup: curv
            .riemann
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs())),
        w: gs.w,
    })
}
