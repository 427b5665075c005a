//! The gradient field `Rc + Hess f` of λ, its linearization at a flat
//! metric, and the Taylor remainder.

use serde::{Deserialize, Serialize};

use super::series::{DIVERGENCE_TOLERANCE, FLATNESS_TOLERANCE};
use crate::error::{LabError, Result};
use crate::manifold::norms::inner;
use crate::manifold::ops::{divergence, lichnerowicz};
use crate::manifold::{
    curvature, hessian, norm, trace, MetricField, NormKind, ScalarField, SymTensorField,
};
use crate::spectral::{ground_state_fast, Schrodinger, SpectralData};

/// `Rc + Hess f` with its weighted norms.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub field: SymTensorField,
    /// `⟨Hess f, Rc + Hess f⟩_{L²_f}`; zero for the exact minimizer.
    pub orthogonality: f64,
    /// `‖Rc + Hess f‖_{L²_f}`.
    pub norm_gradient_f: f64,
    /// `‖Rc‖_{L²_f}`.
    pub norm_ricci_f: f64,
    /// `‖Rc‖_{L²}`.
    pub norm_ricci: f64,
}

/// Summary numbers of a [`GradientField`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientNorms {
    pub orthogonality: f64,
    pub norm_gradient_f: f64,
    pub norm_ricci_f: f64,
    pub norm_ricci: f64,
}

impl GradientField {
    pub fn norms(&self) -> GradientNorms {
        GradientNorms {
            orthogonality: self.orthogonality,
            norm_gradient_f: self.norm_gradient_f,
            norm_ricci_f: self.norm_ricci_f,
            norm_ricci: self.norm_ricci,
        }
    }
}

pub fn gradient_field(g: &MetricField, sd: &SpectralData) -> GradientField {
    gradient_from(g, &sd.f)
}

/// Gradient field for a given minimizer `f`.
pub fn gradient_from(g: &MetricField, f: &ScalarField) -> GradientField {
    let rc = curvature(g).ricci;
    let hess = hessian(g, f);
    let field = rc.add(&hess);
    let sq = |a: &SymTensorField| inner(g, a, a, Some(f)).max(0.0).sqrt();
    GradientField {
        orthogonality: inner(g, &hess, &field, Some(f)),
        norm_gradient_f: sq(&field),
        norm_ricci_f: sq(&rc),
        norm_ricci: inner(g, &rc, &rc, None).max(0.0).sqrt(),
        field,
    }
}

/// Rates of change of `Rc + Hess f` and `f` along `g + th` at `t = 0`.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub gradient_rate: SymTensorField,
    pub f_rate: ScalarField,
}

fn require_flat(g: &MetricField) -> Result<()> {
    let rc = norm(g, &curvature(g).ricci, NormKind::L2, None)?;
    if rc > FLATNESS_TOLERANCE {
        return Err(LabError::Precondition(format!(
            "metric is not Ricci-flat: ‖Rc‖ = {rc:.3e}"
        )));
    }
    Ok(())
}

/// `(−½Δ^L h, ½ tr h)` at a Ricci-flat metric for divergence-free `h`.
pub fn linearized_gradient(g_rf: &MetricField, h: &SymTensorField) -> Result<Linearization> {
    require_flat(g_rf)?;
    let h1 = norm(g_rf, h, NormKind::H1, None)?;
    let div = norm(g_rf, &divergence(g_rf, h), NormKind::L2, None)?;
    if div > DIVERGENCE_TOLERANCE * h1 {
        return Err(LabError::Precondition(format!(
            "h is not divergence-free: ‖div h‖ = {div:.3e}"
        )));
    }
    Ok(Linearization {
        gradient_rate: lichnerowicz(g_rf, h).scaled(-0.5),
        f_rate: trace(g_rf, h).scaled(0.5),
    })
}

fn minimizer(g: &MetricField, guess: Option<&[f64]>) -> Result<(ScalarField, Vec<f64>)> {
    let gs = ground_state_fast(&Schrodinger::new(g), guess, 1e-10)?;
    let f = ScalarField::from_values(g.grid(), gs.w.iter().map(|v| -2.0 * v.ln()).collect())?;
    Ok((f, gs.w))
}

/// Centered-difference rates `(G(g+εh) − G(g−εh))/2ε` for the gradient
/// field and the minimizer.
pub fn linearization_fd(g: &MetricField, h: &SymTensorField, eps: f64) -> Result<Linearization> {
    let (_, w0) = minimizer(g, None)?;
    let gp = g.plus(eps, h)?;
    let gm = g.plus(-eps, h)?;
    let (fp, _) = minimizer(&gp, Some(&w0))?;
    let (fm, _) = minimizer(&gm, Some(&w0))?;
    let s = 0.5 / eps;
    Ok(Linearization {
        gradient_rate: gradient_from(&gp, &fp)
            .field
            .sub(&gradient_from(&gm, &fm).field)
            .scaled(s),
        f_rate: fp.sub(&fm).scaled(s),
    })
}

/// `R = (Rc + Hess f)(ḡ + h) + ½Δ^L_{g_RF} h` and the two bound forms of
/// its estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorRemainder {
    /// `‖R‖_{L²}` (background measure).
    pub remainder: f64,
    pub h_c2: f64,
    pub h_h2: f64,
    /// `‖ḡ − g_RF‖_{C²}`.
    pub background_distance: f64,
    /// `‖h‖_{C²}‖h‖_{H²}`.
    pub bound_quadratic: f64,
    /// `‖ḡ − g_RF‖_{C²}‖h‖_{H²}`.
    pub bound_background: f64,
}

pub fn taylor_remainder(
    g_rf: &MetricField,
    g_bar: &MetricField,
    h: &SymTensorField,
) -> Result<TaylorRemainder> {
    require_flat(g_rf)?;
    if !g_bar.is_constant(1e-12) {
        return Err(LabError::Precondition(
            "ḡ must be a constant-coefficient flat metric".into(),
        ));
    }
    let g = g_bar.plus(1.0, h)?;
    let (f, _) = minimizer(&g, None)?;
    let r = gradient_from(&g, &f)
        .field
        .add(&lichnerowicz(g_rf, h).scaled(0.5));
    let h_c2 = norm(g_rf, h, NormKind::Ck(2), None)?;
    let h_h2 = norm(g_rf, h, NormKind::H2, None)?;
    let dist = norm(
        g_rf,
        &g_bar.tensor().sub(g_rf.tensor()),
        NormKind::Ck(2),
        None,
    )?;
    Ok(TaylorRemainder {
        remainder: norm(g_rf, &r, NormKind::L2, None)?,
        h_c2,
        h_h2,
        background_distance: dist,
        bound_quadratic: h_c2 * h_h2,
        bound_background: dist * h_h2,
    })
}
