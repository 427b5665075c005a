//! λ-derivatives from the ground-state perturbation series.
//!
//! With `a = H′w`, `b = H″w`, `S` the reduced resolvent and `⟨·,·⟩` the
//! `L²(dV_g)` pairing of the base metric:
//!
//! ```text
//! d¹λ = ⟨w, H′w⟩
//! d²λ = ⟨w, H″w⟩ + 2 T₂
//! d³λ = ⟨w, H‴w⟩ + 6 T₃ₐ + 3 T₃ᵦ + 3 T₃꜀ − 6 ⟨w, H′w⟩ T₃ₔ
//! ```
//!
//! where each `T` is a contour integral `(1/2πi)∮ ⋯ dz` around λ₁:
//!
//! | term | integrand                              | residue                                  |
//! |------|----------------------------------------|------------------------------------------|
//! | T₂   | `⟨w, H′R H′w⟩ /(z−λ)`                  | `⟨w, H′S a⟩`                             |
//! | T₃ₐ  | `⟨w, H′R H′R H′w⟩ /(z−λ)`              | `⟨w, H′S H′S a⟩ − 2⟨w,H′w⟩⟨w, H′S² a⟩`   |
//! | T₃ᵦ  | `⟨w, H′R H″w⟩ /(z−λ)`                  | `⟨w, H′S b⟩`                             |
//! | T₃꜀  | `⟨w, H″R H′w⟩ /(z−λ)`                  | `⟨w, H″S a⟩`                             |
//! | T₃ₔ  | `⟨w, H′R H′w⟩ /(z−λ)²`                 | `−⟨w, H′S² a⟩`                           |
//!
//! [`Route::Resolvent`] evaluates the residue column; [`Route::Contour`]
//! evaluates the integrals by quadrature with the full resolvent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gradient::gradient_field;
use super::{Method, VariationResult};
use crate::error::{LabError, Result};
use crate::manifold::norms::inner;
use crate::manifold::ops::{divergence, integrate, lichnerowicz};
use crate::manifold::{norm, MetricField, NormKind, SymTensorField};
use crate::spectral::{PerturbedSchrodinger, SpectralData, CONTOUR_POINTS};

/// Largest `‖Rc‖_{L²}` accepted as Ricci-flat.
pub const FLATNESS_TOLERANCE: f64 = 1e-8;
/// Largest `‖div h‖_{L²} / ‖h‖_{H¹}` accepted as divergence-free.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-6;

/// How the resolvent terms are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Residues through the reduced resolvent (deflated linear solves).
    Resolvent,
    /// Trapezoidal quadrature on `|z − λ₁| = radius`.
    Contour { radius: f64, points: usize },
}

impl Route {
    /// Contour quadrature with the default radius `(λ₂−λ₁)/4` and 64 points.
    pub fn default_contour(sd: &SpectralData) -> Self {
        Route::Contour {
            radius: sd.default_radius(),
            points: CONTOUR_POINTS,
        }
    }
}

/// All pairings entering the first three λ-derivatives along `h`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaTerms {
    /// `⟨w, H′w⟩`.
    pub h1: f64,
    /// `⟨w, H″w⟩`.
    pub h2: f64,
    /// `⟨w, H‴w⟩`.
    pub h3: f64,
    pub t2: f64,
    pub t3a: f64,
    pub t3b: f64,
    pub t3c: f64,
    pub t3d: f64,
}

impl LemmaTerms {
    pub fn first(&self) -> f64 {
        self.h1
    }

    pub fn second(&self) -> f64 {
        self.h2 + 2.0 * self.t2
    }

    pub fn third(&self) -> f64 {
        self.h3 + 6.0 * self.t3a + 3.0 * self.t3b + 3.0 * self.t3c - 6.0 * self.h1 * self.t3d
    }

    /// The order-2 and order-3 resolvent terms, in a fixed order.
    pub fn resolvent_terms(&self) -> [(&'static str, f64); 5] {
        [
            ("t2", self.t2),
            ("t3a", self.t3a),
            ("t3b", self.t3b),
            ("t3c", self.t3c),
            ("t3d", self.t3d),
        ]
    }
}

fn is_zero(h: &SymTensorField) -> bool {
    h.max_abs() == 0.0
}

/// Evaluates every term of the series along `h` at `g` (whose spectral
/// data is `sd`).
pub fn lemma_terms(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
    route: Route,
) -> Result<LemmaTerms> {
    if is_zero(h) {
        return Ok(LemmaTerms::default());
    }
    let op = PerturbedSchrodinger::new(g, h)?;
    let w = sd.w.values();
    let [_, a, b, c] = op.apply_all(w);
    let h1 = sd.inner(w, &a);
    let h2 = sd.inner(w, &b);
    let h3 = sd.inner(w, &c);
    let d1 = |u: &[f64]| op.apply(1, u);
    let d2 = |u: &[f64]| op.apply(2, u);
    match route {
        Route::Resolvent => {
            let sa = sd.reduced_resolvent(&a)?;
            let ssa = sd.reduced_resolvent(&sa)?;
            let sb = sd.reduced_resolvent(&b)?;
            let h_sa = d1(&sa);
            let s_h_sa = sd.reduced_resolvent(&h_sa)?;
            let t2 = sd.inner(w, &h_sa);
            let h_ssa = sd.inner(w, &d1(&ssa));
            Ok(LemmaTerms {
                h1,
                h2,
                h3,
                t2,
                t3a: sd.inner(w, &d1(&s_h_sa)) - 2.0 * h1 * h_ssa,
                t3b: sd.inner(w, &d1(&sb)),
                t3c: sd.inner(w, &d2(&sa)),
                t3d: -h_ssa,
            })
        }
        Route::Contour { radius, points } => {
            let l1 = sd.lambda;
            let integral = |ops: &[&dyn Fn(&[f64]) -> Vec<f64>], pole: i32| -> Result<f64> {
                let z =
                    sd.contour_integrate(radius, points, |z| {
                        Ok(sd.resolvent_chain(z, w, ops, w)?
                            / (z - Complex64::new(l1, 0.0)).powi(pole))
                    })?;
                Ok(z.re)
            };
            Ok(LemmaTerms {
                h1,
                h2,
                h3,
                t2: integral(&[&d1, &d1], 1)?,
                t3a: integral(&[&d1, &d1, &d1], 1)?,
                t3b: integral(&[&d1, &d2], 1)?,
                t3c: integral(&[&d2, &d1], 1)?,
                t3d: integral(&[&d1, &d1], 2)?,
            })
        }
    }
}

/// `⟨w, H′[h]w⟩`.
pub fn first_variation_series(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
) -> Result<f64> {
    if is_zero(h) {
        return Ok(0.0);
    }
    let op = PerturbedSchrodinger::new(g, h)?;
    let w = sd.w.values();
    Ok(sd.inner(w, &op.apply(1, w)))
}

/// Perelman's first variation `−∫⟨h, Rc + Hess f⟩ e^{−f} dV`, cross-checked
/// against the series value `⟨w, H′w⟩`.
pub fn first_variation(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
) -> Result<VariationResult> {
    let grad = gradient_field(g, sd);
    let perelman = -inner(g, h, &grad.field, Some(&sd.f));
    let series = first_variation_series(g, sd, h)?;
    Ok(VariationResult::new(1, Method::Perelman, perelman)
        .with_cross(Method::PerturbationSeries, series))
}

/// Second variation through the reduced resolvent, cross-checked by contour
/// quadrature when the dense eigenbasis is available.
pub fn second_variation(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
) -> Result<VariationResult> {
    let value = lemma_terms(g, sd, h, Route::Resolvent)?.second();
    let out = VariationResult::new(2, Method::PerturbationSeries, value);
    if sd.basis().is_none() {
        return Ok(out);
    }
    let contour = second_variation_contour(g, sd, h, sd.default_radius(), CONTOUR_POINTS)?;
    let mut out = out.with_cross(Method::Contour, contour.value);
    out.diagnostics = contour.diagnostics;
    Ok(out)
}

pub fn second_variation_contour(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
    radius: f64,
    points: usize,
) -> Result<VariationResult> {
    let value = lemma_terms(g, sd, h, Route::Contour { radius, points })?.second();
    let mut out = VariationResult::new(2, Method::Contour, value);
    out.diagnostics.contour_radius = Some(radius);
    out.diagnostics.contour_points = Some(points);
    Ok(out)
}

/// `(1/2Vol) ∫⟨h, Δ^L h⟩ dV` at a Ricci-flat metric for divergence-free `h`.
pub fn second_variation_ricci_flat(
    g_rf: &MetricField,
    h: &SymTensorField,
) -> Result<VariationResult> {
    let rc = crate::manifold::curvature(g_rf).ricci;
    let rc_norm = norm(g_rf, &rc, NormKind::L2, None)?;
    if rc_norm > FLATNESS_TOLERANCE {
        return Err(LabError::Precondition(format!(
            "metric is not Ricci-flat: ‖Rc‖ = {rc_norm:.3e}"
        )));
    }
    let h1 = norm(g_rf, h, NormKind::H1, None)?;
    let div = norm(g_rf, &divergence(g_rf, h), NormKind::L2, None)?;
    if div > DIVERGENCE_TOLERANCE * h1 {
        return Err(LabError::Precondition(format!(
            "h is not divergence-free: ‖div h‖ = {div:.3e}"
        )));
    }
    let lh = lichnerowicz(g_rf, h);
    let pairing = integrate(g_rf, &crate::manifold::ops::inner_pointwise(g_rf, h, &lh));
    Ok(VariationResult::new(
        2,
        Method::ClosedFormRicciFlat,
        pairing / (2.0 * g_rf.volume()),
    ))
}

/// Third variation through the reduced resolvent.
pub fn third_variation(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
) -> Result<VariationResult> {
    let value = lemma_terms(g, sd, h, Route::Resolvent)?.third();
    Ok(VariationResult::new(3, Method::PerturbationSeries, value))
}

pub fn third_variation_contour(
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
    radius: f64,
    points: usize,
) -> Result<VariationResult> {
    let value = lemma_terms(g, sd, h, Route::Contour { radius, points })?.third();
    let mut out = VariationResult::new(3, Method::Contour, value);
    out.diagnostics.contour_radius = Some(radius);
    out.diagnostics.contour_points = Some(points);
    Ok(out)
}
