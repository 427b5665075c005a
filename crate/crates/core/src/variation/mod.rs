//! First, second and third variations of λ by several independent routes,
//! and the gradient field `Rc + Hess f` with its linearization.

mod fd;
mod gradient;
mod operator;
mod scan;
mod series;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use fd::{finite_difference, lambda_along, FdLadder};
pub use gradient::{
    gradient_field, gradient_from, linearization_fd, linearized_gradient, taylor_remainder,
    GradientField, GradientNorms, Linearization, TaylorRemainder,
};
pub use operator::{h_prime_apply, operator_derivatives, operator_derivatives_stencil};
pub use scan::{third_variation_bound_scan, BoundRow, BoundScanConfig, BoundScanReport};
pub use series::{
    first_variation, first_variation_series, lemma_terms, second_variation,
    second_variation_contour, second_variation_ricci_flat, third_variation,
    third_variation_contour, LemmaTerms, Route, DIVERGENCE_TOLERANCE, FLATNESS_TOLERANCE,
};

use crate::error::Result;

/// Which formula produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `−∫⟨h, Rc + Hess f⟩ e^{−f} dV`.
    Perelman,
    /// The ground-state perturbation series with the reduced resolvent.
    PerturbationSeries,
    /// The same series with the resolvent integrals done by contour quadrature.
    Contour,
    /// `(1/2Vol) ∫⟨h, Δ^L h⟩ dV` at a Ricci-flat metric.
    ClosedFormRicciFlat,
    /// Richardson-extrapolated centered differences of `λ(g + εh)`.
    FiniteDifference,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Perelman => "perelman",
            Method::PerturbationSeries => "perturbation-series",
            Method::Contour => "contour",
            Method::ClosedFormRicciFlat => "closed-form-ricci-flat",
            Method::FiniteDifference => "finite-difference",
        }
    }
}

/// Method-specific numerical parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub contour_radius: Option<f64>,
    pub contour_points: Option<usize>,
    pub fd_step: Option<f64>,
    /// Truncation order after extrapolation.
    pub richardson_order: Option<u32>,
}

/// A second method evaluated on the same `(g, h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub method: Method,
    pub value: f64,
}

/// One variation of λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationResult {
    pub order: u8,
    pub method: Method,
    pub value: f64,
    pub cross: Option<CrossCheck>,
    pub diagnostics: Diagnostics,
    pub g_id: String,
    pub h_id: String,
    pub seed: Option<u64>,
}

impl VariationResult {
    pub(crate) fn new(order: u8, method: Method, value: f64) -> Self {
        Self {
            order,
            method,
            value,
            cross: None,
            diagnostics: Diagnostics::default(),
            g_id: "g".into(),
            h_id: "h".into(),
            seed: None,
        }
    }

    /// `|value − cross.value|`, if a cross-check was recorded.
    pub fn cross_error(&self) -> Option<f64> {
        self.cross.as_ref().map(|c| (self.value - c.value).abs())
    }

    pub fn with_cross(mut self, method: Method, value: f64) -> Self {
        self.cross = Some(CrossCheck { method, value });
        self
    }

    pub fn labelled(mut self, g_id: &str, h_id: &str, seed: Option<u64>) -> Self {
        self.g_id = g_id.into();
        self.h_id = h_id.into();
        self.seed = seed;
        self
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    order: u8,
    method: &'a str,
    value: f64,
    cross_error: Option<f64>,
    g_id: &'a str,
    h_id: &'a str,
    seed: Option<u64>,
}

/// Writes results as CSV with columns
/// `order,method,value,cross_error,g_id,h_id,seed`.
pub fn write_csv<W: Write>(out: W, results: &[VariationResult]) -> Result<()> {
    let fmt = |e: csv::Error| crate::error::LabError::Format(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "order",
        "method",
        "value",
        "cross_error",
        "g_id",
        "h_id",
        "seed",
    ])
    .map_err(fmt)?;
    for r in results {
        w.serialize(CsvRow {
            order: r.order,
            method: r.method.as_str(),
            value: r.value,
            cross_error: r.cross_error(),
            g_id: &r.g_id,
            h_id: &r.h_id,
            seed: r.seed,
        })
        .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}
