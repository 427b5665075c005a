//! Tensor decompositions: the gauge split `h = h₀ + div*X`, the refinement
//! `ker div = ℝg ⊕ im C ⊕ TT` at flat metrics, the Lichnerowicz spectrum by
//! sector, and the projection away from the flat family.

mod gauge;
mod spectrum;
mod tt;

pub use gauge::{gauge_split, GaugeSplit};
pub use spectrum::{lichnerowicz_spectrum, sector_spectrum, Sector, SectorSpectrum};
pub use tt::{
    conformal_adjoint, conformal_op, normal_rayleigh_quotient, normal_rayleigh_scan,
    project_normal, tt_split, RayleighReport, TtNorms, TtSplit,
};

use crate::error::{LabError, Result};
use crate::manifold::MetricField;

/// Coefficients of a flat-family metric must be constant to this tolerance.
pub const CONSTANT_TOLERANCE: f64 = 1e-12;

pub(crate) fn require_constant(g: &MetricField) -> Result<()> {
    if g.is_constant(CONSTANT_TOLERANCE) {
        Ok(())
    } else {
        Err(LabError::Precondition(
            "operation needs a constant-coefficient (flat) metric".into(),
        ))
    }
}
