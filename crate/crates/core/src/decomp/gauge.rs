use crate::error::Result;
use crate::linalg::{dot, pcg};
use crate::manifold::grid::ModeKind;
use crate::manifold::norms::inner;
use crate::manifold::{norm, MetricField, NormKind, SymTensorField, TensorOperators, VectorField};

/// `h = h₀ + div*X` with `div h₀ = 0`.
#[derive(Clone, Debug)]
pub struct GaugeSplit {
    pub h0: SymTensorField,
    /// Mean-zero one-form.
    pub x: VectorField,
    /// `‖h − h₀ − div*X‖_{L²}`.
    pub reassembly: f64,
    /// `‖div h₀‖_{L²}`.
    pub div_h0: f64,
    /// `⟨h₀, div*X⟩_{L²}`.
    pub orthogonality: f64,
    pub iterations: usize,
}

/// Relative residual target of the normal-equation solve.
const GAUGE_TOLERANCE: f64 = 1e-12;
/// Relative size of roundoff in a discrete divergence.
const ROUNDOFF: f64 = 1e-14;

/// Solves `div div* X = div h` (orthogonally to constant one-forms, the
/// Killing fields of flat tori) and returns the split.
pub fn gauge_split(g: &MetricField, h: &SymTensorField) -> Result<GaugeSplit> {
    let grid = g.grid().clone();
    let n = grid.dim();
    let len = grid.len();
    let ops = TensorOperators::new(g);
    // Euclidean form of the L²(dV_g) pairing of one-forms: M = √g g^{-1}.
    let weight = |v: &VectorField| -> Vec<f64> {
        let mut out = vec![0.0; n * len];
        for node in 0..len {
            let gi = g.inverse().at(node);
            let s = g.sqrt_det()[node];
            for k in 0..n {
                out[k * len + node] =
                    s * (0..n).map(|l| gi[k * 3 + l] * v.comp(l)[node]).sum::<f64>();
            }
        }
        out
    };
    // Degenerate grid modes (wavenumber 0 or Nyquist on every axis) are
    // annihilated by every first difference, so at a flat metric they are
    // exactly the kernel of div*: the Killing fields plus checkerboard modes.
    // The latter are excluded always; constants only when they are Killing.
    let flat = g.is_constant(super::CONSTANT_TOLERANCE);
    let project = |v: &mut [f64]| {
        for c in v.chunks_mut(len) {
            grid.fourier_multiply_modes(c, |_, kind| match kind {
                ModeKind::Regular => 1.0,
                ModeKind::Constant if !flat => 1.0,
                _ => 0.0,
            });
        }
    };
    let field = |v: &[f64]| {
        VectorField::from_components(&grid, v.chunks(len).map(|c| c.to_vec()).collect())
            .expect("shape")
    };
    let apply = |v: &[f64]| {
        let mut p = v.to_vec();
        project(&mut p);
        let x = field(&p);
        let mut out = weight(&ops.divergence(&ops.divergence_adjoint(&x)));
        project(&mut out);
        out
    };
    // Flat-metric symbol of div div* is ½(|ξ|² + ξξᵀ); its average eigenvalue
    // per component is ¾|ξ|². Constant modes (non-flat metrics only) are
    // scaled as the lowest non-zero wavenumber.
    let lowest = grid
        .periods()
        .iter()
        .map(|p| (2.0 * std::f64::consts::PI / p).powi(2))
        .fold(f64::INFINITY, f64::min);
    let precond = |r: &[f64]| {
        let mut out = r.to_vec();
        for c in out.chunks_mut(len) {
            grid.fourier_multiply_modes(c, |mu, kind| match kind {
                ModeKind::Regular => 1.0 / (0.75 * mu.iter().sum::<f64>()),
                ModeKind::Constant if !flat => 1.0 / (0.75 * lowest),
                _ => 0.0,
            });
        }
        out
    };
    let mut rhs = weight(&ops.divergence(h));
    project(&mut rhs);
    // A right-hand side at roundoff level (h already divergence-free) cannot be
    // reduced further in relative terms; the tolerance is floored accordingly.
    let kmax = (0..n)
        .map(|a| std::f64::consts::PI * grid.res()[a] as f64 / grid.periods()[a])
        .fold(0.0, f64::max);
    let floor = ROUNDOFF
        * kmax
        * h.components()
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
    let bnorm = dot(&rhs, &rhs).sqrt();
    let (mut xs, iterations) = if bnorm <= floor {
        (vec![0.0; n * len], 0)
    } else {
        let out = pcg(
            apply,
            &rhs,
            precond,
            None,
            GAUGE_TOLERANCE.max(floor / bnorm),
            5000,
        )?;
        (out.x, out.iterations)
    };
    project(&mut xs);
    let x = field(&xs);
    let gauge = ops.divergence_adjoint(&x);
    let h0 = h.sub(&gauge);
    Ok(GaugeSplit {
        reassembly: norm(g, &h.sub(&h0).sub(&gauge), NormKind::L2, None)?,
        div_h0: norm(g, &ops.divergence(&h0), NormKind::L2, None)?,
        orthogonality: inner(g, &h0, &gauge, None),
        iterations,
        h0,
        x,
    })
}
