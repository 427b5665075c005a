//! The derivative operators `H′[h]`, `H″[h,h]`, `H‴[h,h,h]` of the family
//! `ε ↦ H_{g+εh}`.

use crate::error::Result;
use crate::manifold::ops::{
    covector_inner_pointwise, curvature, divergence, divergence_form, gradient, hessian,
    inner_pointwise, laplace_beltrami, trace,
};
use crate::manifold::{MetricField, ScalarField, SymTensorField};
use crate::spectral::{PerturbedSchrodinger, Schrodinger};

/// `H′[h]u = 4⟨h, Hess u⟩ + 4⟨div h, Du⟩ − 2⟨D tr h, Du⟩
///          + (div div h − Δ tr h − ⟨h, Rc⟩) u`, assembled term by term
/// from the geometric operators.
pub fn h_prime_apply(g: &MetricField, h: &SymTensorField, u: &ScalarField) -> ScalarField {
    let grid = g.grid();
    let hess = hessian(g, u);
    let du = gradient(u);
    let div_h = divergence(g, h);
    let tr_h = trace(g, h);
    let dtr = gradient(&tr_h);
    let rc = curvature(g).ricci;

    let second = inner_pointwise(g, h, &hess);
    let first_div = covector_inner_pointwise(g, &div_h, &du);
    let first_tr = covector_inner_pointwise(g, &dtr, &du);
    let div_div = divergence_form(g, &div_h);
    let lap_tr = laplace_beltrami(g, &tr_h);
    let h_rc = inner_pointwise(g, h, &rc);

    let vals = (0..grid.len())
        .map(|i| {
            let potential = div_div.values()[i] - lap_tr.values()[i] - h_rc[i];
            4.0 * second[i] + 4.0 * first_div[i] - 2.0 * first_tr[i] + potential * u.values()[i]
        })
        .collect();
    ScalarField::from_values(grid, vals).expect("shape")
}

/// `[H′u, H″u, H‴u]`, exact ε-derivatives of the assembled operator.
pub fn operator_derivatives(
    g: &MetricField,
    h: &SymTensorField,
    u: &ScalarField,
) -> Result<[ScalarField; 3]> {
    let op = PerturbedSchrodinger::new(g, h)?;
    let [_, d1, d2, d3] = op.apply_all(u.values());
    let grid = g.grid();
    Ok([d1, d2, d3].map(|v| ScalarField::from_values(grid, v).expect("shape")))
}

/// `[H′u, H″u, H‴u]` by the 5-point ε-stencil on `H_{g+εh}` (truncation
/// error `O(ε²)`); cross-checks [`operator_derivatives`].
pub fn operator_derivatives_stencil(
    g: &MetricField,
    h: &SymTensorField,
    u: &ScalarField,
    eps: f64,
) -> Result<[ScalarField; 3]> {
    let mut vals = Vec::with_capacity(5);
    for s in [-2.0, -1.0, 1.0, 2.0] {
        vals.push(Schrodinger::new(&g.plus(s * eps, h)?).apply(u.values()));
    }
    let h0 = Schrodinger::new(g).apply(u.values());
    let [m2, m1, p1, p2] = [&vals[0], &vals[1], &vals[2], &vals[3]];
    let len = h0.len();
    let d1 = (0..len)
        .map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * eps))
        .collect();
    let d2 = (0..len)
        .map(|i| (-p2[i] + 16.0 * p1[i] - 30.0 * h0[i] + 16.0 * m1[i] - m2[i]) / (12.0 * eps * eps))
        .collect();
    let d3 = (0..len)
        .map(|i| (p2[i] - 2.0 * p1[i] + 2.0 * m1[i] - m2[i]) / (2.0 * eps.powi(3)))
        .collect();
    let grid = g.grid();
    Ok([d1, d2, d3].map(|v| ScalarField::from_values(grid, v).expect("shape")))
}
