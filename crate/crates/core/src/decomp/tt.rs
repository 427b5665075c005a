use super::require_constant;
use crate::error::{LabError, Result};
use crate::linalg::pcg;
use crate::manifold::norms::inner;
use crate::manifold::ops::divergence_form;
use crate::manifold::{
    divergence, hessian, lichnerowicz, norm, trace, MetricField, NormKind, ScalarField,
    SymTensorField,
};
use crate::variation::DIVERGENCE_TOLERANCE;

/// `C u = (Δu) g − Hess u`, with `Δu = tr_g Hess u` so that the discrete
/// identity `div C u = 0` holds exactly at constant metrics.
pub fn conformal_op(g: &MetricField, u: &ScalarField) -> SymTensorField {
    let hess = hessian(g, u);
    let lap = trace(g, &hess);
    let mut out = g.tensor().clone();
    for c in out.components_mut() {
        for (v, l) in c.iter_mut().zip(lap.values()) {
            *v *= l;
        }
    }
    out.sub(&hess)
}

/// `L²` adjoint of [`conformal_op`] at a constant metric:
/// `C*k = Δ tr k − div div k`.
pub fn conformal_adjoint(g: &MetricField, k: &SymTensorField) -> ScalarField {
    let lap_tr = trace(g, &hessian(g, &trace(g, k)));
    let dd = divergence_form(g, &divergence(g, k));
    lap_tr.sub(&dd)
}

/// `h = c·g + C u + h_TT` for divergence-free `h` at a flat metric.
#[derive(Clone, Debug)]
pub struct TtSplit {
    pub scale: f64,
    pub scale_part: SymTensorField,
    /// Mean-zero generator of the conformal part.
    pub u: ScalarField,
    pub conformal_part: SymTensorField,
    pub tt_part: SymTensorField,
    /// Component of `h_TT` in `K` (parallel trace-free tensors).
    pub kernel_part: SymTensorField,
    pub norms: TtNorms,
}

/// Residual diagnostics of a [`TtSplit`], all in `L²(dV_g)`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TtNorms {
    pub reassembly: f64,
    pub tt_divergence: f64,
    pub tt_trace: f64,
    /// Largest `|⟨a,b⟩| / (‖a‖‖b‖)` over the three pairs of parts (zero parts skipped).
    pub orthogonality: f64,
    /// `‖Δ^L k‖` for the kernel part `k`.
    pub kernel_residual: f64,
}

const CONFORMAL_TOLERANCE: f64 = 1e-13;

fn require_divergence_free(g: &MetricField, h: &SymTensorField) -> Result<()> {
    let h1 = norm(g, h, NormKind::H1, None)?;
    let div = norm(g, &divergence(g, h), NormKind::L2, None)?;
    if div > DIVERGENCE_TOLERANCE * h1 {
        return Err(LabError::Precondition(format!(
            "h is not divergence-free: ‖div h‖ = {div:.3e}"
        )));
    }
    Ok(())
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Splits divergence-free `h` at a flat metric into scale, conformal and TT
/// parts. The conformal generator solves the normal equations
/// `C*C u = C*(h − c g)` (`C*C = (n−1)Δ²`), pinned by `∫u = 0`; the TT part
/// is the remainder.
pub fn tt_split(g: &MetricField, h: &SymTensorField) -> Result<TtSplit> {
    require_constant(g)?;
    require_divergence_free(g, h)?;
    let grid = g.grid().clone();
    let n = grid.dim() as f64;
    let gt = g.tensor();
    let scale = inner(g, h, gt, None) / inner(g, gt, gt, None);
    let scale_part = gt.scaled(scale);
    let r = h.sub(&scale_part);

    let apply = |v: &[f64]| {
        let mut u = v.to_vec();
        remove_mean(&mut u);
        let u = ScalarField::from_values(&grid, u).expect("shape");
        let mut out = conformal_adjoint(g, &conformal_op(g, &u)).values().to_vec();
        remove_mean(&mut out);
        out
    };
    let precond = |res: &[f64]| {
        let mut out = res.to_vec();
        grid.fourier_multiply(&mut out, |mu| {
            let s: f64 = mu.iter().sum();
            if s > 0.0 {
                1.0 / ((n - 1.0) * s * s)
            } else {
                0.0
            }
        });
        remove_mean(&mut out);
        out
    };
    let mut rhs = conformal_adjoint(g, &r).values().to_vec();
    remove_mean(&mut rhs);
    let sol = pcg(apply, &rhs, precond, None, CONFORMAL_TOLERANCE, 2000)?;
    let mut u = sol.x;
    remove_mean(&mut u);
    let u = ScalarField::from_values(&grid, u)?;
    let conformal_part = conformal_op(g, &u);
    let tt_part = r.sub(&conformal_part);

    // At a flat metric K is the constant trace-free tensors; the L² projection
    // onto constants is the componentwise mean (h_TT is already trace-free).
    let mut kernel_part = tt_part.clone();
    for c in kernel_part.components_mut() {
        let m = c.iter().sum::<f64>() / c.len() as f64;
        c.iter_mut().for_each(|x| *x = m);
    }

    let l2 = |t: &SymTensorField| norm(g, t, NormKind::L2, None);
    let parts = [&scale_part, &conformal_part, &tt_part];
    let sizes = parts.iter().map(|p| l2(p)).collect::<Result<Vec<_>>>()?;
    let mut orthogonality: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            if sizes[i] > 0.0 && sizes[j] > 0.0 {
                orthogonality = orthogonality
                    .max(inner(g, parts[i], parts[j], None).abs() / (sizes[i] * sizes[j]));
            }
        }
    }
    let norms = TtNorms {
        reassembly: l2(&h.sub(&scale_part).sub(&conformal_part).sub(&tt_part))?,
        tt_divergence: norm(g, &divergence(g, &tt_part), NormKind::L2, None)?,
        tt_trace: norm(g, &trace(g, &tt_part), NormKind::L2, None)?,
        orthogonality,
        kernel_residual: l2(&lichnerowicz(g, &kernel_part))?,
    };
    Ok(TtSplit {
        scale,
        scale_part,
        u,
        conformal_part,
        tt_part,
        kernel_part,
        norms,
    })
}

/// Removes the tangent space of the flat family (the constant symmetric
/// tensors `ℝg ⊕ K`) from divergence-free `h` at a flat metric.
pub fn project_normal(g: &MetricField, h: &SymTensorField) -> Result<SymTensorField> {
    require_constant(g)?;
    require_divergence_free(g, h)?;
    let mut out = h.clone();
    for c in out.components_mut() {
        remove_mean(c);
    }
    Ok(out)
}

/// `⟨h_N, Δ^L h_N⟩ / ⟨h_N, h_N⟩` for the normal part `h_N` of `h`; `None`
/// when `h` is tangent to the flat family.
pub fn normal_rayleigh_quotient(g: &MetricField, h: &SymTensorField) -> Result<Option<f64>> {
    let hn = project_normal(g, h)?;
    let nn = inner(g, &hn, &hn, None);
    if nn <= f64::EPSILON * inner(g, h, h, None) || nn == 0.0 {
        return Ok(None);
    }
    Ok(Some(inner(g, &hn, &lichnerowicz(g, &hn), None) / nn))
}

/// Empirical spectral gap on the normal space from random samples.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RayleighReport {
    pub seed: u64,
    pub samples: usize,
    /// Rayleigh quotient of each sample that has a normal component.
    pub quotients: Vec<f64>,
    /// `c = −max quotient`; positive when the spectral gap holds.
    pub c: f64,
    /// Samples tangent to the flat family (no normal component).
    pub skipped: usize,
}

/// Draws `samples` random mixed perturbations at a flat metric, removes their
/// gauge and tangent parts, and records `⟨h_N, Δ^L h_N⟩ / ⟨h_N, h_N⟩`.
pub fn normal_rayleigh_scan(
    g: &MetricField,
    samples: usize,
    seed: u64,
    exec: crate::par::Execution,
) -> Result<RayleighReport> {
    use rand::SeedableRng;
    let grid = g.grid().clone();
    let results = crate::par::map(exec, samples, |i| -> Result<Option<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let p =
            crate::sample::random_perturbation(&mut rng, grid.dim(), crate::sample::Family::Mixed);
        let split = super::gauge_split(g, &p.evaluate(&grid)?)?;
        normal_rayleigh_quotient(g, &split.h0)
    });
    let mut quotients = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(q) => quotients.push(q),
            None => skipped += 1,
        }
    }
    let c = -quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RayleighReport {
        seed,
        samples,
        quotients,
        c,
        skipped,
    })
}
