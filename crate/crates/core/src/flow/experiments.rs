use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decay_fit, diagnose, run_flow, FlowConfig, LAMBDA_NOISE_FLOOR, RICCI_NOISE_FLOOR};
use crate::decomp::{gauge_split, project_normal};
use crate::error::Result;
use crate::manifold::{norm, MetricField, NormKind, PeriodicGrid, Scheme};
use crate::par::{self, Execution};
use crate::sample::{random_perturbation, Family, Perturbation};

/// `C⁰` distance from `g` to the nearest constant metric: half the largest
/// oscillation of any component.
pub fn flat_family_distance(g: &MetricField) -> f64 {
    g.tensor()
        .components()
        .iter()
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            0.5 * (hi - lo)
        })
        .fold(0.0, f64::max)
}

fn sample_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Resolution on which sample amplitudes are normalized, so that every grid
/// of a comparison sees the same analytic perturbation.
const REFERENCE_RES: usize = 32;

fn reference_grid(n: usize) -> Result<Arc<PeriodicGrid>> {
    Ok(Arc::new(PeriodicGrid::cube(
        n,
        REFERENCE_RES,
        Scheme::Spectral,
    )?))
}

/// One perturbation of the stability experiment.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityCase {
    pub amplitude: f64,
    pub mode: usize,
    pub converged: bool,
    pub t_end: f64,
    pub final_ricci: f64,
    /// `C⁰` distance of the limit to the flat family.
    pub flat_distance: f64,
    /// `C⁰` distance of the limit to the background.
    pub background_distance: f64,
    pub decay_rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub cases: Vec<StabilityCase>,
    pub all_converged: bool,
    /// Largest amplitude whose run converged.
    pub largest_converged_amplitude: Option<f64>,
}

/// Limit metrics closer than this to the flat family count as flat.
pub const FLAT_LIMIT_TOLERANCE: f64 = 1e-6;

/// Runs the flow from `background + a·mode` for every amplitude and mode.
pub fn stability_experiment(
    background: &MetricField,
    amplitudes: &[f64],
    modes: &[Perturbation],
    config: &FlowConfig,
    exec: Execution,
) -> Result<StabilityReport> {
    let grid = background.grid().clone();
    let jobs: Vec<(f64, usize)> = amplitudes
        .iter()
        .flat_map(|&a| (0..modes.len()).map(move |m| (a, m)))
        .collect();
    let cases = par::map_slice(exec, &jobs, |&(amplitude, mode)| -> Result<StabilityCase> {
        let h = modes[mode].scaled(amplitude).evaluate(&grid)?;
        let g0 = background.plus(1.0, &h)?;
        Ok(match run_flow(&g0, background, config) {
            Ok(rec) => {
                let fit = decay_fit(&rec);
                let flat_distance = flat_family_distance(&rec.final_metric);
                StabilityCase {
                    amplitude,
                    mode,
                    converged: rec.converged() && flat_distance < FLAT_LIMIT_TOLERANCE,
                    t_end: rec.final_row().t,
                    final_ricci: rec.final_row().ricci_l2,
                    flat_distance,
                    background_distance: rec
                        .final_metric
                        .tensor()
                        .sub(background.tensor())
                        .max_abs(),
                    decay_rate: fit.map(|f| f.rate),
                    r_squared: fit.map(|f| f.r_squared),
                    error: None,
                }
            }
            Err(e) => StabilityCase {
                amplitude,
                mode,
                converged: false,
                t_end: f64::NAN,
                final_ricci: f64::NAN,
                flat_distance: f64::NAN,
                background_distance: f64::NAN,
                decay_rate: None,
                r_squared: None,
                error: Some(e.to_string()),
            },
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let all_converged = cases.iter().all(|c| c.converged);
    let largest_converged_amplitude = cases
        .iter()
        .filter(|c| c.converged)
        .map(|c| c.amplitude)
        .reduce(f64::max);
    Ok(StabilityReport {
        cases,
        all_converged,
        largest_converged_amplitude,
    })
}

/// Sampler of the Łojasiewicz/transversality scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LojasiewiczConfig {
    pub res: usize,
    pub dim: usize,
    pub scheme: Scheme,
    pub samples: usize,
    pub seed: u64,
    /// Samples lie in the `C²` ball of this radius around δ.
    pub radius: f64,
}

impl Default for LojasiewiczConfig {
    fn default() -> Self {
        Self {
            res: 32,
            dim: 2,
            scheme: Scheme::Spectral,
            samples: 500,
            seed: 42,
            radius: 0.05,
        }
    }
}

/// Empirical constants of the Łojasiewicz and transversality inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    /// `min ‖Rc + Hess f‖_{L²} / |λ|^{1/2}`.
    #[serde(rename = "c_B")]
    pub c_b: f64,
    /// `min ‖Rc + Hess f‖_{L²} / ‖Rc‖_{L²}`.
    #[serde(rename = "c_C")]
    pub c_c: f64,
    /// `min ‖Rc + Hess f‖_{L²_f} / |λ|^{1/2}`: `1/C₁` in the flow estimates.
    pub c_b_weighted: f64,
    /// `min ‖Rc + Hess f‖_{L²_f} / ‖Rc‖_{L²}`: `1/C₂` in the flow estimates.
    pub c_c_mixed: f64,
    pub count: usize,
    pub seed: u64,
    /// Samples dropped from at least one ratio at the noise floor.
    pub excluded: usize,
    /// Samples above the Ricci floor violating `‖Rc + Hess f‖_{L²_f} ≤ ‖Rc‖_{L²_f}`.
    pub ordering_violations: usize,
    /// `max |⟨Hess f, Rc + Hess f⟩_{L²_f}| / ‖Rc‖²_{L²}` over samples with `‖Rc‖` above the floor.
    pub max_orthogonality: f64,
    pub res: usize,
}

impl ScanReport {
    /// `C₁C₂` for the energy–distance inequality.
    pub fn c1c2(&self) -> f64 {
        1.0 / (self.c_b_weighted * self.c_c_mixed)
    }

    /// `C₁` for the exponential decay of `|λ|`.
    pub fn c1(&self) -> f64 {
        1.0 / self.c_b_weighted
    }
}

const SCAN_FAMILIES: [Family; 5] = [
    Family::Gauge,
    Family::Conformal,
    Family::Tt,
    Family::Mixed,
    Family::Flat,
];

/// Samples `δ + h` in a `C²` ball and records the gradient-norm ratios.
pub fn lojasiewicz_scan(config: &LojasiewiczConfig, exec: Execution) -> Result<ScanReport> {
    let grid = Arc::new(PeriodicGrid::cube(config.dim, config.res, config.scheme)?);
    let reference = reference_grid(config.dim)?;
    let flat = MetricField::flat(&grid);
    let diagnoses = par::map(exec, config.samples, |i| -> Result<_> {
        let mut rng = sample_rng(config.seed, i);
        let family = SCAN_FAMILIES[i % SCAN_FAMILIES.len()];
        let scale = config.radius * rng.gen_range(0.2..=1.0);
        let p =
            random_perturbation(&mut rng, config.dim, family).with_c2_norm(&reference, scale)?;
        let g = flat.plus(1.0, &p.evaluate(&grid)?)?;
        diagnose(&g, None)
    });
    let mut report = ScanReport {
        c_b: f64::INFINITY,
        c_c: f64::INFINITY,
        c_b_weighted: f64::INFINITY,
        c_c_mixed: f64::INFINITY,
        count: config.samples,
        seed: config.seed,
        excluded: 0,
        ordering_violations: 0,
        max_orthogonality: 0.0,
        res: config.res,
    };
    for d in diagnoses {
        let d = d?;
        let lam_ok = d.lambda.abs() >= LAMBDA_NOISE_FLOOR;
        let rc_ok = d.ricci_l2 >= RICCI_NOISE_FLOOR;
        if !(lam_ok && rc_ok) {
            report.excluded += 1;
        }
        if lam_ok {
            let s = d.lambda.abs().sqrt();
            report.c_b = report.c_b.min(d.gradient_l2 / s);
            report.c_b_weighted = report.c_b_weighted.min(d.gradient_l2f / s);
        }
        if rc_ok {
            report.c_c = report.c_c.min(d.gradient_l2 / d.ricci_l2);
            report.c_c_mixed = report.c_c_mixed.min(d.gradient_l2f / d.ricci_l2);
            report.max_orthogonality = report
                .max_orthogonality
                .max(d.orthogonality.abs() / (d.ricci_l2 * d.ricci_l2));
        }
        // Below the floor both sides are round-off and the ordering is vacuous.
        if rc_ok && d.gradient_l2f > d.ricci_l2f * (1.0 + 1e-12) {
            report.ordering_violations += 1;
        }
    }
    Ok(report)
}

/// Sampler of the desk-scale Theorem A check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremAConfig {
    pub res: usize,
    pub samples: usize,
    /// Extra samples drawn from the flat family itself.
    pub flat_samples: usize,
    pub seed: u64,
    pub radius: f64,
}

impl Default for TheoremAConfig {
    fn default() -> Self {
        Self {
            res: 32,
            samples: 200,
            flat_samples: 20,
            seed: 42,
            radius: 0.05,
        }
    }
}

/// Thresholds of the Theorem A check.
pub const THEOREM_A_UPPER: f64 = 1e-8;
pub const THEOREM_A_NORMAL_H1: f64 = 1e-3;
pub const THEOREM_A_STRICT: f64 = -1e-10;
pub const THEOREM_A_FLAT: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct TheoremARow {
    pub lambda: f64,
    /// `‖h_N‖_{H¹}` of the normal part of `g − δ`.
    pub normal_h1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremAReport {
    pub seed: u64,
    pub rows: Vec<TheoremARow>,
    pub max_lambda: f64,
    /// Samples with `λ > 10⁻⁸`.
    pub upper_violations: usize,
    /// Samples with `‖h_N‖_{H¹} > 10⁻³` but `λ ≥ −10⁻¹⁰`.
    pub strict_violations: usize,
    pub strict_checked: usize,
    /// `max |λ|` over flat-family members.
    pub flat_max_abs: f64,
    /// Whether any sample had `λ > 10⁻¹⁰` (the positive-λ probe).
    pub positive_found: bool,
}

/// Samples `g = δ + h` with `‖h‖_{C²} ≤ radius` (gauge, conformal, constant
/// trace-free and mixed directions) plus constant metrics, and checks
/// `λ ≤ 0` with strict negativity off the flat family.
pub fn theorem_a_scan(config: &TheoremAConfig, exec: Execution) -> Result<TheoremAReport> {
    let grid = Arc::new(PeriodicGrid::cube(2, config.res, Scheme::Spectral)?);
    let reference = reference_grid(2)?;
    let flat = MetricField::flat(&grid);
    const FAMILIES: [Family; 4] = [Family::Gauge, Family::Conformal, Family::Tt, Family::Mixed];
    let rows = par::map(exec, config.samples, |i| -> Result<TheoremARow> {
        let mut rng = sample_rng(config.seed, i);
        let scale = config.radius * rng.gen_range(0.05..=1.0);
        let p = random_perturbation(&mut rng, 2, FAMILIES[i % FAMILIES.len()])
            .with_c2_norm(&reference, scale)?;
        let h = p.evaluate(&grid)?;
        let h0 = gauge_split(&flat, &h)?.h0;
        // A pure-gauge sample leaves a round-off h₀ whose divergence cannot be
        // certified relative to itself; its normal part is zero.
        let normal_h1 = if h0.max_abs() <= 1e-12 * h.max_abs() {
            0.0
        } else {
            norm(&flat, &project_normal(&flat, &h0)?, NormKind::H1, None)?
        };
        let lambda = diagnose(&flat.plus(1.0, &h)?, None)?.lambda;
        Ok(TheoremARow { lambda, normal_h1 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let flat_lambdas = par::map(exec, config.flat_samples, |i| -> Result<f64> {
        let mut rng = sample_rng(config.seed ^ 0x5eed, i);
        let scale = config.radius * rng.gen_range(0.05..=1.0);
        let p = random_perturbation(&mut rng, 2, Family::Flat).with_c2_norm(&reference, scale)?;
        Ok(diagnose(&flat.plus(1.0, &p.evaluate(&grid)?)?, None)?.lambda)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let strict: Vec<_> = rows
        .iter()
        .filter(|r| r.normal_h1 > THEOREM_A_NORMAL_H1)
        .collect();
    let all_lambdas = rows
        .iter()
        .map(|r| r.lambda)
        .chain(flat_lambdas.iter().copied());
    Ok(TheoremAReport {
        seed: config.seed,
        max_lambda: rows
            .iter()
            .map(|r| r.lambda)
            .fold(f64::NEG_INFINITY, f64::max),
        upper_violations: rows.iter().filter(|r| r.lambda > THEOREM_A_UPPER).count(),
        strict_violations: strict
            .iter()
            .filter(|r| r.lambda >= THEOREM_A_STRICT)
            .count(),
        strict_checked: strict.len(),
        flat_max_abs: flat_lambdas.iter().fold(0.0, |m, v| m.max(v.abs())),
        positive_found: all_lambdas.clone().any(|l| l > THEOREM_A_FLAT),
        rows,
    })
}
