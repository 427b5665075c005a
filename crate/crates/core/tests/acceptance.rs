//! Desk-scale acceptance suite on the 32×32 square torus.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits nonzero if any
//! criterion fails. Pass a substring to run only the matching criteria,
//! e.g. `cargo test --test acceptance -- flow`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use lambda_lab::decomp::{gauge_split, sector_spectrum, tt_split, Sector};
use lambda_lab::flow::{
    decay_fit, energy_distance_check, lojasiewicz_scan, run_flow, theorem_a_scan, FlowConfig,
    LojasiewiczConfig, ScanReport, TheoremAConfig,
};
use lambda_lab::manifold::{
    norm, MetricField, NormKind, PeriodicGrid, ScalarField, Scheme, SymTensorField,
};
use lambda_lab::par::Execution;
use lambda_lab::sample::{random_perturbation, Family, Perturbation, ScalarMode};
use lambda_lab::spectral::ground_state;
use lambda_lab::variation::{
    finite_difference, first_variation, gradient_field, lemma_terms, linearization_fd,
    linearized_gradient, second_variation, second_variation_ricci_flat, third_variation,
    third_variation_bound_scan, BoundScanConfig, FdLadder, Route,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default grid of every criterion.
const RES: usize = 32;
const SEED: u64 = 42;
/// Radius of the `C²` ball around δ that near-flat samples are drawn from.
const RADIUS: f64 = 0.05;

// Tolerances of the acceptance criteria.
const FLAT_LAMBDA: f64 = 1e-8;
const FLAT_W: f64 = 1e-6;
const FLAT_GRADIENT: f64 = 1e-8;
const GRADIENT_CHECK_PAIRS: usize = 50;
const GRADIENT_CHECK_REL: f64 = 1e-6;
const QUARTER_ABS: f64 = 1e-3;
const KER_DIV_SAMPLES: usize = 20;
const SERIES_CLOSED_REL: f64 = 1e-6;
const LEMMA_SAMPLES: usize = 20;
const CONTOUR_REL: f64 = 1e-8;
const THIRD_FD_REL: f64 = 1e-4;
const LADDER_SPREAD: f64 = 1.5;
const GRID_STABILITY: f64 = 0.2;
const ORTHOGONALITY: f64 = 1e-6;
const LINEARIZATION_ORDER: f64 = 2.0;
const LINEARIZATION_ORDER_SLACK: f64 = 0.2;
const F_RATE: f64 = 1e-6;
const FLOW_RICCI: f64 = 1e-8;
const FLOW_IDENTITY_REL: f64 = 1e-3;
const PERELMAN_SLACK: f64 = 1e-8;
const DECAY_R2: f64 = 0.99;
const REASSEMBLY_REL: f64 = 1e-12;
const TT_ORTHOGONALITY: f64 = 1e-8;
const TT_KERNEL_TOL: f64 = 1e-8;

type Verdict = Result<(bool, String), String>;

fn grid(res: usize) -> Arc<PeriodicGrid> {
    Arc::new(PeriodicGrid::cube(2, res, Scheme::Spectral).unwrap())
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn l2(g: &MetricField, h: &SymTensorField) -> f64 {
    norm(g, h, NormKind::L2, None).unwrap()
}

/// `δ + p` with a mixed `p` of `C²` norm in `[0.2, 1]·RADIUS`.
fn near_flat(grid: &Arc<PeriodicGrid>, rng: &mut ChaCha8Rng) -> lambda_lab::Result<MetricField> {
    let scale = RADIUS * rng.gen_range(0.2..=1.0);
    let p = random_perturbation(rng, 2, Family::Mixed).with_c2_norm(grid, scale)?;
    MetricField::flat(grid).plus(1.0, &p.evaluate(grid)?)
}

fn direction(
    grid: &Arc<PeriodicGrid>,
    rng: &mut ChaCha8Rng,
    family: Family,
) -> lambda_lab::Result<SymTensorField> {
    random_perturbation(rng, 2, family)
        .with_c2_norm(grid, 1.0)?
        .evaluate(grid)
}

fn cu(grid: &Arc<PeriodicGrid>, k: [i32; 2], amp: f64) -> SymTensorField {
    Perturbation {
        conformal: vec![ScalarMode {
            k: k.to_vec(),
            amp,
            phase: 0.0,
        }],
        ..Default::default()
    }
    .evaluate(grid)
    .unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn flat_baseline() -> Verdict {
    let grid = grid(RES);
    let g = MetricField::flat(&grid);
    let sd = ground_state(&g, 2).map_err(e)?;
    let w_err =
        sd.w.values()
            .iter()
            .fold(0.0f64, |m, w| m.max((w - 1.0 / (2.0 * PI)).abs()));
    let grad = gradient_field(&g, &sd).field.max_abs();
    Ok((
        sd.lambda.abs() <= FLAT_LAMBDA && w_err <= FLAT_W && grad <= FLAT_GRADIENT,
        format!(
            "|λ| = {:.1e}, max|w − 1/2π| = {w_err:.1e}, max|Rc + Hess f| = {grad:.1e}",
            sd.lambda.abs()
        ),
    ))
}

fn gradient_check() -> Verdict {
    let grid = grid(RES);
    let mut worst = 0.0f64;
    for i in 0..GRADIENT_CHECK_PAIRS {
        let mut r = rng(100 + i as u64);
        let g = near_flat(&grid, &mut r).map_err(e)?;
        let h = direction(&grid, &mut r, Family::Mixed).map_err(e)?;
        let sd = ground_state(&g, 2).map_err(e)?;
        let analytic = first_variation(&g, &sd, &h).map_err(e)?.value;
        let fd = finite_difference(&g, &h, 1, FdLadder::for_order(1))
            .map_err(e)?
            .value;
        worst = worst.max(rel(analytic, fd));
    }
    Ok((
        worst <= GRADIENT_CHECK_REL,
        format!("max relative error {worst:.2e} over {GRADIENT_CHECK_PAIRS} pairs"),
    ))
}

fn second_variation_closed_form() -> Verdict {
    let grid = grid(RES);
    let flat = MetricField::flat(&grid);
    let sd = ground_state(&flat, 2).map_err(e)?;
    let h = cu(&grid, [1, 0], 1.0);
    let series = second_variation(&flat, &sd, &h).map_err(e)?.value;
    let closed = second_variation_ricci_flat(&flat, &h).map_err(e)?.value;
    let fd = finite_difference(&flat, &h, 2, FdLadder::for_order(2))
        .map_err(e)?
        .value;
    let quarter = [series, closed, fd]
        .iter()
        .fold(0.0f64, |m, v| m.max((v + 0.25).abs()));
    let mut worst = 0.0f64;
    for i in 0..KER_DIV_SAMPLES {
        let mut r = rng(200 + i as u64);
        let raw = direction(&grid, &mut r, Family::Mixed).map_err(e)?;
        let h0 = gauge_split(&flat, &raw).map_err(e)?.h0;
        let s = second_variation(&flat, &sd, &h0).map_err(e)?.value;
        let c = second_variation_ricci_flat(&flat, &h0).map_err(e)?.value;
        worst = worst.max(rel(s, c));
    }
    Ok((
        quarter <= QUARTER_ABS && worst <= SERIES_CLOSED_REL,
        format!(
            "D²λ[Cu,Cu]: series {series:.12}, closed {closed:.12}, FD {fd:.12}; series vs closed max rel {worst:.2e} on {KER_DIV_SAMPLES} ker-div samples"
        ),
    ))
}

fn lemma_cross_oracle() -> Verdict {
    let grid = grid(RES);
    let (mut worst_term, mut worst_fd) = (0.0f64, 0.0f64);
    for i in 0..LEMMA_SAMPLES {
        let mut r = rng(300 + i as u64);
        let g = near_flat(&grid, &mut r).map_err(e)?;
        let h = direction(&grid, &mut r, Family::Mixed).map_err(e)?;
        let sd = ground_state(&g, 2).map_err(e)?;
        let a = lemma_terms(&g, &sd, &h, Route::Resolvent).map_err(e)?;
        let b = lemma_terms(&g, &sd, &h, Route::default_contour(&sd)).map_err(e)?;
        for ((_, x), (_, y)) in a.resolvent_terms().iter().zip(b.resolvent_terms()) {
            worst_term = worst_term.max(rel(y, *x));
        }
        worst_term = worst_term
            .max(rel(b.second(), a.second()))
            .max(rel(b.third(), a.third()));
        let d3 = third_variation(&g, &sd, &h).map_err(e)?.value;
        let fd = finite_difference(&g, &h, 3, FdLadder::for_order(3))
            .map_err(e)?
            .value;
        worst_fd = worst_fd.max(rel(fd, d3));
    }
    Ok((
        worst_term <= CONTOUR_REL && worst_fd <= THIRD_FD_REL,
        format!("contour vs resolvent max rel {worst_term:.2e}; order-3 vs FD max rel {worst_fd:.2e} ({LEMMA_SAMPLES} samples)"),
    ))
}

fn third_variation_bound() -> Verdict {
    let cfg = BoundScanConfig {
        res: RES,
        samples: 100,
        seed: SEED,
        ..Default::default()
    };
    let report = third_variation_bound_scan(&cfg, Execution::Parallel).map_err(e)?;
    let finite = report.max_ratio.is_finite() && report.min_ratio > 0.0;
    Ok((
        finite && report.max_ladder_spread <= LADDER_SPREAD,
        format!(
            "ratio in [{:.3e}, {:.3e}], worst max/min along a ladder {:.4} over {} samples",
            report.min_ratio, report.max_ratio, report.max_ladder_spread, report.samples
        ),
    ))
}

fn theorem_a() -> Verdict {
    let cfg = TheoremAConfig {
        res: RES,
        samples: 200,
        flat_samples: 20,
        seed: SEED,
        radius: RADIUS,
    };
    let r = theorem_a_scan(&cfg, Execution::Parallel).map_err(e)?;
    Ok((
        r.upper_violations == 0 && r.strict_violations == 0 && r.flat_max_abs <= 1e-10,
        format!(
            "max λ {:.2e}; λ > 1e-8 on {}; strict violations {}/{}; flat family max |λ| {:.1e}",
            r.max_lambda, r.upper_violations, r.strict_violations, r.strict_checked, r.flat_max_abs
        ),
    ))
}

fn scan(res: usize) -> Result<ScanReport, String> {
    let cfg = LojasiewiczConfig {
        res,
        samples: 500,
        seed: SEED,
        radius: RADIUS,
        ..Default::default()
    };
    lojasiewicz_scan(&cfg, Execution::Parallel).map_err(e)
}

/// The 32² scan, shared by the scan, orthogonality and flow criteria.
fn scan32() -> Result<&'static ScanReport, String> {
    static CELL: OnceLock<Result<ScanReport, String>> = OnceLock::new();
    CELL.get_or_init(|| scan(RES))
        .as_ref()
        .map_err(Clone::clone)
}

fn theorems_b_c() -> Verdict {
    let fine = scan32()?;
    let coarse = scan(24)?;
    let drift_b = (coarse.c_b / fine.c_b - 1.0).abs();
    let drift_c = (coarse.c_c / fine.c_c - 1.0).abs();
    Ok((
        fine.c_b > 0.0
            && fine.c_c > 0.0
            && drift_b <= GRID_STABILITY
            && drift_c <= GRID_STABILITY
            && fine.ordering_violations == 0
            && coarse.ordering_violations == 0,
        format!(
            "c_B = {:.4} (24²: {:.4}), c_C = {:.4} (24²: {:.4}); {} samples, {} excluded; ordering violations {}/{}",
            fine.c_b, coarse.c_b, fine.c_c, coarse.c_c, fine.count, fine.excluded, fine.ordering_violations,
            coarse.ordering_violations
        ),
    ))
}

fn orthogonality() -> Verdict {
    let r = scan32()?;
    Ok((
        r.max_orthogonality <= ORTHOGONALITY,
        format!(
            "max |⟨Hess f, Rc + Hess f⟩_f| / ‖Rc‖² = {:.2e} over {} samples",
            r.max_orthogonality, r.count
        ),
    ))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn linearization() -> Verdict {
    let grid = grid(RES);
    let flat = MetricField::flat(&grid);
    let tt = SymTensorField::constant(&grid, &[[0.3, 0.2, 0.0], [0.2, -0.3, 0.0], [0.0; 3]]);
    let directions = [cu(&grid, [1, 0], 1.0), cu(&grid, [1, 1], 0.5).add(&tt)];
    let (mut worst_order, mut worst_f) = (0.0f64, 0.0f64);
    let mut orders = Vec::new();
    for h in &directions {
        let lin = linearized_gradient(&flat, h).map_err(e)?;
        let (coarse, fine) = (
            linearization_fd(&flat, h, 2e-2).map_err(e)?,
            linearization_fd(&flat, h, 1e-2).map_err(e)?,
        );
        let ec = coarse.gradient_rate.sub(&lin.gradient_rate).max_abs();
        let ef = fine.gradient_rate.sub(&lin.gradient_rate).max_abs();
        let order = (ec / ef).log2();
        orders.push(order);
        worst_order = worst_order.max((order - LINEARIZATION_ORDER).abs());
        // Richardson-extrapolated f-rate against ½ tr h, both with their means removed.
        let rich: Vec<f64> = fine
            .f_rate
            .values()
            .iter()
            .zip(coarse.f_rate.values())
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect();
        let rich = ScalarField::from_values(&grid, rich).map_err(e)?;
        let (mr, ml) = (mean(rich.values()), mean(lin.f_rate.values()));
        let diff = rich
            .values()
            .iter()
            .zip(lin.f_rate.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - mr - (b - ml)).abs()));
        worst_f = worst_f.max(diff);
    }
    Ok((
        worst_order <= LINEARIZATION_ORDER_SLACK && worst_f <= F_RATE,
        format!("observed orders {orders:.3?}; f-rate vs ½ tr h (mod constants) max {worst_f:.2e}"),
    ))
}

fn flow_suite() -> Verdict {
    let grid = grid(RES);
    let flat = MetricField::flat(&grid);
    let g0 = flat.plus(0.02, &cu(&grid, [1, 0], 1.0)).map_err(e)?;
    let start = Instant::now();
    let rec = run_flow(&g0, &flat, &FlowConfig::default()).map_err(e)?;
    let elapsed = start.elapsed().as_secs_f64();
    let scan = scan32()?;
    let energy = energy_distance_check(&rec, scan.c1c2());
    let fit = decay_fit(&rec).ok_or("no rows above the λ noise floor to fit")?;
    let final_ricci = rec.final_row().ricci_l2;
    let identity = rec.identity_error.unwrap_or(f64::INFINITY);
    let perelman = rec.perelman_margin.unwrap_or(f64::NEG_INFINITY);
    Ok((
        rec.converged()
            && final_ricci < FLOW_RICCI
            && rec.monotone
            && identity <= FLOW_IDENTITY_REL
            && perelman >= -PERELMAN_SLACK
            && energy.holds
            && fit.r_squared >= DECAY_R2
            && elapsed <= 900.0,
        format!(
            "converged {} at t = {:.2}, final ‖Rc‖ {final_ricci:.1e}; monotone {}; identity {identity:.1e}; \
             Perelman margin {perelman:.1e}; energy–distance worst margin {:.1e} (C₁C₂ = {:.3}); \
             decay rate {:.3}, R² {:.5}; {elapsed:.0} s",
            rec.converged(),
            rec.final_row().t,
            rec.monotone,
            energy.worst_margin,
            scan.c1c2(),
            fit.rate,
            fit.r_squared
        ),
    ))
}

fn decomposition() -> Verdict {
    let grid = grid(RES);
    let flat = MetricField::flat(&grid);
    let (mut reassembly, mut tt_orth) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let mut r = rng(400 + i as u64);
        let h = direction(&grid, &mut r, Family::Mixed).map_err(e)?;
        let s = gauge_split(&flat, &h).map_err(e)?;
        reassembly = reassembly.max(s.reassembly / l2(&flat, &h));
        let t = tt_split(&flat, &s.h0).map_err(e)?;
        reassembly = reassembly.max(t.norms.reassembly / l2(&flat, &s.h0));
        tt_orth = tt_orth.max(t.norms.orthogonality);
    }
    let tt = sector_spectrum(&flat, Sector::Tt, Execution::Parallel).map_err(e)?;
    let kernel = tt.kernel_dimension(TT_KERNEL_TOL);
    let tt_max = tt.max().unwrap_or(f64::NAN);
    let conf_max = sector_spectrum(&flat, Sector::Conformal, Execution::Parallel)
        .map_err(e)?
        .max()
        .unwrap_or(f64::NAN);
    Ok((
        reassembly <= REASSEMBLY_REL && tt_orth <= TT_ORTHOGONALITY && kernel == 2 && tt_max <= TT_KERNEL_TOL && conf_max < 0.0,
        format!(
            "reassembly {reassembly:.1e} rel; TT orthogonality {tt_orth:.1e}; TT kernel {kernel}, top {tt_max:.1e}; im C top {conf_max:.4}"
        ),
    ))
}

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("flat-baseline", flat_baseline),
        ("gradient-check", gradient_check),
        ("second-variation-closed-form", second_variation_closed_form),
        ("lemma-cross-oracle", lemma_cross_oracle),
        ("third-variation-bound", third_variation_bound),
        ("theorem-a", theorem_a),
        ("theorems-b-c-scan", theorems_b_c),
        ("gradient-orthogonality", orthogonality),
        ("linearization", linearization),
        ("flow-suite", flow_suite),
        ("decomposition-suite", decomposition),
    ];
    lambda_lab::par::configure_threads(None);
    let mut failed = 0;
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(msg) => (false, format!("error: {msg}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
