//! The `lambda`, `variations`, `flow` and `scan` commands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, ScanSection};
use super::output::OutputDir;
use crate::error::{LabError, Result};
use crate::flow::{
    decay_fit, energy_distance_check, lojasiewicz_scan, run_flow_with, stability_experiment,
    theorem_a_scan, DecayFit, EnergyDistance, FlowRow, FlowStatus, LojasiewiczConfig,
    TheoremAConfig,
};
use crate::manifold::{MetricField, SymTensorField};
use crate::par::Execution;
use crate::sample::random_perturbation;
use crate::spectral::{ground_state_with, SpectralData};
use crate::variation::{
    finite_difference, first_variation, second_variation, second_variation_ricci_flat,
    third_variation, third_variation_bound_scan, third_variation_contour, BoundScanConfig,
    FdLadder, VariationResult,
};

/// Statistics of the minimizer `f`.
#[derive(Serialize)]
struct FStats {
    min: f64,
    max: f64,
    /// Volume average.
    mean: f64,
    /// `∫ e^{−f} dV`.
    weight_mass: f64,
}

#[derive(Serialize)]
struct LambdaSummary {
    lambda: f64,
    spectrum: Vec<f64>,
    gap: f64,
    volume: f64,
    residual: f64,
    f: FStats,
}

fn f_stats(g: &MetricField, sd: &SpectralData) -> FStats {
    let f = sd.f.values();
    let dv: Vec<f64> = g.volume_weights();
    let mass: f64 = f.iter().zip(&dv).map(|(v, w)| (-v).exp() * w).sum();
    let mean = f.iter().zip(&dv).map(|(v, w)| v * w).sum::<f64>() / sd.volume;
    FStats {
        min: f.iter().copied().fold(f64::INFINITY, f64::min),
        max: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        weight_mass: mass,
    }
}

fn execution(cfg: &ExperimentConfig) -> Execution {
    if cfg.parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

pub fn cmd_lambda(cfg: &ExperimentConfig, g: &MetricField, out: &OutputDir) -> Result<()> {
    let sd = ground_state_with(g, cfg.lambda.eigenvalues.max(2), cfg.lambda.method)?;
    let summary = LambdaSummary {
        lambda: sd.lambda,
        spectrum: sd.spectrum.clone(),
        gap: sd.gap,
        volume: sd.volume,
        residual: sd.residual,
        f: f_stats(g, &sd),
    };
    if cfg.lambda.export_fields {
        crate::manifold::snapshot::write_field(&out.path("w.lfld"), &sd.w)?;
        crate::manifold::snapshot::write_field(&out.path("f.lfld"), &sd.f)?;
    }
    out.write_json("results.json", &summary)
}

/// The directions of a `variations` run with their labels.
fn directions(
    cfg: &ExperimentConfig,
    g: &MetricField,
) -> Result<Vec<(String, Option<u64>, SymTensorField)>> {
    let grid = g.grid();
    let v = &cfg.variations;
    let mut out = Vec::new();
    if let Some(p) = &v.direction {
        out.push(("h".to_string(), None, p.evaluate(grid)?));
    }
    for i in 0..v.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let p = random_perturbation(&mut rng, grid.dim(), v.family).with_c2_norm(grid, v.radius)?;
        out.push((format!("h{i}"), Some(cfg.seed), p.evaluate(grid)?));
    }
    if out.is_empty() {
        return Err(LabError::Config(
            "variations needs a `direction` or `samples` > 0".into(),
        ));
    }
    if let Some(bad) = v.orders.iter().find(|o| !(1..=3).contains(*o)) {
        return Err(LabError::Config(format!(
            "variation order {bad} not in 1..=3"
        )));
    }
    Ok(out)
}

/// All methods for one order along one direction.
fn variations_of_order(
    cfg: &ExperimentConfig,
    g: &MetricField,
    sd: &SpectralData,
    h: &SymTensorField,
    order: u8,
) -> Result<Vec<VariationResult>> {
    let v = &cfg.variations;
    let mut rows = Vec::new();
    let reference = match order {
        1 => first_variation(g, sd, h)?,
        2 => second_variation(g, sd, h)?,
        _ => third_variation(g, sd, h)?,
    };
    let reference_value = reference.value;
    let reference_method = reference.method;
    rows.push(reference);
    if order == 2 {
        // The closed form applies only at Ricci-flat metrics along ker div.
        match second_variation_ricci_flat(g, h) {
            Ok(r) => rows.push(r.with_cross(reference_method, reference_value)),
            Err(LabError::Precondition(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if order == 3 && v.contour && sd.basis().is_some() {
        let c = third_variation_contour(
            g,
            sd,
            h,
            sd.default_radius(),
            crate::spectral::CONTOUR_POINTS,
        )?;
        rows.push(c.with_cross(reference_method, reference_value));
    }
    if v.finite_difference {
        let fd = finite_difference(g, h, order, FdLadder::for_order(order))?;
        rows.push(fd.with_cross(reference_method, reference_value));
    }
    Ok(rows)
}

pub fn cmd_variations(cfg: &ExperimentConfig, g: &MetricField, out: &OutputDir) -> Result<()> {
    let dirs = directions(cfg, g)?;
    let sd = ground_state_with(g, cfg.lambda.eigenvalues.max(2), cfg.lambda.method)?;
    let mut results = Vec::new();
    for (id, seed, h) in &dirs {
        for &order in &cfg.variations.orders {
            for r in variations_of_order(cfg, g, &sd, h, order)? {
                results.push(r.labelled("g", id, *seed));
            }
        }
    }
    let mut buf = Vec::new();
    crate::variation::write_csv(&mut buf, &results)?;
    out.write("variations.csv", &buf)?;
    let mut methods: Vec<&str> = Vec::new();
    for m in results.iter().map(|r| r.method.as_str()) {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let worst = results
        .iter()
        .filter_map(VariationResult::cross_error)
        .fold(0.0, f64::max);
    out.write_json(
        "results.json",
        &serde_json::json!({
            "lambda": sd.lambda,
            "directions": dirs.len(),
            "rows": results.len(),
            "methods": methods,
            "max_cross_error": worst,
        }),
    )
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    status: &'a FlowStatus,
    converged: bool,
    dt: f64,
    rows: usize,
    final_row: &'a FlowRow,
    monotone: bool,
    worst_decrease: f64,
    identity_error: Option<f64>,
    perelman_margin: Option<f64>,
    curvature_growth: f64,
    decay_fit: Option<DecayFit>,
    energy_distance: Option<EnergyDistance>,
}

pub fn cmd_flow(cfg: &ExperimentConfig, g: &MetricField, out: &OutputDir) -> Result<()> {
    let background = cfg.build_background(g.grid())?;
    let snapshots = cfg.flow.run.snapshot_every.map(|_| out.path("snapshots"));
    if let Some(dir) = &snapshots {
        std::fs::create_dir_all(dir)?;
    }
    let record = run_flow_with(g, &background, &cfg.flow.run, snapshots.as_deref())?;
    let mut csv = Vec::new();
    record.write_csv(&mut csv)?;
    out.write("flow.csv", &csv)?;
    let summary = FlowSummary {
        status: &record.status,
        converged: record.converged(),
        dt: record.dt,
        rows: record.rows.len(),
        final_row: record.final_row(),
        monotone: record.monotone,
        worst_decrease: record.worst_decrease,
        identity_error: record.identity_error,
        perelman_margin: record.perelman_margin,
        curvature_growth: record.curvature_growth,
        decay_fit: decay_fit(&record),
        energy_distance: cfg.flow.c1c2.map(|c| energy_distance_check(&record, c)),
    };
    out.write_json("summary.json", &summary)?;
    if let Some(st) = &cfg.flow.stability {
        let report = stability_experiment(
            &background,
            &st.amplitudes,
            &st.modes,
            &cfg.flow.run,
            execution(cfg),
        )?;
        out.write_json("stability.json", &report)?;
    }
    Ok(())
}

pub fn cmd_scan(cfg: &ExperimentConfig, out: &OutputDir) -> Result<()> {
    let exec = execution(cfg);
    let (grid, seed) = (&cfg.grid, cfg.seed);
    let need_2d = |what: &str| {
        if grid.dim != 2
            || grid.periods.is_some()
            || grid.scheme != crate::manifold::Scheme::Spectral
        {
            Err(LabError::Config(format!(
                "the {what} scan samples the standard spectral T²"
            )))
        } else {
            Ok(())
        }
    };
    match &cfg.scan {
        ScanSection::Lojasiewicz { samples, radius } => {
            if grid.periods.is_some() {
                return Err(LabError::Config(
                    "the lojasiewicz scan samples the standard torus".into(),
                ));
            }
            let c = LojasiewiczConfig {
                res: grid.res,
                dim: grid.dim,
                scheme: grid.scheme,
                samples: *samples,
                seed,
                radius: *radius,
            };
            out.write_json("scan.json", &lojasiewicz_scan(&c, exec)?)
        }
        ScanSection::TheoremA {
            samples,
            flat_samples,
            radius,
        } => {
            need_2d("theorem_a")?;
            let c = TheoremAConfig {
                res: grid.res,
                samples: *samples,
                flat_samples: *flat_samples,
                seed,
                radius: *radius,
            };
            out.write_json("scan.json", &theorem_a_scan(&c, exec)?)
        }
        ScanSection::Bound {
            samples,
            metric_radius,
            ladder,
        } => {
            need_2d("bound")?;
            let c = BoundScanConfig {
                res: grid.res,
                samples: *samples,
                seed,
                metric_radius: *metric_radius,
                ladder: ladder.clone(),
            };
            out.write_json("scan.json", &third_variation_bound_scan(&c, exec)?)
        }
    }
}
