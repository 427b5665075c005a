//! Ricci–DeTurck flow with live λ diagnostics: monotonicity, the evolution
//! identity `dλ/dt = 2‖Rc + Hess f‖²_{L²_f}`, Łojasiewicz and transversality
//! ratios, and the experiments built on them.

mod checks;
mod experiments;
mod monitor;
mod step;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use checks::{
    decay_fit, energy_distance_check, exponential_decay_check, gauge_soundness, DecayFit,
    EnergyDistance, GaugeSoundness,
};
pub use experiments::{
    flat_family_distance, lojasiewicz_scan, stability_experiment, theorem_a_scan,
    LojasiewiczConfig, ScanReport, StabilityCase, StabilityReport, TheoremAConfig, TheoremAReport,
    TheoremARow, FLAT_LIMIT_TOLERANCE, THEOREM_A_FLAT, THEOREM_A_NORMAL_H1, THEOREM_A_STRICT,
    THEOREM_A_UPPER,
};
pub use monitor::{diagnose, Diagnosis};
pub use step::{deturck_step, flow_rhs, flow_step, max_time_step, stability_constant, Gauge};

use crate::error::{LabError, Result};
use crate::manifold::snapshot::write_field;
use crate::manifold::{norm, MetricField, NormKind};

/// `|λ|` below this counts as "at the critical set": Łojasiewicz ratios and
/// the relative identity check skip such rows.
pub const LAMBDA_NOISE_FLOOR: f64 = 1e-10;
/// `‖Rc‖_{L²}` below this makes the transversality ratio meaningless.
pub const RICCI_NOISE_FLOOR: f64 = 1e-8;

/// Parameters of one flow run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Time step; `None` uses 90% of the stability bound at `g(0)`.
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Steps between monitor rows.
    pub cadence: usize,
    pub gauge: Gauge,
    /// Convergence: `‖Rc‖_{L²}` below this …
    pub ricci_tolerance: f64,
    /// … and `|λ|` below this …
    pub lambda_tolerance: f64,
    /// … for this many consecutive rows.
    pub sustain: usize,
    /// Abort when `‖g − background‖_{C²}` exceeds this.
    pub divergence_radius: f64,
    /// Allowed decrease of λ between rows, relative to `1 + |λ|`.
    pub monotone_tolerance: f64,
    /// Write an LFLD snapshot every this many rows (needs a snapshot directory).
    pub snapshot_every: Option<usize>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_max: 40.0,
            cadence: 10,
            gauge: Gauge::DeTurck,
            ricci_tolerance: 1e-8,
            lambda_tolerance: 1e-12,
            sustain: 10,
            divergence_radius: 1.0,
            monotone_tolerance: 1e-8,
            snapshot_every: None,
        }
    }
}

/// One monitor row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub t: f64,
    pub lambda: f64,
    pub ricci_l2: f64,
    /// `‖Rc + Hess f‖_{L²_f}`.
    pub gradient_l2f: f64,
    pub distance_c0: f64,
    pub distance_c2: f64,
    /// `‖Rc + Hess f‖_{L²} / |λ|^{1/2}`; empty at the noise floor.
    pub lojasiewicz_ratio: Option<f64>,
    /// `‖Rc + Hess f‖_{L²} / ‖Rc‖_{L²}`; empty at the noise floor.
    pub transversality_ratio: Option<f64>,
    /// Five-point time difference of λ; empty on the two rows at each end.
    pub dlambda_dt: Option<f64>,
    /// `2‖Rc + Hess f‖²_{L²_f}`.
    pub twice_gradient_sq: f64,
    /// `max |Rm|` over the grid.
    pub curvature_sup: f64,
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum FlowStatus {
    Converged { t: f64 },
    TimeLimit { t: f64 },
}

/// Time series and verdicts of a run.
#[derive(Clone, Debug, Serialize)]
pub struct FlowRecord {
    pub dt: f64,
    pub cadence: usize,
    pub gauge: Gauge,
    pub status: FlowStatus,
    pub rows: Vec<FlowRow>,
    /// Largest drop `λ_i − λ_{i+1}` between rows (negative when increasing).
    pub worst_decrease: f64,
    pub monotone: bool,
    /// Largest `|dλ/dt − 2‖G‖²| / 2‖G‖²` over rows with `|λ| ≥` noise floor.
    pub identity_error: Option<f64>,
    /// Smallest `dλ/dt − (2/n)λ²` over rows with a time derivative.
    pub perelman_margin: Option<f64>,
    /// `max_t sup|Rm| / sup|Rm|(0)` (1 when the start is flat).
    pub curvature_growth: f64,
    #[serde(skip)]
    pub final_metric: MetricField,
}

impl FlowRecord {
    pub fn converged(&self) -> bool {
        matches!(self.status, FlowStatus::Converged { .. })
    }

    pub fn final_row(&self) -> &FlowRow {
        self.rows.last().expect("a record has at least one row")
    }

    /// CSV with one line per monitor row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| LabError::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the flow from `g0` against the flat `background`.
pub fn run_flow(
    g0: &MetricField,
    background: &MetricField,
    config: &FlowConfig,
) -> Result<FlowRecord> {
    run_flow_with(g0, background, config, None)
}

/// [`run_flow`], writing `g_<row>.lfld` snapshots into `snapshots` at the
/// configured cadence.
pub fn run_flow_with(
    g0: &MetricField,
    background: &MetricField,
    config: &FlowConfig,
    snapshots: Option<&Path>,
) -> Result<FlowRecord> {
    crate::decomp::require_constant(background)?;
    if config.cadence == 0 || config.sustain == 0 || !(config.t_max >= 0.0) {
        return Err(LabError::Config(
            "cadence and sustain must be positive, t_max nonnegative".into(),
        ));
    }
    let bound = max_time_step(g0);
    let dt = config.dt.unwrap_or(0.9 * bound);
    if !(dt > 0.0) || dt > bound {
        return Err(LabError::Config(format!(
            "time step {dt:e} outside the stability bound (0, {bound:e}]"
        )));
    }
    let n = g0.grid().dim() as f64;
    let mut g = g0.clone();
    let mut t = 0.0;
    let mut rows: Vec<FlowRow> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut streak = 0;
    let status = loop {
        let d = diagnose(&g, warm.as_deref())?;
        let diff = g.tensor().sub(background.tensor());
        let row = FlowRow {
            t,
            lambda: d.lambda,
            ricci_l2: d.ricci_l2,
            gradient_l2f: d.gradient_l2f,
            distance_c0: diff.max_abs(),
            distance_c2: norm(&g, &diff, NormKind::Ck(2), None)?,
            lojasiewicz_ratio: d.lojasiewicz_ratio(),
            transversality_ratio: d.transversality_ratio(),
            dlambda_dt: None,
            twice_gradient_sq: 2.0 * d.gradient_l2f * d.gradient_l2f,
            curvature_sup: d.curvature_sup,
        };
        warm = Some(d.w);
        if row.distance_c2 > config.divergence_radius {
            return Err(LabError::Divergence {
                t,
                distance: row.distance_c2,
            });
        }
        if let (Some(every), Some(dir)) = (config.snapshot_every, snapshots) {
            if every > 0 && rows.len() % every == 0 {
                write_field(&dir.join(format!("g_{:05}.lfld", rows.len())), g.tensor())?;
            }
        }
        let settled =
            row.ricci_l2 < config.ricci_tolerance && row.lambda.abs() < config.lambda_tolerance;
        streak = if settled { streak + 1 } else { 0 };
        rows.push(row);
        if settled && rows.len() == 1 && is_fixed_point(&g, config.gauge) {
            break FlowStatus::Converged { t };
        }
        if streak >= config.sustain {
            break FlowStatus::Converged { t };
        }
        if t >= config.t_max {
            break FlowStatus::TimeLimit { t };
        }
        for _ in 0..config.cadence {
            g = flow_step(&g, dt, config.gauge, t)?;
            t += dt;
        }
    };

    // Five-point time derivative on the equally spaced monitor rows.
    let h = dt * config.cadence as f64;
    for i in 2..rows.len().saturating_sub(2) {
        let l = |j: usize| rows[j].lambda;
        rows[i].dlambda_dt =
            Some((l(i - 2) - 8.0 * l(i - 1) + 8.0 * l(i + 1) - l(i + 2)) / (12.0 * h));
    }
    let mut worst_decrease = f64::NEG_INFINITY;
    let mut monotone = true;
    for w in rows.windows(2) {
        let drop = w[0].lambda - w[1].lambda;
        worst_decrease = worst_decrease.max(drop);
        monotone &= drop <= config.monotone_tolerance * (1.0 + w[0].lambda.abs());
    }
    let identity_error = rows
        .iter()
        .filter(|r| r.lambda.abs() >= LAMBDA_NOISE_FLOOR)
        .filter_map(|r| {
            r.dlambda_dt
                .map(|d| (d - r.twice_gradient_sq).abs() / r.twice_gradient_sq)
        })
        .reduce(f64::max);
    let perelman_margin = rows
        .iter()
        .filter_map(|r| r.dlambda_dt.map(|d| d - 2.0 / n * r.lambda * r.lambda))
        .reduce(f64::min);
    let c0 = rows[0].curvature_sup;
    let cmax = rows.iter().map(|r| r.curvature_sup).fold(0.0, f64::max);
    Ok(FlowRecord {
        dt,
        cadence: config.cadence,
        gauge: config.gauge,
        status,
        worst_decrease: if rows.len() > 1 { worst_decrease } else { 0.0 },
        monotone,
        identity_error,
        perelman_margin,
        curvature_growth: if c0 > 0.0 { cmax / c0 } else { 1.0 },
        rows,
        final_metric: g,
    })
}

/// `true` when the flow's right-hand side vanishes to round-off.
fn is_fixed_point(g: &MetricField, gauge: Gauge) -> bool {
    flow_rhs(g, gauge).max_abs() <= 1e-13 * (1.0 + g.tensor().max_abs())
}
