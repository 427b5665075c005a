use serde::Serialize;

use super::{run_flow, FlowConfig, FlowRecord, Gauge, LAMBDA_NOISE_FLOOR};
use crate::error::{LabError, Result};
use crate::manifold::MetricField;

/// Worst case of the energy–distance inequality
/// `∫_{t₁}^{t₂} ‖Rc‖_{L²} dt ≤ C₁C₂ (|λ(t₁)|^{1/2} − |λ(t₂)|^{1/2})` over all row pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyDistance {
    pub c1c2: f64,
    pub pairs: usize,
    /// `min (right − left)`; nonnegative when the inequality holds everywhere.
    pub worst_margin: f64,
    /// `(t₁, t₂)` of the worst pair.
    pub worst_pair: (f64, f64),
    pub holds: bool,
}

/// Checks the energy–distance inequality with the constant `C₁C₂`. The time
/// integral is the trapezoidal rule over the monitor rows. Only rows with
/// `|λ|` above the noise floor enter: below it `|λ|^{1/2}` is dominated by
/// round-off of order `10⁻⁸`.
pub fn energy_distance_check(record: &FlowRecord, c1c2: f64) -> EnergyDistance {
    let rows: Vec<_> = record
        .rows
        .iter()
        .take_while(|r| r.lambda.abs() >= LAMBDA_NOISE_FLOOR)
        .collect();
    let mut cumulative = vec![0.0; rows.len()];
    for i in 1..rows.len() {
        cumulative[i] = cumulative[i - 1]
            + 0.5 * (rows[i].t - rows[i - 1].t) * (rows[i].ricci_l2 + rows[i - 1].ricci_l2);
    }
    let mut worst = (f64::INFINITY, (0.0, 0.0));
    let mut pairs = 0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let left = cumulative[j] - cumulative[i];
            let right = c1c2 * (rows[i].lambda.abs().sqrt() - rows[j].lambda.abs().sqrt());
            pairs += 1;
            if right - left < worst.0 {
                worst = (right - left, (rows[i].t, rows[j].t));
            }
        }
    }
    if pairs == 0 {
        worst.0 = 0.0;
    }
    EnergyDistance {
        c1c2,
        pairs,
        worst_margin: worst.0,
        worst_pair: worst.1,
        holds: worst.0 >= 0.0,
    }
}

/// Smallest margin of `|λ(t₂)| ≤ e^{−2(t₂−t₁)/C₁²} |λ(t₁)|` over row pairs
/// above the noise floor; `None` without such pairs.
pub fn exponential_decay_check(record: &FlowRecord, c1: f64) -> Option<f64> {
    let rows: Vec<_> = record
        .rows
        .iter()
        .filter(|r| r.lambda.abs() >= LAMBDA_NOISE_FLOOR)
        .collect();
    let mut worst: Option<f64> = None;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let bound = (-2.0 * (rows[j].t - rows[i].t) / (c1 * c1)).exp() * rows[i].lambda.abs();
            // relative to the bound so early and late pairs weigh alike
            let margin = (bound - rows[j].lambda.abs()) / bound;
            worst = Some(worst.map_or(margin, |w: f64| w.min(margin)));
        }
    }
    worst
}

/// Least-squares fit `ln|λ(t)| ≈ a − rate·t` over rows above the noise floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn decay_fit(record: &FlowRecord) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = record
        .rows
        .iter()
        .filter(|r| r.lambda.abs() >= LAMBDA_NOISE_FLOOR)
        .map(|r| (r.t, r.lambda.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let (mt, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sty * sty / (stt * syy)
    };
    Some(DecayFit {
        rate: -slope,
        intercept: my - slope * mt,
        r_squared,
        points: pts.len(),
    })
}

/// λ(t) along DeTurck and plain Ricci flow from the same start.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeSoundness {
    pub t_end: f64,
    pub rows: usize,
    pub max_difference: f64,
}

/// Runs both gauges for `t_end` with identical steps and compares λ row by row.
pub fn gauge_soundness(
    g0: &MetricField,
    background: &MetricField,
    t_end: f64,
    cadence: usize,
) -> Result<GaugeSoundness> {
    let base = FlowConfig {
        t_max: t_end,
        cadence,
        // never stop early: both series must cover the same times
        sustain: usize::MAX,
        dt: Some(0.9 * super::max_time_step(g0)),
        ..FlowConfig::default()
    };
    let deturck = run_flow(
        g0,
        background,
        &FlowConfig {
            gauge: Gauge::DeTurck,
            ..base.clone()
        },
    )?;
    let ricci = run_flow(
        g0,
        background,
        &FlowConfig {
            gauge: Gauge::Ricci,
            ..base
        },
    )?;
    if deturck.rows.len() != ricci.rows.len() {
        return Err(LabError::Precondition(
            "gauge runs produced different row counts".into(),
        ));
    }
    let max_difference = deturck
        .rows
        .iter()
        .zip(&ricci.rows)
        .map(|(a, b)| (a.lambda - b.lambda).abs())
        .fold(0.0, f64::max);
    Ok(GaugeSoundness {
        t_end,
        rows: deturck.rows.len(),
        max_difference,
    })
}
