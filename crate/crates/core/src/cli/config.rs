//! The single-document experiment configuration and its `--set` overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::flow::FlowConfig;
use crate::manifold::{MetricField, PeriodicGrid, Scheme};
use crate::sample::{Family, MetricSpec, Perturbation};
use crate::spectral::EigenMethod;

/// Discretization of the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dim: usize,
    pub res: usize,
    /// Side lengths; `2π` on every axis when absent.
    pub periods: Option<Vec<f64>>,
    pub scheme: Scheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            res: 32,
            periods: None,
            scheme: Scheme::Spectral,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<PeriodicGrid>> {
        let res = vec![self.res; self.dim];
        let grid = match &self.periods {
            Some(p) => PeriodicGrid::new(&res, p, self.scheme)?,
            None => PeriodicGrid::cube(self.dim, self.res, self.scheme)?,
        };
        Ok(Arc::new(grid))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSection {
    /// Number of low eigenvalues reported.
    pub eigenvalues: usize,
    pub method: EigenMethod,
    /// Also write `w.lfld` and `f.lfld`.
    pub export_fields: bool,
}

impl Default for LambdaSection {
    fn default() -> Self {
        Self {
            eigenvalues: 8,
            method: EigenMethod::Auto,
            export_fields: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationsSection {
    /// Explicit direction `h`.
    pub direction: Option<Perturbation>,
    /// Additional seeded random directions.
    pub samples: usize,
    pub family: Family,
    /// `C²` norm of each random direction.
    pub radius: f64,
    pub orders: Vec<u8>,
    /// Add the Richardson finite-difference oracle.
    pub finite_difference: bool,
    /// Add the contour-quadrature values for order 3.
    pub contour: bool,
}

impl Default for VariationsSection {
    fn default() -> Self {
        Self {
            direction: None,
            samples: 0,
            family: Family::Mixed,
            radius: 0.05,
            orders: vec![1, 2, 3],
            finite_difference: true,
            contour: true,
        }
    }
}

/// Runs the flow from `background + a·mode` for every amplitude and mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub amplitudes: Vec<f64>,
    pub modes: Vec<Perturbation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    /// Constant DeTurck background; defaults to the metric's background.
    pub background: Option<Vec<Vec<f64>>>,
    pub run: FlowConfig,
    /// Constant `C₁C₂` for the energy–distance check.
    pub c1c2: Option<f64>,
    pub stability: Option<StabilitySection>,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            background: None,
            run: FlowConfig::default(),
            c1c2: None,
            stability: None,
        }
    }
}

/// Which sampled scan to run. Resolution, dimension and seed come from the
/// top-level `grid` and `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanSection {
    Lojasiewicz {
        #[serde(default = "default_scan_samples")]
        samples: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    TheoremA {
        #[serde(default = "default_theorem_a_samples")]
        samples: usize,
        #[serde(default = "default_flat_samples")]
        flat_samples: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Bound {
        #[serde(default = "default_bound_samples")]
        samples: usize,
        #[serde(default = "default_metric_radius")]
        metric_radius: f64,
        #[serde(default = "default_ladder")]
        ladder: Vec<f64>,
    },
}

fn default_scan_samples() -> usize {
    500
}
fn default_theorem_a_samples() -> usize {
    200
}
fn default_flat_samples() -> usize {
    20
}
fn default_bound_samples() -> usize {
    100
}
fn default_radius() -> f64 {
    0.05
}
fn default_metric_radius() -> f64 {
    0.02
}
fn default_ladder() -> Vec<f64> {
    vec![0.02, 0.01, 0.005]
}

impl Default for ScanSection {
    fn default() -> Self {
        Self::Lojasiewicz {
            samples: default_scan_samples(),
            radius: default_radius(),
        }
    }
}

/// One experiment. Every field has a default, so `{}` is a valid config
/// (flat 32×32 torus, outputs in `lambda-lab-out`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub metric: MetricSpec,
    pub seed: u64,
    pub output: PathBuf,
    /// Run batches on the thread pool (`false` forces sequential execution).
    pub parallel: bool,
    pub lambda: LambdaSection,
    pub variations: VariationsSection,
    pub flow: FlowSection,
    pub scan: ScanSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            metric: MetricSpec::default(),
            seed: 42,
            output: PathBuf::from("lambda-lab-out"),
            parallel: true,
            lambda: LambdaSection::default(),
            variations: VariationsSection::default(),
            flow: FlowSection::default(),
            scan: ScanSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document and applies `key=value` overrides. Values
    /// are read as JSON, falling back to a plain string.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| LabError::Config(format!("config: {e}")))?;
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        serde_json::from_value(doc).map_err(|e| LabError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn build_metric(&self, grid: &Arc<PeriodicGrid>) -> Result<MetricField> {
        self.metric.build(grid)
    }

    /// Constant background of the flow.
    pub fn build_background(&self, grid: &Arc<PeriodicGrid>) -> Result<MetricField> {
        let background = self
            .flow
            .background
            .clone()
            .or_else(|| self.metric.background.clone());
        MetricSpec {
            background,
            ..MetricSpec::default()
        }
        .build(grid)
    }
}

/// Sets `a.b.c = value` in `doc`, creating intermediate objects.
fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| LabError::Config(format!("--set expects key=value, got `{item}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(LabError::Config(format!("--set: malformed key `{key}`")));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| LabError::Config(format!("--set: `{key}` crosses a non-object")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| LabError::Config(format!("--set: `{key}` crosses a non-object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(
            ExperimentConfig::parse("{}", &[]).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = ExperimentConfig::parse(
            r#"{"grid": {"res": 16}}"#,
            &[
                "grid.dim=3".into(),
                "output=runs/a".into(),
                "scan.kind=bound".into(),
                "flow.run.t_max=2.5".into(),
            ],
        )
        .unwrap();
        assert_eq!((cfg.grid.dim, cfg.grid.res), (3, 16));
        assert_eq!(cfg.output, PathBuf::from("runs/a"));
        assert_eq!(cfg.flow.run.t_max, 2.5);
        assert!(matches!(cfg.scan, ScanSection::Bound { samples: 100, .. }));
    }

    #[test]
    fn unknown_keys_and_bad_overrides_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"grid": {"resolution": 16}}"#, &[]).is_err());
        assert!(
            ExperimentConfig::parse(r#"{"scan": {"kind": "lojasiewicz", "sample": 3}}"#, &[])
                .is_err()
        );
        assert!(ExperimentConfig::parse("{}", &["grid.res".into()]).is_err());
        assert!(ExperimentConfig::parse("{}", &["seed.x=1".into()]).is_err());
        assert!(ExperimentConfig::parse("{not json", &[]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::parse(r#"{"scan": {"kind": "theorem_a"}}"#, &[]).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&text, &[]).unwrap(), cfg);
    }
}
