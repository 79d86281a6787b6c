//! Experiment configuration: one JSON document, optionally patched with
//! `key.path=value` overrides, validated before anything runs.

use std::path::{Path, PathBuf};

use harmneg_core::lattice::anderson_matrix;
use harmneg_core::{DisorderSpec, EnsembleSpec, LatticeBox, Region, SpringSource, TruncationPolicy};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    BoundsOnly,
    OracleCheck,
    DecayFit,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnBudget {
    /// Report product and h bounds only for realizations above the budget.
    #[default]
    BoundsOnly,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub d: usize,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disorder {
    pub lambda: f64,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub realizations: usize,
    /// Fixed spring constants; replaces sampling when present.
    #[serde(default)]
    pub springs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tail_eps")]
    pub tail_eps: f64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub on_budget: OnBudget,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n_max: default_n_max(), tail_eps: default_tail_eps(), budget: default_budget(), on_budget: OnBudget::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: default_prefix() }
    }
}

/// Sweep axes: box side lengths (with `lo` taken from the geometry) times
/// ensemble sizes. The region spec is re-applied on every box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub sides: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    /// Also attempt exact enumeration where the budget allows.
    #[serde(default)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    #[serde(default = "default_n_cut")]
    pub n_cut: usize,
    #[serde(default = "default_oracle_tol")]
    pub tolerance: f64,
    /// Frozen oracle values; read when present, written otherwise.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { n_cut: default_n_cut(), tolerance: default_oracle_tol(), fixtures: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub disorder: Disorder,
    #[serde(default = "default_region")]
    pub region: String,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub oracle: Oracle,
    /// Wall-clock seconds in the CSV; off by default so output is byte-stable.
    #[serde(default)]
    pub record_timings: bool,
}

fn one() -> usize {
    1
}
fn default_k_max() -> f64 {
    1.0
}
fn default_n_max() -> usize {
    TruncationPolicy::default().n_max
}
fn default_tail_eps() -> f64 {
    TruncationPolicy::default().tail_eps
}
fn default_budget() -> u64 {
    TruncationPolicy::default().budget
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_prefix() -> String {
    "harmneg".into()
}
fn default_n_cut() -> usize {
    30
}
fn default_oracle_tol() -> f64 {
    1e-5
}
fn default_region() -> String {
    "left-half".into()
}
fn default_ensemble() -> Ensemble {
    Ensemble { n: Some(0), weights: None }
}
fn default_mode() -> Mode {
    Mode::Exact
}

/// Sets `a.b.c` in a JSON tree. The value is parsed as JSON when possible
/// and taken as a bare string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{path}` descends into a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{path}` descends into a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_value(mut doc: Value, overrides: &[String]) -> CliResult<Self> {
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> CliResult<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_value(doc, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_str_with(&text, overrides)
    }

    /// Checks every constraint that can fail before work starts.
    pub fn validate(&self) -> CliResult<()> {
        let lattice = self.lattice()?;
        self.region_on(&lattice)?;
        self.springs()?;
        self.ensemble_spec()?;
        self.policy()?;
        if self.disorder.realizations == 0 {
            return Err(CliError::Config("disorder.realizations must be positive".into()));
        }
        if let Some(k) = &self.disorder.springs {
            if k.len() != lattice.len() {
                return Err(CliError::Config(format!(
                    "disorder.springs has {} entries for a box of {} sites",
                    k.len(),
                    lattice.len()
                )));
            }
            if k.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(CliError::Config("disorder.springs must be finite and non-negative".into()));
            }
        }
        if self.mode == Mode::Sweep {
            let sweep = self.sweep.as_ref().ok_or_else(|| CliError::Config("mode sweep needs a sweep section".into()))?;
            if sweep.sides.is_empty() || sweep.n.is_empty() {
                return Err(CliError::Config("sweep axes must be non-empty".into()));
            }
            if sweep.sides.iter().any(|&s| s < 2) {
                return Err(CliError::Config("sweep sides must be at least 2".into()));
            }
            if self.disorder.springs.is_some() {
                return Err(CliError::Config("fixed springs cannot be combined with a size sweep".into()));
            }
        }
        if self.oracle.n_cut < 2 || !(self.oracle.tolerance > 0.0) {
            return Err(CliError::Config("oracle needs n_cut >= 2 and a positive tolerance".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> CliResult<LatticeBox> {
        let g = &self.geometry;
        LatticeBox::new(g.d, g.lo, g.hi).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Box of the given side length starting at the configured `lo`.
    pub fn lattice_with_side(&self, side: usize) -> CliResult<LatticeBox> {
        let g = &self.geometry;
        LatticeBox::new(g.d, g.lo, g.lo + side as i64 - 1).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn region_on(&self, lattice: &LatticeBox) -> CliResult<Region> {
        Region::parse(lattice, &self.region).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn springs(&self) -> CliResult<SpringSource> {
        let d = &self.disorder;
        Ok(match &d.springs {
            Some(k) => SpringSource::Fixed(k.clone()),
            None => SpringSource::Random(
                DisorderSpec::new(d.lambda, d.k_max, d.seed).map_err(|e| CliError::Config(e.to_string()))?,
            ),
        })
    }

    pub fn disorder_spec(&self) -> CliResult<DisorderSpec> {
        let d = &self.disorder;
        DisorderSpec::new(d.lambda, d.k_max, d.seed).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn ensemble_spec(&self) -> CliResult<EnsembleSpec> {
        match (&self.ensemble.n, &self.ensemble.weights) {
            (Some(n), None) => Ok(EnsembleSpec::pure(*n)),
            (None, Some(w)) => EnsembleSpec::weighted(w.clone()).map_err(|e| CliError::Config(e.to_string())),
            _ => Err(CliError::Config("ensemble needs exactly one of N or weights".into())),
        }
    }

    pub fn policy(&self) -> CliResult<TruncationPolicy> {
        let t = &self.truncation;
        Ok(TruncationPolicy::new(t.n_max, t.tail_eps)
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_budget(t.budget))
    }

    /// `h` for one realization on the given box.
    pub fn hamiltonian(&self, lattice: &LatticeBox, realization: u64) -> CliResult<DMatrix<f64>> {
        let k = self.springs()?.springs(lattice, realization);
        Ok(anderson_matrix::<f64>(lattice, self.disorder.lambda, &k)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAND: &str = r#"{
        "geometry": {"d": 1, "lo": 0, "hi": 1},
        "disorder": {"lambda": 1.0, "springs": [1.0, 1.0]},
        "region": "0",
        "ensemble": {"N": 0}
    }"#;

    #[test]
    fn hand_frame_config_parses() {
        let cfg = ExperimentConfig::from_str_with(HAND, &[]).unwrap();
        assert_eq!(cfg.mode, Mode::Exact);
        let lattice = cfg.lattice().unwrap();
        let h = cfg.hamiltonian(&lattice, 0).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        assert_eq!(cfg.region_on(&lattice).unwrap().members(), vec![0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = HAND.replace("\"region\"", "\"regoin\"");
        assert!(matches!(ExperimentConfig::from_str_with(&bad, &[]), Err(CliError::Config(_))));
        let err = ExperimentConfig::from_str_with(HAND, &["disorder.lamda=2".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_patch_nested_values() {
        let cfg = ExperimentConfig::from_str_with(
            HAND,
            &["ensemble.N=2".into(), "mode=bounds-only".into(), "output.prefix=hand".into()],
        )
        .unwrap();
        assert_eq!(cfg.ensemble.n, Some(2));
        assert_eq!(cfg.mode, Mode::BoundsOnly);
        assert_eq!(cfg.output.prefix, "hand");
        assert!(ExperimentConfig::from_str_with(HAND, &["novalue".into()]).is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        for o in ["disorder.springs=[1.0]", "ensemble.weights=[0.5,0.5]", "truncation.tail_eps=0", "region=7"] {
            let err = ExperimentConfig::from_str_with(HAND, &[o.into()]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{o}");
        }
        let no_sweep = ExperimentConfig::from_str_with(HAND, &["mode=sweep".into()]).unwrap_err();
        assert_eq!(no_sweep.exit_code(), 2);
    }
}
