//! Experiment configuration: one JSON document per run, patched by
//! `--set dot.path=value` overrides and deserialized into the block of the
//! selected command. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use vpclt::criterion::{DecayConfig, DecayProfile, LambdaGrid};
use vpclt::entropy::ProbeConfig;
use vpclt::mc_bands::{BandConfig, BetaLaw, CltConfig};
use vpclt::processes::{CoefficientLaw, ProcessSpec, SequenceMomentsConfig, SpectralDecay};

use crate::CliError;

pub fn load_document(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !doc.is_object() {
        return Err(CliError::Config(format!(
            "{}: top level must be an object",
            path.display()
        )));
    }
    Ok(doc)
}

/// Keys that select an enum variant. Changing one discards the sibling fields
/// of the old variant. `law` is a tag only for the `beta` block; elsewhere it
/// is an ordinary field.
fn tag_keys(parent: &str) -> &'static [&'static str] {
    if parent == "beta" {
        &["kind", "type", "law"]
    } else {
        &["kind", "type"]
    }
}

fn tag_changed(parent: &str, old: &Map<String, Value>, new: &Map<String, Value>) -> bool {
    tag_keys(parent)
        .iter()
        .any(|k| matches!((old.get(*k), new.get(*k)), (Some(a), Some(b)) if a != b))
}

/// Deep merge of `patch` into `base`; objects whose variant tag differs are
/// replaced whole.
pub fn merge(base: &mut Value, patch: Value) {
    merge_under("", base, patch)
}

fn merge_under(parent: &str, base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if !tag_changed(parent, b, &p) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_under(&k, slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses and as a
/// string otherwise; missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!(
            "override key `{key}` has an empty segment"
        )));
    }
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("override `{key}` descends into a non-object"))
        })?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{key}` descends into a non-object")))?;
    let last = parts[parts.len() - 1];
    let parent = if parts.len() > 1 {
        parts[parts.len() - 2]
    } else {
        ""
    };
    if tag_keys(parent).contains(&last) && obj.get(last).is_some_and(|old| *old != value) {
        obj.clear();
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

pub fn resolve<C: DeserializeOwned>(doc: Value) -> Result<C, CliError> {
    serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
}

fn default_process() -> ProcessSpec {
    ProcessSpec::RandomTrig {
        max_degree: 8,
        law: CoefficientLaw::Rademacher,
        decay: SpectralDecay::Power { exponent: 1.0 },
    }
}

/// Test functions for `approx`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `cos(frequency · t)`.
    Cosine { frequency: usize },
    /// `|sin t|^exponent`.
    AbsSin { exponent: f64 },
    /// One column of values on the grid, no header.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    pub seed: u64,
    pub grid_size: usize,
    pub function: FunctionSpec,
    pub n_list: Vec<usize>,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid_size: 1024,
            function: FunctionSpec::AbsSin { exponent: 1.0 },
            n_list: vec![4, 8, 16, 32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub seed: u64,
    pub process: ProcessSpec,
    /// Nodes of the default domain of the process.
    pub grid_size: usize,
    pub replicas: usize,
    /// Values above 1 emit `ζ_n` instead of the base process.
    pub n: usize,
    pub write_covariance: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            process: default_process(),
            grid_size: 128,
            replicas: 1000,
            n: 1,
            write_covariance: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriterionConfig {
    pub seed: u64,
    pub process: ProcessSpec,
    pub grid_size: usize,
    pub replicas: usize,
    /// Degree sequence; `null` selects `2^{k-1}` up to the grid limit.
    pub sequence: Option<Vec<usize>>,
    pub lambda: LambdaGrid,
    pub tail_ratio: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            process: default_process(),
            grid_size: 256,
            replicas: 2000,
            sequence: None,
            lambda: LambdaGrid::default(),
            tail_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquiconvConfig {
    pub seed: u64,
    pub process: ProcessSpec,
    pub grid_size: usize,
    pub replicas: usize,
    pub n_list: Vec<usize>,
    pub sequence: Option<Vec<usize>>,
    pub lambda: LambdaGrid,
    pub tail_ratio: f64,
}

impl Default for EquiconvConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            process: default_process(),
            grid_size: 128,
            replicas: 1000,
            n_list: vec![1, 4, 16, 64],
            sequence: None,
            lambda: LambdaGrid::default(),
            tail_ratio: 0.1,
        }
    }
}

/// Source of the metric sample for `entropy`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSource {
    /// Square distance matrix with a header of point ids.
    Csv { path: PathBuf },
    /// Points of the line with `|x - y|`.
    Line { points: Vec<f64> },
    /// Empirical canonical distance of a simulated process.
    Tau {
        process: ProcessSpec,
        grid_size: usize,
        replicas: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonGrid {
    pub hi: f64,
    pub lo: f64,
    pub points: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self {
            hi: 1.0,
            lo: 1e-3,
            points: 31,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub seed: u64,
    pub metric: MetricSource,
    pub epsilon: EpsilonGrid,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            metric: MetricSource::Tau {
                process: default_process(),
                grid_size: 64,
                replicas: 2000,
            },
            epsilon: EpsilonGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Probe41Config {
    pub seed: u64,
    pub delta: f64,
    pub probe: ProbeConfig,
}

impl Default for Probe41Config {
    fn default() -> Self {
        Self {
            seed: 0,
            delta: 0.1,
            probe: ProbeConfig::default(),
        }
    }
}

/// Integrands for `band`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandModelSpec {
    /// `v(t, x) = cos(t) · x` on a periodic grid.
    CosineBeta {
        nodes: usize,
        #[serde(default)]
        beta: BetaLaw,
    },
    /// `v(t, x) = cos(t)`.
    ParameterFree {
        nodes: usize,
        #[serde(default)]
        beta: BetaLaw,
    },
    Table {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandCommandConfig {
    pub seed: u64,
    pub model: BandModelSpec,
    pub band: BandConfig,
    /// Independent runs for the coverage estimate; 0 skips it.
    pub coverage_runs: usize,
}

impl Default for BandCommandConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: BandModelSpec::CosineBeta {
                nodes: 64,
                beta: BetaLaw::default(),
            },
            band: BandConfig::default(),
            coverage_runs: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltCommandConfig {
    pub seed: u64,
    pub process: ProcessSpec,
    pub grid_size: usize,
    pub n: usize,
    pub replicas: usize,
    pub clt: CltConfig,
}

impl Default for CltCommandConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            process: default_process(),
            grid_size: 64,
            n: 2000,
            replicas: 5000,
            clt: CltConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayCheckConfig {
    pub seed: u64,
    pub delta: DecayProfile,
    pub m: f64,
    pub r_max: u32,
    pub decay: DecayConfig,
}

impl Default for DecayCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            delta: DecayProfile::LogPower { exponent: 0.6 },
            m: 2.0,
            r_max: 10_000,
            decay: DecayConfig::default(),
        }
    }
}

/// `demo example1`: the `eta0` process from sampling to the entropy verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example1Config {
    pub seed: u64,
    pub delta: f64,
    pub sample_nodes: usize,
    pub replicas: usize,
    pub probe: ProbeConfig,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            seed: 0,
            delta: 0.1,
            sample_nodes: 201,
            replicas: 500,
            probe: ProbeConfig::default(),
        }
    }
}

/// `demo example2`: uniform band for `cos(t) · β`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example2Config {
    pub seed: u64,
    pub nodes: usize,
    pub beta: BetaLaw,
    pub band: BandConfig,
    pub coverage_runs: usize,
}

impl Default for Example2Config {
    fn default() -> Self {
        Self {
            seed: 0,
            nodes: 64,
            beta: BetaLaw::default(),
            band: BandConfig::default(),
            coverage_runs: 50,
        }
    }
}

/// `demo example3`: moments of the sequence-space process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example3Config {
    pub seed: u64,
    pub alpha: f64,
    pub p0: f64,
    pub moments: SequenceMomentsConfig,
}

impl Default for Example3Config {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha: 0.5,
            p0: 1.5,
            moments: SequenceMomentsConfig::default(),
        }
    }
}
