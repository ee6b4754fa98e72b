use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::ModelConfig;
use crate::engine::{KernelKind, RunConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;

/// A complete experiment description, one TOML table per section.
///
/// ```toml
/// [model]
/// name = "hier_gauss"
/// J = 10
///
/// [run]
/// m = 1000
/// k = 50
///
/// [kernel]
/// sweeps = 5
///
/// [experiment]
/// repeats = 5
/// output_dir = "out/hg"
///
/// [sweep]
/// field = "run.k"
/// values = [1, 10, 25, 50]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub experiment: ExperimentSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub repeats: usize,
    pub output_dir: PathBuf,
    /// Draw a fresh synthetic data set for every repeat.
    pub resample_data: bool,
    /// Execute independent runs concurrently. Off by default so wall times
    /// are not distorted by contention.
    pub parallel_runs: bool,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            repeats: 1,
            output_dir: PathBuf::from("out"),
            resample_data: true,
            parallel_runs: false,
        }
    }
}

/// Vary one config field, named by its dotted path (`run.k`,
/// `kernel.sweeps`, `model.J`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub field: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelKind>,
    #[serde(rename = "J")]
    pub n_groups: Vec<usize>,
}

fn default_kernels() -> Vec<KernelKind> {
    vec![KernelKind::Swig, KernelKind::Nss]
}

/// Splits a root seed into independent per-run seeds (SplitMix64 of the
/// root offset by the run counter).
pub fn split_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            run: RunConfig::default(),
            kernel: KernelConfig::default(),
            experiment: ExperimentSettings::default(),
            sweep: None,
            scaling: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The run configuration with the `[kernel]` section attached.
    pub fn run_config(&self) -> RunConfig {
        let mut r = self.run.clone();
        r.kernel_cfg = self.kernel;
        r
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.repeats == 0 {
            return Err(Error::Config("experiment.repeats must be at least 1".into()));
        }
        let model = self.model.build()?;
        self.run_config().validate(model.dims())?;
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::Config("sweep.values is empty".into()));
            }
            for v in &sw.values {
                let c = self.with_override(&sw.field, v.clone())?;
                c.run_config().validate(c.model.build()?.dims())?;
            }
        }
        if let Some(sc) = &self.scaling {
            if sc.n_groups.len() < 3 {
                return Err(Error::Config("scaling.J needs at least 3 values".into()));
            }
            if sc.kernels.is_empty() || sc.n_groups.contains(&0) {
                return Err(Error::Config("scaling needs kernels and positive J values".into()));
            }
        }
        Ok(())
    }

    /// Copy with the dotted `field` set to `value`. Misspelled or mistyped
    /// fields are rejected when the result is parsed back.
    pub fn with_override(&self, field: &str, value: toml::Value) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("sweep field '{field}': {msg}"));
        let mut base = self.clone();
        base.sweep = None;
        base.scaling = None;
        let mut root = toml::Value::try_from(&base).map_err(|e| bad(&e.to_string()))?;
        let mut parts = field.split('.').peekable();
        let mut node = &mut root;
        while let Some(p) = parts.next() {
            let table = node.as_table_mut().ok_or_else(|| bad("path goes through a non-table"))?;
            if parts.peek().is_none() {
                table.insert(p.to_string(), value);
                break;
            }
            node = table.get_mut(p).ok_or_else(|| bad("no such section"))?;
        }
        if field.split('.').count() < 2 {
            return Err(bad("expected section.name"));
        }
        let mut out: Self = root.try_into().map_err(|e: toml::de::Error| bad(e.message()))?;
        out.sweep = self.sweep.clone();
        out.scaling = self.scaling.clone();
        Ok(out)
    }
}

/// Human-readable form of a sweep value for directory names and tables.
pub fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Numeric form of a sweep value, when it has one.
pub fn value_number(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}
