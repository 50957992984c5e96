use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geoproto_core::kproto::SpatialRule;
use geoproto_core::IntervalCenter;
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG_VERSION: u32 = 1;

/// Run config file. Everything is optional; command line flags win over
/// config values, and defaults fill whatever is left. Unknown keys are
/// rejected so typos fail loudly.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Option<u32>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default, rename = "select_k")]
    pub select_k: SelectKSection,
    #[serde(default)]
    pub experience: ExperienceSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub k: Option<usize>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub spatial_rule: Option<SpatialRule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectKSection {
    pub k_max: Option<usize>,
    pub replicates: Option<usize>,
    pub sample_fraction: Option<f64>,
    pub strata: Option<Vec<String>>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub spatial_rule: Option<SpatialRule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperienceSection {
    pub assignments: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub rate_table: Option<PathBuf>,
    pub levels: Option<Vec<f64>>,
    pub center: Option<IntervalCenter>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub spec: Option<PathBuf>,
    pub clusters: Option<usize>,
    pub records: Option<usize>,
}

impl RunConfig {
    /// Loads and validates a run config, or returns an empty one when no
    /// path was given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading run config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing run config {}", path.display()))?;
        match cfg.schema_version {
            Some(RUN_CONFIG_VERSION) => Ok(cfg),
            Some(found) => bail!(
                "run config {} has schema_version {found}, this build expects {RUN_CONFIG_VERSION}",
                path.display()
            ),
            None => bail!(
                "run config {} is missing the required schema_version key",
                path.display()
            ),
        }
    }
}

/// Flag beats config beats default.
pub fn resolve<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Flag beats config; absence of both is a validation error naming the key
/// in both spellings.
pub fn require<T>(flag: Option<T>, config: Option<T>, flag_name: &str, key: &str) -> Result<T> {
    flag.or(config).with_context(|| {
        format!("missing required value: pass --{flag_name} or set {key} in the run config")
    })
}

/// Fully resolved parameters for one run. Serialized canonically, hashed
/// into every output, and echoed in the manifest.
#[derive(Debug, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Effective {
    Cluster {
        data: String,
        schema: String,
        k: usize,
        restarts: usize,
        max_iterations: usize,
        lambda1: Option<f64>,
        lambda2: Option<f64>,
        spatial_rule: SpatialRule,
        seed: u64,
    },
    SelectK {
        data: String,
        schema: String,
        k_max: usize,
        replicates: usize,
        sample_fraction: f64,
        strata: Vec<String>,
        restarts: usize,
        max_iterations: usize,
        lambda1: Option<f64>,
        lambda2: Option<f64>,
        spatial_rule: SpatialRule,
        seed: u64,
    },
    Experience {
        assignments: String,
        portfolio: String,
        rate_table: Option<String>,
        levels: Vec<f64>,
        center: IntervalCenter,
    },
    Synth {
        spec: SynthSource,
        seed: u64,
    },
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthSource {
    File { path: String },
    WellSeparated { clusters: usize, records: usize },
}
