use super::HarnessError;
use crate::memhier::HierarchyConfig;
use crate::tensorc::SUITE_NAMES;
use crate::uarch::{MinorConfig, O3Config};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable that overrides [`RunConfig::seed`].
pub const SEED_ENV: &str = "RVMB_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Atomic,
    Minor,
    O3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Atomic, ModelKind::Minor, ModelKind::O3];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Atomic => "atomic",
            ModelKind::Minor => "minor",
            ModelKind::O3 => "o3",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "atomic" => Ok(ModelKind::Atomic),
            "minor" => Ok(ModelKind::Minor),
            "o3" => Ok(ModelKind::O3),
            other => Err(format!("unknown model `{other}` (expected atomic, minor or o3)")),
        }
    }
}

/// Parses a comma-separated model list such as `atomic,minor,o3`.
pub fn parse_models(s: &str) -> Result<Vec<ModelKind>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// A benchmark × model run matrix. Every key is optional in the JSON form;
/// missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Suite names or paths to `.elf`, `.s` or `.tg` (graph text) files.
    pub benchmarks: Vec<String>,
    pub models: Vec<ModelKind>,
    pub cache: HierarchyConfig,
    pub minor: MinorConfig,
    pub o3: O3Config,
    /// Per-cell retired-instruction limit.
    pub limit: u64,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmarks: SUITE_NAMES.iter().map(|s| s.to_string()).collect(),
            models: ModelKind::ALL.to_vec(),
            cache: HierarchyConfig::default(),
            minor: MinorConfig::default(),
            o3: O3Config::default(),
            limit: 2_000_000_000,
            output_dir: None,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    /// Reads, applies the environment override and validates.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<(), HarnessError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| HarnessError::InvalidConfig(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.benchmarks.is_empty() {
            return bad("at least one benchmark is required".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.limit == 0 {
            return bad("limit must be positive".into());
        }
        self.cache.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.minor.validate().map_err(HarnessError::InvalidConfig)?;
        self.o3.validate().map_err(HarnessError::InvalidConfig)?;
        Ok(())
    }
}
