//! Run configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mtwv_core::conditions::StructuralCounts;
use mtwv_core::cost::CostParams;
use mtwv_core::lemmas::LemmaCounts;
use mtwv_core::synthetic::ProbeStrategy;
use mtwv_core::DomainSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Structural,
    Loeper,
    Qqconv,
    A3,
    Lemmas,
    All,
}

impl Suite {
    pub const ORDERED: [Suite; 5] = [Suite::Structural, Suite::Loeper, Suite::Qqconv, Suite::A3, Suite::Lemmas];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Structural => "structural",
            Suite::Loeper => "loeper",
            Suite::Qqconv => "qqconv",
            Suite::A3 => "a3",
            Suite::Lemmas => "lemmas",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Result<Suite, ConfigError> {
        Suite::ORDERED
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl CostConfig {
    pub fn params(&self) -> CostParams {
        CostParams { epsilon: self.epsilon }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainsConfig {
    pub x: DomainSpec,
    pub y: DomainSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Counts {
    pub structural: StructuralCounts,
    /// Probes shared by the Loeper and QQconv suites.
    pub n_probes: usize,
    pub probe_strategy: ProbeStrategy,
    /// Pairs per probe for the sublevel midpoint test.
    pub n_sublevel_pairs: usize,
    pub a3_points: usize,
    pub a3_dirs: usize,
    pub lemmas: LemmaCounts,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            structural: StructuralCounts::default(),
            n_probes: 10_000,
            probe_strategy: ProbeStrategy::Uniform,
            n_sublevel_pairs: 4,
            a3_points: 100,
            a3_dirs: 8,
            lemmas: LemmaCounts::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Level-set grid of the first probe's `F`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    /// Boundary samples of `Y*_x` at the center of X.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_points: Option<PathBuf>,
    /// Every MTW evaluation of the A3 scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a3_scan: Option<PathBuf>,
    /// The probe set used by the Loeper and QQconv suites.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<PathBuf>,
}

pub const DEFAULT_GRID_RESOLUTION: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cost: CostConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<DomainsConfig>,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub counts: Counts,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub export: ExportConfig,
    /// Probes read from CSV instead of being generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes_in: Option<PathBuf>,
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::All]
}

fn default_output() -> PathBuf {
    PathBuf::from("report.json")
}

impl RunConfig {
    pub fn new(cost: &str) -> Self {
        RunConfig {
            cost: CostConfig { name: cost.to_string(), epsilon: None },
            domains: None,
            suites: default_suites(),
            seed: 0,
            counts: Counts::default(),
            output: default_output(),
            export: ExportConfig::default(),
            probes_in: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.suites.is_empty() {
            return Err(ConfigError::Invalid("suites must not be empty".into()));
        }
        let c = &self.counts;
        for (name, v) in [
            ("counts.n_probes", c.n_probes),
            ("counts.a3_points", c.a3_points),
            ("counts.a3_dirs", c.a3_dirs),
        ] {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be at least 1")));
            }
        }
        if let Some(r) = self.export.grid_resolution {
            if r < 16 {
                return Err(ConfigError::Invalid(format!("export.grid_resolution = {r} is below 16")));
            }
        }
        Ok(())
    }

    /// Requested suites in execution order, with `all` expanded.
    pub fn resolved_suites(&self) -> BTreeSet<Suite> {
        if self.suites.contains(&Suite::All) {
            Suite::ORDERED.into_iter().collect()
        } else {
            self.suites.iter().copied().collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_a_minimal_file() {
        let cfg = RunConfig::from_toml("[cost]\nname = \"bilinear\"\n").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.suites, vec![Suite::All]);
        assert_eq!(cfg.counts, Counts::default());
        assert_eq!(cfg.resolved_suites().len(), 5);
    }

    #[test]
    fn unknown_suite_is_named() {
        let err = RunConfig::from_toml("suites = [\"nonsense\"]\n[cost]\nname = \"bilinear\"\n").unwrap_err();
        assert!(err.to_string().contains("nonsense"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::new("perturbed-bilinear");
        cfg.cost.epsilon = Some(0.1);
        cfg.suites = vec![Suite::Loeper, Suite::A3];
        cfg.counts.probe_strategy = ProbeStrategy::HalfBall { radius: 0.05 };
        cfg.export.grid = Some("grid.csv".into());
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn misspelled_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 3\n[cost]\nname = \"bilinear\"\n").is_err());
    }
}
