use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softrank::experiment::{BenchConfig, SaturationConfig, Statistic};
use softrank::generator::TrainingConfig;
use softrank::ot::SinkhornConfig;
use softrank::stats::KernelSpec;
use softrank::synth::Setting;

use crate::error::CliError;

/// Parameter document passed with `--config`: global keys plus one optional
/// section per subcommand.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub stat: StatSection,
    #[serde(default)]
    pub saturate: SaturationConfig,
    #[serde(default)]
    pub train: TrainingConfig,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatSection {
    pub statistic: Statistic,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub sinkhorn: SinkhornConfig,
}

impl Default for StatSection {
    fn default() -> Self {
        Self {
            statistic: Statistic::Srmmd,
            epsilon: 10.0,
            kernel: KernelSpec::default(),
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

/// Synthetic feature export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub setting: Setting,
    pub n: usize,
    pub d: usize,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            setting: Setting::GaussianAr1 { rho: 0.5 },
            n: 1000,
            d: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub fdr_level: f64,
    pub lasso_alpha: f64,
    pub lasso_tolerance: f64,
    pub lasso_max_iters: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        Self {
            fdr_level: b.fdr_level,
            lasso_alpha: b.lasso_alpha,
            lasso_tolerance: b.lasso_tolerance,
            lasso_max_iters: b.lasso_max_iters,
        }
    }
}
