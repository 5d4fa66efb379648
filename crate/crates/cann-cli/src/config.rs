//! Run configuration: one TOML file drives every subcommand, and
//! command-line flags override file values. The seed is mandatory so every
//! run is a reproducible experiment record.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use cann::distributions::HeadKind;
use cann::synth::{GeneratorConfig, TelematicsEffect, TrueBeta};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Trad,
    Handcrafted,
    Televector,
    Cann,
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trad" => Ok(Mode::Trad),
            "handcrafted" => Ok(Mode::Handcrafted),
            "televector" => Ok(Mode::Televector),
            "cann" => Ok(Mode::Cann),
            other => bail!("unknown mode '{other}' (expected trad|handcrafted|televector|cann)"),
        }
    }
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Trad => "trad",
            Mode::Handcrafted => "handcrafted",
            Mode::Televector => "televector",
            Mode::Cann => "cann",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub head: Option<String>,
    pub mode: Option<String>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub tune: TuneSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub explain: ExplainSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub contracts: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.6,
            valid: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_vehicles: Option<usize>,
    pub phi_star: Option<f64>,
    pub trips_per_contract: Option<f64>,
    pub commute_missing_rate: Option<f64>,
    pub contract_count_weights: Option<[f64; 7]>,
    pub effect_linear: Option<f64>,
    pub effect_quadratic: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr_start: Option<f64>,
    pub factor: Option<f64>,
    pub dropout_p: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub early_stopping: Option<bool>,
    pub fixed_beta: Option<bool>,
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub lr_start: Vec<f64>,
    pub factor: Vec<f64>,
    pub dropout_p: Vec<f64>,
    pub epochs: usize,
    pub heads: Vec<String>,
}

impl Default for TuneSection {
    fn default() -> Self {
        TuneSection {
            lr_start: vec![1e-5, 1e-4],
            factor: vec![0.3, 0.5],
            dropout_p: vec![0.2, 0.4],
            epochs: 30,
            heads: vec!["poisson".into(), "negbin".into(), "mvnb".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Model artifact file names, relative to the output directory.
    pub models: Option<Vec<String>>,
    pub splits: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    pub model: Option<String>,
    pub split: Option<String>,
    /// Input names, or the single entry "all".
    pub inputs: Option<Vec<String>>,
    pub repetitions: Option<usize>,
    pub pdp_points: Option<usize>,
    pub plots: Option<bool>,
}

/// Flag values that override the file configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub head: Option<String>,
    pub mode: Option<String>,
    pub fixed_beta: bool,
    pub workers: Option<usize>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub head: HeadKind,
    pub mode: Option<Mode>,
    pub workers: usize,
    pub contracts_path: PathBuf,
    pub trips_path: PathBuf,
    pub truth_path: PathBuf,
    pub split: (f64, f64, f64),
    pub synth: GeneratorConfig,
    pub train: TrainSection,
    pub tune: TuneSection,
    pub evaluate: EvaluateSection,
    pub explain: ExplainSection,
    pub fixed_beta: bool,
}

impl RunConfig {
    pub fn resolve(config_path: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
        let file: FileConfig = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("cannot parse config file {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let seed = flags
            .seed
            .or(file.seed)
            .context("a seed is required (set --seed or `seed` in the config file)")?;
        let out = flags
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out"));
        let head: HeadKind = flags
            .head
            .as_deref()
            .or(file.head.as_deref())
            .unwrap_or("poisson")
            .parse()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let mode = flags
            .mode
            .as_deref()
            .or(file.mode.as_deref())
            .map(Mode::from_str)
            .transpose()?;
        let workers = flags.workers.or(file.workers).unwrap_or(1).max(1);

        let contracts_path = file
            .paths
            .contracts
            .unwrap_or_else(|| out.join("contracts.csv"));
        let trips_path = file.paths.trips.unwrap_or_else(|| out.join("trips.csv"));
        let truth_path = file.paths.truth.unwrap_or_else(|| out.join("truth.csv"));

        let split = (file.split.train, file.split.valid, file.split.test);

        let defaults = GeneratorConfig::default();
        let synth = GeneratorConfig {
            n_vehicles: file.synth.n_vehicles.unwrap_or(300),
            phi_star: file.synth.phi_star.unwrap_or(defaults.phi_star),
            trips_per_contract: file
                .synth
                .trips_per_contract
                .unwrap_or(defaults.trips_per_contract),
            commute_missing_rate: file
                .synth
                .commute_missing_rate
                .unwrap_or(defaults.commute_missing_rate),
            contract_count_weights: file
                .synth
                .contract_count_weights
                .unwrap_or(defaults.contract_count_weights),
            telematics_effect: TelematicsEffect {
                linear: file
                    .synth
                    .effect_linear
                    .unwrap_or(defaults.telematics_effect.linear),
                quadratic: file
                    .synth
                    .effect_quadratic
                    .unwrap_or(defaults.telematics_effect.quadratic),
            },
            beta: TrueBeta {
                intercept: file.synth.intercept.unwrap_or(TrueBeta::default().intercept),
                ..TrueBeta::default()
            },
            seed,
        };

        let fixed_beta = flags.fixed_beta || file.train.fixed_beta.unwrap_or(false);
        Ok(RunConfig {
            seed,
            out,
            head,
            mode,
            workers,
            contracts_path,
            trips_path,
            truth_path,
            split,
            synth,
            train: file.train,
            tune: file.tune,
            evaluate: file.evaluate,
            explain: file.explain,
            fixed_beta,
        })
    }

    pub fn train_config(&self, head: HeadKind) -> cann::model::TrainConfig {
        let mut cfg = cann::model::TrainConfig::new(head, self.seed);
        if let Some(v) = self.train.lr_start {
            cfg.lr_start = v;
        }
        if let Some(v) = self.train.factor {
            cfg.factor = v;
        }
        if let Some(v) = self.train.dropout_p {
            cfg.dropout_p = v;
        }
        if let Some(v) = self.train.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.train.max_epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.train.early_stopping {
            cfg.early_stopping = v;
        }
        if let Some(v) = &self.train.hidden {
            cfg.hidden = v.clone();
        }
        cfg.fixed_beta = self.fixed_beta;
        cfg
    }
}
