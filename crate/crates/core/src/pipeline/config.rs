use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineOptions;
use crate::dataset::{FilterOptions, ShiftOptions};
use crate::evaluation::{ExperimentOptions, Method};
use crate::forecast::{Cadence, Mode, RuleOptions};
use crate::regret::EstimatorOptions;
use crate::simulator::{MarketConfig, PopulationConfig};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareSection {
    /// Build day/night shift tasks and forecast those instead of the
    /// plain series.
    pub shift: bool,
    /// Raw log to read instead of `<out>/raw_log.csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_log: Option<PathBuf>,
    /// Top-slot sidecar to read instead of `<out>/ground_truth.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub methods: Vec<Method>,
    pub modes: Vec<Mode>,
    pub cadence: Cadence,
    pub skip_diagnostics: bool,
    /// Seed of the baseline models.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            methods: Method::all(),
            modes: Mode::ALL.to_vec(),
            cadence: Cadence::default(),
            skip_diagnostics: false,
            seed: 7,
            jobs: 0,
        }
    }
}

/// Configuration of all commands. Every section is optional in the file;
/// missing keys take their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub population: PopulationConfig,
    pub filter: FilterOptions,
    pub shift: ShiftOptions,
    pub prepare: PrepareSection,
    pub estimator: EstimatorOptions,
    pub rules: RuleOptions,
    pub baselines: BaselineOptions,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Sets the seed of every randomised stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.market.seed = seed;
        self.run.seed = seed;
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            estimator: self.estimator.clone(),
            rules: self.rules.clone(),
            baselines: self.baselines.clone(),
            cadence: self.run.cadence,
            skip_diagnostics: self.run.skip_diagnostics,
            seed: self.run.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if !(self.filter.train_fraction > 0.0 && self.filter.train_fraction < 1.0) {
            return bad("filter.train_fraction must lie in (0, 1)");
        }
        if self.run.methods.is_empty() || self.run.modes.is_empty() {
            return bad("run.methods and run.modes must not be empty");
        }
        if self.estimator.n_candidates < 2 || !(self.estimator.candidate_lo < self.estimator.candidate_hi) {
            return bad("estimator candidate grid is empty");
        }
        if !(0.0..=1.0).contains(&self.rules.beta) {
            return bad("rules.beta must lie in [0, 1]");
        }
        if self.market.day_start > self.market.day_end || self.market.day_end > 23 {
            return bad("market day window must satisfy day_start ≤ day_end ≤ 23");
        }
        if self.shift.day_start > self.shift.day_end || self.shift.day_end > 23 {
            return bad("shift day window must satisfy day_start ≤ day_end ≤ 23");
        }
        if self.population.rules.is_empty() || self.population.rules.iter().any(|(_, w)| !(*w >= 0.0)) {
            return bad("population.rules needs at least one non-negative weight");
        }
        Ok(())
    }
}
