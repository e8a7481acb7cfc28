//! Experiment configuration.
//!
//! Configs are TOML files with an `[experiment]` table, an `[env]` table and
//! one `[[algorithm]]` table per algorithm:
//!
//! ```toml
//! [experiment]
//! name = "chain"
//! seeds = 4            # seeds 0..4, or an explicit list [3, 7, 11]
//! budget = 100000      # environment steps per replicate
//! output = "results/chain"
//!
//! [env]
//! name = "double-chain"
//! length = 31
//!
//! [[algorithm]]
//! name = "entgame"
//! aggregation = "stage-homogeneous"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use maxent_core::entgame::Aggregation;
use maxent_core::{envs, TabularMdp};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    #[default]
    PerStep,
    StageHomogeneous,
}

impl AggregationMode {
    pub fn core(self) -> Aggregation {
        match self {
            AggregationMode::PerStep => Aggregation::PerStep,
            AggregationMode::StageHomogeneous => Aggregation::StageHomogeneous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    DoubleChain {
        #[serde(default = "defaults::chain_length")]
        length: usize,
        #[serde(default = "defaults::chain_slip")]
        slip: f64,
        #[serde(default = "defaults::chain_horizon")]
        horizon: usize,
        /// Uniform restart from the left end.
        #[serde(default)]
        resampling: bool,
    },
    GridWorld {
        #[serde(default = "defaults::grid_side")]
        width: usize,
        #[serde(default = "defaults::grid_side")]
        height: usize,
        #[serde(default = "defaults::grid_slip")]
        slip: f64,
        horizon: usize,
    },
    RandomMdp {
        states: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
        #[serde(default = "defaults::one")]
        alpha: f64,
    },
}

impl EnvConfig {
    pub fn build(&self) -> Result<TabularMdp> {
        let env = match *self {
            EnvConfig::DoubleChain { length, slip, horizon, resampling: false } => {
                envs::double_chain(length, slip, horizon)
            }
            EnvConfig::DoubleChain { length, slip, horizon, resampling: true } => {
                envs::double_chain_resampling(length, slip, horizon)
            }
            EnvConfig::GridWorld { width, height, slip, horizon } => envs::grid_world(width, height, slip, horizon),
            EnvConfig::RandomMdp { states, actions, horizon, seed, alpha } => {
                if !(alpha > 0.0) {
                    return Err(HarnessError::Config(format!("env: alpha = {alpha} must be positive")));
                }
                envs::random_mdp(states, actions, horizon, seed, alpha)
            }
        };
        env.map_err(|e| HarnessError::Config(format!("env: {e}")))
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnvConfig::DoubleChain { resampling: false, .. } => "double-chain",
            EnvConfig::DoubleChain { resampling: true, .. } => "double-chain-resampling",
            EnvConfig::GridWorld { .. } => "grid-world",
            EnvConfig::RandomMdp { .. } => "random-mdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmKind {
    /// Uniform policy.
    Random {},
    Entgame {
        #[serde(default = "defaults::prior")]
        prior: u64,
        #[serde(default = "defaults::delta")]
        delta: f64,
        #[serde(default = "defaults::one")]
        bonus_scale: f64,
        aggregation: Option<AggregationMode>,
    },
    RegEntgame {
        #[serde(default = "defaults::prior")]
        prior: u64,
        #[serde(default = "defaults::delta")]
        delta: f64,
        #[serde(default = "defaults::episodes_per_goal")]
        episodes_per_goal: usize,
        #[serde(default = "defaults::model_episodes")]
        model_episodes: usize,
        aggregation: Option<AggregationMode>,
    },
    UcbviEnt {
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
        #[serde(default = "defaults::delta")]
        delta: f64,
        #[serde(default = "defaults::one")]
        bonus_scale: f64,
        /// Learning episodes; the budget when absent.
        max_episodes: Option<u64>,
        #[serde(default)]
        track_true_gap: bool,
    },
    RfExploreEnt {
        #[serde(default = "defaults::episodes_per_goal")]
        episodes_per_goal: usize,
        /// Model-fitting episodes; whatever the budget leaves after the goal
        /// phase when absent.
        model_episodes: Option<usize>,
        #[serde(default = "defaults::delta")]
        delta: f64,
        #[serde(default = "defaults::one")]
        bonus_scale: f64,
    },
    OptimalMvee {
        #[serde(default = "defaults::iterations")]
        iterations: usize,
        #[serde(default = "defaults::gap_tolerance")]
        gap_tolerance: f64,
        aggregation: Option<AggregationMode>,
    },
    OptimalMtee {},
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Random {} => "random",
            AlgorithmKind::Entgame { .. } => "entgame",
            AlgorithmKind::RegEntgame { .. } => "reg-entgame",
            AlgorithmKind::UcbviEnt { .. } => "ucbvi-ent",
            AlgorithmKind::RfExploreEnt { .. } => "rf-explore-ent",
            AlgorithmKind::OptimalMvee { .. } => "optimal-mvee",
            AlgorithmKind::OptimalMtee {} => "optimal-mtee",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmConfig {
    /// Name used in output files; defaults to the algorithm name.
    pub label: String,
    pub kind: AlgorithmKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Environment steps per replicate.
    pub budget: u64,
    pub output: PathBuf,
    pub workers: usize,
    pub aggregation: AggregationMode,
    /// Diagnostics cadence in episodes, 0 for none.
    pub log_every: u64,
    pub save_policies: bool,
    pub env: EnvConfig,
    pub algorithms: Vec<AlgorithmConfig>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    seeds: Seeds,
    budget: u64,
    output: PathBuf,
    workers: Option<usize>,
    #[serde(default)]
    aggregation: AggregationMode,
    #[serde(default = "defaults::log_every")]
    log_every: u64,
    #[serde(default)]
    save_policies: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    env: EnvConfig,
    #[serde(default)]
    algorithm: Vec<toml::Table>,
}

mod defaults {
    pub fn chain_length() -> usize {
        31
    }
    pub fn chain_slip() -> f64 {
        0.1
    }
    pub fn chain_horizon() -> usize {
        20
    }
    pub fn grid_side() -> usize {
        21
    }
    pub fn grid_slip() -> f64 {
        0.05
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn prior() -> u64 {
        1
    }
    pub fn delta() -> f64 {
        0.1
    }
    pub fn epsilon() -> f64 {
        0.5
    }
    pub fn episodes_per_goal() -> usize {
        100
    }
    pub fn model_episodes() -> usize {
        1000
    }
    pub fn iterations() -> usize {
        2000
    }
    pub fn gap_tolerance() -> f64 {
        1e-6
    }
    pub fn log_every() -> u64 {
        100
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates a config file. A relative `output` is resolved
    /// against the directory of the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let seeds = match raw.experiment.seeds {
            Seeds::Count(n) => (0..n).collect(),
            Seeds::List(v) => v,
        };
        let mut algorithms = Vec::with_capacity(raw.algorithm.len());
        for (i, mut table) in raw.algorithm.into_iter().enumerate() {
            let label = match table.remove("label") {
                None => None,
                Some(toml::Value::String(s)) => Some(s),
                Some(_) => return Err(config_err(format!("algorithm #{}: label must be a string", i + 1))),
            };
            let kind: AlgorithmKind = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| config_err(format!("algorithm #{}: {}", i + 1, e.message())))?;
            let label = label.unwrap_or_else(|| kind.name().to_string());
            algorithms.push(AlgorithmConfig { label, kind });
        }
        let output = if raw.experiment.output.is_absolute() {
            raw.experiment.output
        } else {
            base.join(raw.experiment.output)
        };
        let config = ExperimentConfig {
            name: raw.experiment.name,
            seeds,
            budget: raw.experiment.budget,
            output,
            workers: raw.experiment.workers.unwrap_or_else(default_workers),
            aggregation: raw.experiment.aggregation,
            log_every: raw.experiment.log_every,
            save_policies: raw.experiment.save_policies,
            env: raw.env,
            algorithms,
        };
        config.validate()?;
        Ok(config)
    }

    /// Episodes per replicate, `budget / H` rounded down.
    pub fn episodes(&self, horizon: usize) -> u64 {
        self.budget / horizon as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("experiment: at least one seed is required"));
        }
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(config_err(format!("experiment: seed {s} listed twice")));
        }
        if self.budget == 0 {
            return Err(config_err("experiment: budget must be positive"));
        }
        if self.workers == 0 {
            return Err(config_err("experiment: workers must be positive"));
        }
        if !safe_label(&self.name) {
            return Err(config_err(format!("experiment: name {:?} must be nonempty without separators", self.name)));
        }
        if self.algorithms.is_empty() {
            return Err(config_err("at least one [[algorithm]] table is required"));
        }
        let env = self.env.build()?;
        let d = env.dims();
        let episodes = self.episodes(d.horizon);
        if episodes == 0 {
            return Err(config_err(format!("experiment: budget {} is below the horizon {}", self.budget, d.horizon)));
        }
        let mut labels = HashSet::new();
        for algo in &self.algorithms {
            let l = &algo.label;
            if !safe_label(l) {
                return Err(config_err(format!("algorithm label {l:?} must be nonempty without separators")));
            }
            if !labels.insert(l.as_str()) {
                return Err(config_err(format!("algorithm label {l:?} used twice")));
            }
            check_algorithm(l, &algo.kind, d.states * d.horizon, episodes)?;
        }
        Ok(())
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn safe_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && s != "." && s != ".."
}

fn check_delta(label: &str, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(config_err(format!("{label}: delta = {delta} outside (0, 1)")));
    }
    Ok(())
}

fn check_scale(label: &str, scale: f64) -> Result<()> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(config_err(format!("{label}: bonus_scale = {scale} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_algorithm(label: &str, kind: &AlgorithmKind, goals: usize, episodes: u64) -> Result<()> {
    match *kind {
        AlgorithmKind::Random {} | AlgorithmKind::OptimalMtee {} => {}
        AlgorithmKind::Entgame { prior, delta, bonus_scale, .. } => {
            if prior == 0 {
                return Err(config_err(format!("{label}: prior must be positive")));
            }
            check_delta(label, delta)?;
            check_scale(label, bonus_scale)?;
        }
        AlgorithmKind::RegEntgame { prior, delta, episodes_per_goal, model_episodes, .. } => {
            if prior == 0 || episodes_per_goal == 0 || model_episodes == 0 {
                return Err(config_err(format!(
                    "{label}: prior, episodes_per_goal and model_episodes must be positive"
                )));
            }
            check_delta(label, delta)?;
            let exploration = (goals * episodes_per_goal + model_episodes) as u64;
            if exploration >= episodes {
                return Err(config_err(format!(
                    "{label}: exploration takes {exploration} of the {episodes} budgeted episodes"
                )));
            }
        }
        AlgorithmKind::UcbviEnt { epsilon, delta, bonus_scale, max_episodes, .. } => {
            if !(epsilon > 0.0) {
                return Err(config_err(format!("{label}: epsilon must be positive")));
            }
            if max_episodes == Some(0) {
                return Err(config_err(format!("{label}: max_episodes must be positive")));
            }
            check_delta(label, delta)?;
            check_scale(label, bonus_scale)?;
        }
        AlgorithmKind::RfExploreEnt { episodes_per_goal, model_episodes, delta, bonus_scale } => {
            if episodes_per_goal == 0 || model_episodes == Some(0) {
                return Err(config_err(format!("{label}: episode counts must be positive")));
            }
            check_delta(label, delta)?;
            check_scale(label, bonus_scale)?;
            let goal_phase = (goals * episodes_per_goal) as u64;
            if model_episodes.is_none() && goal_phase >= episodes {
                return Err(config_err(format!(
                    "{label}: the goal phase takes {goal_phase} of the {episodes} budgeted episodes"
                )));
            }
        }
        AlgorithmKind::OptimalMvee { iterations, gap_tolerance, .. } => {
            if iterations == 0 || !(gap_tolerance >= 0.0) {
                return Err(config_err(format!("{label}: iterations must be positive and gap_tolerance nonnegative")));
            }
        }
    }
    Ok(())
}
