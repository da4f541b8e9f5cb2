//! TOML configuration. Every key is optional; command-line flags win over
//! the file, and the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use gameeval::agents::{AgentConfig, DEFAULT_N_GAMES};
use gameeval::harness::{DEFAULT_PARALLELISM, DEFAULT_ROLLOUTS};
use gameeval::llm::ProviderConfig;
use gameeval::metrics::{BootstrapConfig, MetricParams, DEFAULT_ACCURACY_THRESHOLD, DEFAULT_BINS, DEFAULT_SPLITS};
use gameeval::solver::{DEFAULT_MCTS_ITERATIONS, DEFAULT_NODE_BUDGET};
use gameeval::{Error, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub solver: SolverSection,
    pub simulate: SimulateSection,
    pub llm: LlmSection,
    pub coder: ProviderConfig,
    pub metrics: MetricsSection,
    /// Whether the file set `llm.provider.temperature`.
    #[serde(skip)]
    pub llm_temperature_set: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub count_per_category: usize,
    pub seed: u64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection { count_per_category: 10, seed: 0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub node_budget: u64,
    pub exact_max_cells: u64,
    pub mcts_iterations: u32,
    pub mcts_fallback: bool,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            node_budget: DEFAULT_NODE_BUDGET,
            exact_max_cells: 25,
            mcts_iterations: DEFAULT_MCTS_ITERATIONS,
            mcts_fallback: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_games: u32,
    pub seed: u64,
    /// Agent parameters shared by both seats; the kinds come from flags.
    pub agent: AgentConfig,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { n_games: DEFAULT_N_GAMES, seed: 0, agent: AgentConfig::default() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub rollouts: u32,
    pub parallelism: usize,
    pub seed: u64,
    pub parse_retries: u32,
    pub provider: ProviderConfig,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            rollouts: DEFAULT_ROLLOUTS,
            parallelism: DEFAULT_PARALLELISM,
            seed: 0,
            parse_retries: 1,
            provider: ProviderConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub n_boot: u32,
    pub level: f64,
    pub seed: u64,
    pub threshold: f64,
    pub bins: usize,
    pub n_splits: u32,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            n_boot: BootstrapConfig::default().n_boot,
            level: BootstrapConfig::default().level,
            seed: 0,
            threshold: DEFAULT_ACCURACY_THRESHOLD,
            bins: DEFAULT_BINS,
            n_splits: DEFAULT_SPLITS,
        }
    }
}

impl MetricsSection {
    pub fn params(&self, range: (f64, f64)) -> MetricParams {
        MetricParams {
            threshold: self.threshold,
            bins: self.bins,
            range,
            n_splits: self.n_splits,
            bootstrap: BootstrapConfig { n_boot: self.n_boot, level: self.level, seed: self.seed },
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Provider temperatures left unset follow the model's default.
    pub fn parse(text: &str) -> Result<Config, String> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut config: Config = raw.clone().try_into().map_err(|e: toml::de::Error| e.to_string())?;
        let has_temperature = |section: Option<&toml::Value>| {
            section.and_then(|s| s.get("temperature")).is_some()
        };
        let llm_provider = raw.get("llm").and_then(|l| l.get("provider"));
        config.llm_temperature_set = has_temperature(llm_provider);
        if !config.llm_temperature_set {
            config.llm.provider.temperature = ProviderConfig::default_temperature(&config.llm.provider.model_name);
        }
        if !has_temperature(raw.get("coder")) {
            config.coder.temperature = ProviderConfig::default_temperature(&config.coder.model_name);
        }
        Ok(config)
    }
}
