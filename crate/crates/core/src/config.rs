//! Run configuration: one structured text file carries every hyperparameter,
//! and all randomness flows from one master seed through named sub-streams.

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::net::NetConfig;
use crate::rack::RewardTable;
use crate::replay::ReplayConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io ({path}): {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse: {0}")]
    Parse(String),
    #[error("config invalid: {0}")]
    Invalid(String),
}

/// Deterministic per-purpose rng: the master seed and the stream name are
/// hashed into the generator key, so every worker gets an independent,
/// reproducible stream.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    use rand::SeedableRng;
    ChaCha12Rng::from_seed(key)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub goal: Option<PathBuf>,
    pub state: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Network sizes; rack dimensions come from the goal pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSection {
    pub stem_channels: usize,
    pub residual_blocks: usize,
    pub advantage_channels: usize,
    pub value_channels: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection {
            stem_channels: 48,
            residual_blocks: 6,
            advantage_channels: 30,
            value_channels: 10,
        }
    }
}

impl NetSection {
    pub fn net_config(&self, tube_types: usize, rows: usize, cols: usize) -> NetConfig {
        NetConfig {
            tube_types,
            rows,
            cols,
            stem_channels: self.stem_channels,
            residual_blocks: self.residual_blocks,
            advantage_channels: self.advantage_channels,
            value_channels: self.value_channels,
        }
    }
}

/// Difficulty schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    /// Ceiling for the tube count; the curriculum is done once it is passed.
    pub sigma_max: usize,
    /// Evaluation trials per round.
    pub trials: usize,
    /// Trials that must succeed before the difficulty advances.
    pub success_threshold: usize,
    /// Seconds between evaluations (threaded mode).
    pub eval_interval_secs: f64,
    /// Minimum learner steps between evaluations; the only cadence in
    /// deterministic mode.
    pub eval_min_step_delta: u64,
    /// Below this tube count the solution length is gated to the tube count.
    pub regulation_threshold: usize,
    /// Episode horizon once past the regulated stage.
    pub horizon: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            sigma_max: 6,
            trials: 100,
            success_threshold: 90,
            eval_interval_secs: 60.0,
            eval_min_step_delta: 1000,
            regulation_threshold: 8,
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub n_actors: usize,
    pub n_post: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Learner steps between parameter snapshots sent to actors.
    pub sync_period: u64,
    /// Buffer size before learning starts.
    pub min_buffer: usize,
    pub max_learner_steps: u64,
    /// Wall-clock budget in seconds; 0 disables. Ignored in deterministic
    /// mode, where only the step budget applies.
    pub max_wall_secs: u64,
    /// Checkpoint every K learner steps; 0 = only at the end.
    pub checkpoint_every: u64,
    pub eps_start: f64,
    pub eps_floor_min: f64,
    pub eps_floor_max: f64,
    pub eps_anneal_episodes: u64,
    /// Gradient steps per collected episode in deterministic mode.
    pub learner_steps_per_episode: usize,
    /// A* budget for the rescuer and trimmer.
    pub search_iteration_limit: usize,
    pub trim_horizon: usize,
    pub curriculum: CurriculumConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            n_actors: 6,
            n_post: 6,
            gamma: 0.98,
            learning_rate: 1e-4,
            tau: 5e-3,
            batch_size: 32,
            sync_period: 100,
            min_buffer: 1000,
            max_learner_steps: 200_000,
            max_wall_secs: 7200,
            checkpoint_every: 25_000,
            eps_start: 1.0,
            eps_floor_min: 0.05,
            eps_floor_max: 0.4,
            eps_anneal_episodes: 300,
            learner_steps_per_episode: 4,
            search_iteration_limit: 500,
            trim_horizon: 8,
            curriculum: CurriculumConfig::default(),
        }
    }
}

/// Static and stochastic failure model for the simulated motion oracle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSection {
    /// Slots whose listed conditions are statically unreachable:
    /// `[[row, col, [conditions...]], ...]`.
    pub infeasible: Vec<(usize, usize, Vec<u8>)>,
    pub lift_obstruction_rate: f64,
    pub insert_obstruction_rate: f64,
    pub grasp_slip_rate: f64,
    pub restricted_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSection {
    /// Greedy rollout cap per inference.
    pub max_iterations: usize,
    pub replan_budget: usize,
    /// Pass inferred sequences through the trimmer.
    pub trim: bool,
    pub search_iteration_limit: usize,
    pub trim_horizon: usize,
    pub oracle: OracleSection,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            max_iterations: 300,
            replan_budget: 20,
            trim: true,
            search_iteration_limit: 500,
            trim_horizon: 8,
            oracle: OracleSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSection {
    /// Trials per tube count.
    pub trials_per_count: usize,
    /// Highest tube count; 0 means the goal capacity.
    pub max_tubes: usize,
    pub rl_iteration_cap: usize,
    pub astar_iteration_cap: usize,
    /// Run the trimmer on RL solutions.
    pub trim: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            trials_per_count: 100,
            max_tubes: 0,
            rl_iteration_cap: 300,
            astar_iteration_cap: 1500,
            trim: false,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Single-worker reproducible pipeline; also settable by CLI flag.
    pub deterministic: bool,
    pub paths: PathsSection,
    pub net: NetSection,
    pub reward: RewardTable,
    pub replay: ReplayConfig,
    pub training: TrainingSection,
    pub planner: PlannerSection,
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.training;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(ConfigError::Invalid(format!(
                "gamma must lie in [0,1), got {}",
                t.gamma
            )));
        }
        if t.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be positive".into()));
        }
        if t.curriculum.sigma_max == 0 {
            return Err(ConfigError::Invalid("sigma_max must be positive".into()));
        }
        if t.curriculum.success_threshold > t.curriculum.trials {
            return Err(ConfigError::Invalid(
                "success_threshold cannot exceed trials".into(),
            ));
        }
        if t.trim_horizon < 2 {
            return Err(ConfigError::Invalid("trim_horizon must be >= 2".into()));
        }
        for rate in [
            self.planner.oracle.lift_obstruction_rate,
            self.planner.oracle.insert_obstruction_rate,
            self.planner.oracle.grasp_slip_rate,
            self.planner.oracle.restricted_rate,
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ConfigError::Invalid(format!(
                    "oracle rates must lie in [0,1], got {rate}"
                )));
            }
        }
        Ok(())
    }
}
