//! Distributed learning orchestration: epsilon-greedy actors with tabu,
//! post-processing workers, the learner loop, and the curriculum evaluator.

mod actor;
mod evaluator;
mod pipeline;
mod postprocess;

pub use actor::{actor_episode, actor_floor, EpsilonSchedule};
pub use evaluator::{evaluate_policy, EvalStats};
pub use pipeline::{train, TrainOutcome, TrainReport};
pub use postprocess::postprocess_episode;

use std::collections::HashSet;

use thiserror::Error;

use crate::config::CurriculumConfig;
use crate::rack::{RackError, RackState, SwapAction};
use crate::search::{SearchError, StateSequence};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Rack(#[from] RackError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    QNet(#[from] crate::net::QNetError),
    #[error(transparent)]
    Replay(#[from] crate::replay::ReplayError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{worker} worker failed: {cause}")]
    Worker { worker: String, cause: String },
    #[error("configuration: {0}")]
    Config(String),
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Goal,
    Deadlock,
    Horizon,
}

/// One collected episode plus the tabu instrumentation needed to audit the
/// exploration contract.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub sequence: StateSequence,
    pub actions: Vec<SwapAction>,
    pub rewards: Vec<f64>,
    pub termination: Termination,
    /// Per step: whether the tabu filter had to be relaxed back to the full
    /// acceptable set.
    pub step_relaxed: Vec<bool>,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// States visited within the current episode; actions leading back into the
/// set are filtered out of the acceptable set.
#[derive(Debug, Default)]
pub struct TabuSet {
    visited: HashSet<RackState>,
}

impl TabuSet {
    /// Fresh set holding only the episode's start state.
    pub fn start(state: &RackState) -> Self {
        let mut visited = HashSet::new();
        visited.insert(state.clone());
        TabuSet { visited }
    }

    pub fn insert(&mut self, state: &RackState) {
        self.visited.insert(state.clone());
    }

    pub fn contains(&self, state: &RackState) -> bool {
        self.visited.contains(state)
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }
}

/// Current difficulty dial, advanced in lexicographic order: displacements
/// first, then the tube count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurriculumState {
    pub sigma_tubes: usize,
    pub sigma_displaced: usize,
}

impl CurriculumState {
    pub fn start() -> Self {
        CurriculumState {
            sigma_tubes: 1,
            sigma_displaced: 1,
        }
    }

    /// Effective horizon: during the regulated early stage a solution must
    /// be as short as the tube count; afterwards the plain horizon applies.
    pub fn h_var(&self, cfg: &CurriculumConfig) -> usize {
        if self.sigma_tubes < cfg.regulation_threshold {
            self.sigma_tubes
        } else {
            cfg.horizon
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurriculumOutcome {
    /// Below the success threshold; difficulty unchanged.
    Unchanged,
    /// Difficulty advanced.
    Advanced,
    /// The tube ceiling was passed; training is complete.
    Done,
}

/// Advance the difficulty after an evaluation round.
pub fn curriculum_step(
    state: &mut CurriculumState,
    cfg: &CurriculumConfig,
    successes: usize,
) -> CurriculumOutcome {
    if successes < cfg.success_threshold {
        return CurriculumOutcome::Unchanged;
    }
    state.sigma_displaced += 1;
    if state.sigma_displaced > state.sigma_tubes {
        state.sigma_tubes += 1;
        state.sigma_displaced = 1;
    }
    if state.sigma_tubes > cfg.sigma_max {
        CurriculumOutcome::Done
    } else {
        CurriculumOutcome::Advanced
    }
}
