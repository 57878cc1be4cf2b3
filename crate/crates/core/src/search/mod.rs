//! A* search over rack states, the rescuer that completes truncated
//! episodes, and the trimmer that removes redundant sub-sequences before the
//! data reaches the replay buffer.

pub(crate) mod astar;
mod relabel;
pub(crate) mod trim;

pub use astar::{astar_search, exist_action, rescue, SearchGoal, SearchLimits, StateSequence};
pub use relabel::relabel;
pub use trim::trim;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("states {0} and {1} are not connected by one acceptable swap")]
    Disconnected(usize, usize),
    #[error("limits invalid: {0}")]
    BadLimits(String),
    #[error(transparent)]
    Rack(#[from] crate::rack::RackError),
}
