//! Deterministic rack environment: states, actions, clearance conditions,
//! rewards, termination, instance generation, and tensor encoding.
//!
//! Everything here is an immutable value with pure operations over it, so the
//! types can be shared freely between worker threads.

mod action;
mod conditions;
mod generate;
mod reward;
pub mod text;
mod types;

pub use action::{ActionMask, SwapAction};
pub use conditions::{
    acceptable_actions, acceptable_actions_constrained, apply_action, is_acceptable,
    is_acceptable_constrained, is_deadlock, slot_conditions, swap_roles, visit_acceptable,
    ConditionSet, ConditionSetMap,
};
pub use generate::generate_instance;
pub use reward::{
    disorder, is_goal, mismatch_h, reward, GoalRole, RewardCase, RewardOutcome, RewardTable,
    TerminalKind,
};
pub use types::{Dims, GoalPattern, RackState, Slot};

use thiserror::Error;

/// Errors raised by the rack environment.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RackError {
    #[error("slot ({row}, {col}) is out of bounds for a {rows}x{cols} rack")]
    SlotOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("swap endpoints must be distinct slots")]
    IdenticalSlots,
    #[error("action index {index} out of range (rack has {count} swap actions)")]
    ActionIndexOutOfRange { index: usize, count: usize },
    #[error("swap requires exactly one occupied slot, got {occupied}")]
    SwapOccupancy { occupied: usize },
    #[error("rack dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("grid entry {value} exceeds {types} declared tube types")]
    EntryOutOfRange { value: u8, types: u8 },
    #[error("infeasible instance parameters: {0}")]
    InfeasibleInstance(String),
    #[error("instance generation exhausted its retry budget of {0}")]
    RetryBudgetExhausted(usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
