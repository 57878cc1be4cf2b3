//! Task-level planning and learning engine for multi-class in-rack test tube
//! rearrangement.

pub mod net;
pub mod rack;
pub mod replay;
pub mod scalar;
pub mod search;

pub use rack::{
    ActionMask, ConditionSet, ConditionSetMap, Dims, GoalPattern, RackState, RewardTable, Slot,
    SwapAction,
};
pub use replay::Transition;
pub use scalar::Scalar;
pub use search::{SearchLimits, StateSequence};

/// Agent state (primary + target weights + optimizer moments) at training
/// precision.
pub type AgentParams32 = net::AgentParams<f32>;
/// Agent state at the precision used by gradient-check builds.
pub type AgentParams64 = net::AgentParams<f64>;
/// Network weights at training precision.
pub type NetParams32 = net::NetParams<f32>;
/// Network weights at gradient-check precision.
pub type NetParams64 = net::NetParams<f64>;
