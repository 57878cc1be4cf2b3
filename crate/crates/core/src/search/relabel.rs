//! Turn a state sequence into replay transitions by recomputing actions,
//! rewards, terminal flags, and next-state acceptability masks.

use crate::rack::{
    acceptable_actions, reward, ActionMask, GoalPattern, RewardTable, SwapAction,
    TerminalKind,
};
use crate::replay::Transition;

use super::astar::StateSequence;
use super::SearchError;

/// Relabel each consecutive pair of the sequence. A length-1 sequence yields
/// no transitions.
pub fn relabel(
    seq: &StateSequence,
    goal: &GoalPattern,
    table: &RewardTable,
) -> Result<Vec<Transition>, SearchError> {
    let states = seq.states();
    let actions: Vec<SwapAction> = seq.actions();
    let mut out = Vec::with_capacity(actions.len());
    for (i, action) in actions.iter().enumerate() {
        let state = states[i].clone();
        let next_state = states[i + 1].clone();
        let outcome = reward(table, &state, action, &next_state, goal)?;
        let next_mask: ActionMask = acceptable_actions(&next_state);
        out.push(Transition {
            state,
            action: *action,
            reward: outcome.value,
            next_state,
            terminal: outcome.terminal,
            next_mask,
        });
    }
    Ok(out)
}
