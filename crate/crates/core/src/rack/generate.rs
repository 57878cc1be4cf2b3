//! Random training/evaluation instance generation at a controlled difficulty.

use rand::seq::SliceRandom;
use rand::Rng;

use super::conditions::is_deadlock;
use super::types::{GoalPattern, RackState, Slot};
use super::RackError;

const RETRY_BUDGET: usize = 1000;

/// Sample a start state with exactly `sigma_tubes` tubes of which exactly
/// `sigma_displaced` sit on slots that are not correct for their type.
///
/// Tube types are drawn by sampling goal slots without replacement, so no
/// type ever exceeds its goal capacity. Deadlocked draws are rejected and
/// resampled within a bounded retry budget.
pub fn generate_instance<R: Rng + ?Sized>(
    goal: &GoalPattern,
    sigma_tubes: usize,
    sigma_displaced: usize,
    rng: &mut R,
) -> Result<RackState, RackError> {
    if sigma_displaced < 1 || sigma_displaced > sigma_tubes {
        return Err(RackError::InfeasibleInstance(format!(
            "need 1 <= sigma_displaced ({sigma_displaced}) <= sigma_tubes ({sigma_tubes})"
        )));
    }
    if sigma_tubes > goal.total_capacity() {
        return Err(RackError::InfeasibleInstance(format!(
            "sigma_tubes ({sigma_tubes}) exceeds goal capacity ({})",
            goal.total_capacity()
        )));
    }

    let goal_slots: Vec<Slot> = goal
        .dims()
        .iter_slots()
        .filter(|&s| goal.at(s) != 0)
        .collect();

    for _ in 0..RETRY_BUDGET {
        if let Some(state) = try_place(goal, &goal_slots, sigma_tubes, sigma_displaced, rng) {
            if !is_deadlock(&state, goal) {
                return Ok(state);
            }
        }
    }
    Err(RackError::RetryBudgetExhausted(RETRY_BUDGET))
}

fn try_place<R: Rng + ?Sized>(
    goal: &GoalPattern,
    goal_slots: &[Slot],
    sigma_tubes: usize,
    sigma_displaced: usize,
    rng: &mut R,
) -> Option<RackState> {
    let mut picks = goal_slots.to_vec();
    picks.shuffle(rng);
    picks.truncate(sigma_tubes);

    let mut state = RackState::empty(goal.dims());
    // the first sigma_tubes - sigma_displaced tubes go straight onto their
    // own goal slots
    let correct = sigma_tubes - sigma_displaced;
    for &slot in &picks[..correct] {
        state.set(slot, goal.at(slot));
    }
    // the rest land anywhere that is empty and wrong for their type
    for &origin in &picks[correct..] {
        let tube = goal.at(origin);
        let candidates: Vec<Slot> = goal
            .dims()
            .iter_slots()
            .filter(|&s| state.at(s) == 0 && goal.at(s) != tube)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let slot = candidates[rng.random_range(0..candidates.len())];
        state.set(slot, tube);
    }
    Some(state)
}
