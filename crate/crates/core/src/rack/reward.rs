//! Handcrafted reward classification, goal and deadlock tests, and the two
//! count metrics used by search (disorder, mismatch).

use serde::{Deserialize, Serialize};

use super::conditions::{acceptable_actions, slot_conditions, swap_roles};
use super::types::{GoalPattern, RackState, Slot};
use super::{RackError, SwapAction};

/// Reward values for each outcome case. The defaults are the handcrafted
/// table; every value can be overridden through the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardTable {
    pub goal_achievement: f64,
    pub place_correct: f64,
    pub remove_incorrect: f64,
    pub place_incorrect: f64,
    pub remove_correct: f64,
    pub block: f64,
    pub deadlock: f64,
    pub indifferent: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            goal_achievement: 20.0,
            place_correct: 1.0,
            remove_incorrect: 1.0,
            place_incorrect: -1.0,
            remove_correct: -2.0,
            block: -3.0,
            deadlock: -20.0,
            indifferent: -1.0,
        }
    }
}

/// Whether a transition ended the episode and why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminalKind {
    NonTerminal,
    Goal,
    Deadlock,
}

impl TerminalKind {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, TerminalKind::NonTerminal)
    }
}

/// Role of a slot with respect to the moved tube's type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalRole {
    /// The goal keeps this slot empty.
    NonGoal,
    /// Goal slot designated for the moved tube's type.
    CorrectGoal,
    /// Goal slot designated for a different type.
    IncorrectGoal,
}

fn goal_role(goal: &GoalPattern, slot: Slot, tube: u8) -> GoalRole {
    match goal.at(slot) {
        0 => GoalRole::NonGoal,
        g if g == tube => GoalRole::CorrectGoal,
        _ => GoalRole::IncorrectGoal,
    }
}

/// Classified transition outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardOutcome {
    pub value: f64,
    pub terminal: TerminalKind,
    pub case: RewardCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardCase {
    GoalAchievement,
    Deadlock,
    /// The placement removed finger access to empty goal slots still needed
    /// by unplaced tubes.
    Block,
    /// Sum of the source-slot and destination-slot contributions; a net-zero
    /// move is charged the indifferent penalty.
    Composite {
        source: GoalRole,
        dest: GoalRole,
        indifferent: bool,
    },
}

/// A state meets the goal pattern when every occupied slot's type equals the
/// goal entry at that slot. Surplus empty goal slots are allowed, so the
/// empty rack vacuously matches any pattern.
pub fn is_goal(state: &RackState, goal: &GoalPattern) -> bool {
    state
        .dims()
        .iter_slots()
        .all(|slot| state.at(slot) == 0 || state.at(slot) == goal.at(slot))
}

/// Count of occupied slots in `a` that do not match `b` in both position and
/// type.
pub fn disorder(a: &RackState, b: &RackState) -> usize {
    a.dims()
        .iter_slots()
        .filter(|&slot| a.at(slot) != 0 && a.at(slot) != b.at(slot))
        .count()
}

/// Count of tubes not sitting on a goal slot of their own type. A tube on a
/// keep-empty slot counts as mismatched. Each swap moves one tube, so this
/// changes by at most one per action and is an admissible action-count
/// heuristic.
pub fn mismatch_h(state: &RackState, goal: &GoalPattern) -> usize {
    state
        .dims()
        .iter_slots()
        .filter(|&slot| {
            let v = state.at(slot);
            v != 0 && v != goal.at(slot)
        })
        .count()
}

/// Tubes of type `lambda` not yet on a correct goal slot.
fn unplaced_count(state: &RackState, goal: &GoalPattern, lambda: u8) -> usize {
    let total = state.count_of_type(lambda);
    let placed = state
        .dims()
        .iter_slots()
        .filter(|&slot| state.at(slot) == lambda && goal.at(slot) == lambda)
        .count();
    total - placed
}

/// Empty goal slots of type `lambda` that are finger-accessible, excluding
/// one slot (the swap destination, whose own occupancy change is not
/// blockage).
fn accessible_empty_goal_slots(
    state: &RackState,
    goal: &GoalPattern,
    lambda: u8,
    exclude: Slot,
) -> usize {
    state
        .dims()
        .iter_slots()
        .filter(|&slot| {
            slot != exclude
                && goal.at(slot) == lambda
                && state.at(slot) == 0
                && !slot_conditions(state, slot).is_empty()
        })
        .count()
}

/// Classify the transition `prev --action--> next` against the goal pattern.
///
/// Precedence: goal achievement, then deadlock, then blocking, then the
/// composite source/destination classification with the indifferent penalty
/// for net-zero moves. The caller guarantees `next` resulted from applying
/// `action` to `prev`.
pub fn reward(
    table: &RewardTable,
    prev: &RackState,
    action: &SwapAction,
    next: &RackState,
    goal: &GoalPattern,
) -> Result<RewardOutcome, RackError> {
    prev.check_same_dims(goal.dims())?;
    next.check_same_dims(goal.dims())?;
    let (pick, place) = swap_roles(prev, action).ok_or(RackError::SwapOccupancy {
        occupied: prev.is_occupied(action.slot_a()) as usize
            + prev.is_occupied(action.slot_b()) as usize,
    })?;
    let tube = prev.at(pick);

    if is_goal(next, goal) {
        return Ok(RewardOutcome {
            value: table.goal_achievement,
            terminal: TerminalKind::Goal,
            case: RewardCase::GoalAchievement,
        });
    }
    if acceptable_actions(next).is_empty() {
        return Ok(RewardOutcome {
            value: table.deadlock,
            terminal: TerminalKind::Deadlock,
            case: RewardCase::Deadlock,
        });
    }
    if goal.at(place) != 0 && blocks_needed_goal_slots(prev, next, goal, place) {
        return Ok(RewardOutcome {
            value: table.block,
            terminal: TerminalKind::NonTerminal,
            case: RewardCase::Block,
        });
    }

    let source = goal_role(goal, pick, tube);
    let dest = goal_role(goal, place, tube);
    let source_term = match source {
        GoalRole::NonGoal => 0.0,
        GoalRole::IncorrectGoal => table.remove_incorrect,
        GoalRole::CorrectGoal => table.remove_correct,
    };
    let dest_term = match dest {
        GoalRole::NonGoal => 0.0,
        GoalRole::CorrectGoal => table.place_correct,
        GoalRole::IncorrectGoal => table.place_incorrect,
    };
    let composite = source_term + dest_term;
    let indifferent = composite == 0.0;
    Ok(RewardOutcome {
        value: if indifferent {
            table.indifferent
        } else {
            composite
        },
        terminal: TerminalKind::NonTerminal,
        case: RewardCase::Composite {
            source,
            dest,
            indifferent,
        },
    })
}

/// The placement blocks when, for some type with unplaced tubes remaining,
/// the number of accessible empty goal slots of that type strictly decreased.
fn blocks_needed_goal_slots(
    prev: &RackState,
    next: &RackState,
    goal: &GoalPattern,
    place: Slot,
) -> bool {
    (1..=goal.tube_types()).any(|lambda| {
        unplaced_count(next, goal, lambda) >= 1
            && accessible_empty_goal_slots(next, goal, lambda, place)
                < accessible_empty_goal_slots(prev, goal, lambda, place)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rack::conditions::{apply_action, is_deadlock, ConditionSet};
    use crate::rack::types::Dims;

    fn goal_3x5() -> GoalPattern {
        // type-1 goal slots on the left edge, type-2 on the right edge
        let mut g = vec![0u8; 15];
        g[0] = 1; // (0,0)
        g[5] = 1; // (1,0)
        g[4] = 2; // (0,4)
        g[14] = 2; // (2,4)
        GoalPattern::new(Dims::new(3, 5), 2, g).unwrap()
    }

    fn state(grid: [[u8; 5]; 3]) -> RackState {
        RackState::from_grid(Dims::new(3, 5), grid.concat())
    }

    fn do_reward(prev: &RackState, from: (usize, usize), to: (usize, usize)) -> RewardOutcome {
        let a = SwapAction::encode(
            prev.dims(),
            Slot::new(from.0, from.1),
            Slot::new(to.0, to.1),
        )
        .unwrap();
        let next = apply_action(prev, &a).unwrap();
        reward(&RewardTable::default(), prev, &a, &next, &goal_3x5()).unwrap()
    }

    #[test]
    fn goal_tests() {
        let goal = goal_3x5();
        assert!(is_goal(&RackState::empty(goal.dims()), &goal));
        assert!(is_goal(&goal.filled_state(), &goal));
        let off = state([[0, 1, 0, 0, 0], [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]]);
        assert!(!is_goal(&off, &goal));
    }

    #[test]
    fn final_tube_placed_correctly_scores_goal() {
        let prev = state([[1, 0, 0, 0, 2], [0, 1, 0, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (1, 1), (1, 0));
        assert_eq!(out.value, 20.0);
        assert_eq!(out.terminal, TerminalKind::Goal);
    }

    #[test]
    fn place_into_correct_goal_slot_scores_plus_one() {
        // second type-1 tube stays displaced so the move is not terminal
        let prev = state([[0, 0, 1, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (0, 2), (0, 0));
        assert_eq!(out.value, 1.0);
        assert_eq!(out.terminal, TerminalKind::NonTerminal);
        assert!(matches!(
            out.case,
            RewardCase::Composite {
                source: GoalRole::NonGoal,
                dest: GoalRole::CorrectGoal,
                ..
            }
        ));
    }

    #[test]
    fn remove_from_incorrect_goal_slot_scores_plus_one() {
        // a type-2 tube sits on a type-1 goal slot
        let prev = state([[2, 0, 1, 0, 0], [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (0, 0), (2, 2));
        assert_eq!(out.value, 1.0);
        assert!(matches!(
            out.case,
            RewardCase::Composite {
                source: GoalRole::IncorrectGoal,
                dest: GoalRole::NonGoal,
                ..
            }
        ));
    }

    #[test]
    fn place_into_incorrect_goal_slot_scores_minus_one() {
        let prev = state([[0, 0, 1, 0, 0], [0, 0, 2, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (1, 2), (0, 0));
        assert_eq!(out.value, -1.0);
        assert!(matches!(
            out.case,
            RewardCase::Composite {
                source: GoalRole::NonGoal,
                dest: GoalRole::IncorrectGoal,
                ..
            }
        ));
    }

    #[test]
    fn remove_from_correct_goal_slot_scores_minus_two() {
        let prev = state([[1, 0, 1, 0, 0], [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (0, 0), (2, 2));
        assert_eq!(out.value, -2.0);
        assert!(matches!(
            out.case,
            RewardCase::Composite {
                source: GoalRole::CorrectGoal,
                dest: GoalRole::NonGoal,
                ..
            }
        ));
    }

    #[test]
    fn indifferent_move_scores_minus_one() {
        let prev = state([[0, 0, 1, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 0, 0]]);
        let out = do_reward(&prev, (0, 2), (2, 2));
        assert_eq!(out.value, -1.0);
        assert!(matches!(
            out.case,
            RewardCase::Composite {
                indifferent: true,
                ..
            }
        ));
    }

    #[test]
    fn blocking_placement_scores_minus_three() {
        // Goal: type-1 slots at (0,0), (1,1), (2,4); type-2 slot at (0,2).
        // The empty type-1 slot (1,1) is hemmed in so that only its C2
        // clearance survives, and that clearance runs through (0,2). Moving
        // the type-2 tube onto its own goal slot (0,2) therefore removes
        // finger access to (1,1) while type-1 tubes remain unplaced.
        let mut g = vec![0u8; 15];
        g[0] = 1; // (0,0)
        g[6] = 1; // (1,1)
        g[14] = 1; // (2,4)
        g[2] = 2; // (0,2)
        let goal = GoalPattern::new(Dims::new(3, 5), 2, g).unwrap();
        let prev = state([
            [0, 0, 0, 0, 2],
            [1, 0, 0, 0, 0],
            [1, 1, 0, 0, 0],
        ]);
        assert_eq!(
            slot_conditions(&prev, Slot::new(1, 1)),
            ConditionSet::from_conditions(&[2])
        );
        let a = SwapAction::encode(prev.dims(), Slot::new(0, 4), Slot::new(0, 2)).unwrap();
        let next = apply_action(&prev, &a).unwrap();
        assert!(slot_conditions(&next, Slot::new(1, 1)).is_empty());
        let out = reward(&RewardTable::default(), &prev, &a, &next, &goal).unwrap();
        assert_eq!(out.value, -3.0);
        assert_eq!(out.case, RewardCase::Block);
        assert_eq!(out.terminal, TerminalKind::NonTerminal);
    }

    #[test]
    fn deadlock_scores_minus_twenty() {
        // A full ring on a 3x3 rack encloses the only empty slot, which then
        // has no clearance: no swap can involve it, so the state is dead.
        // The transition walks the center tube out to complete the ring.
        let dims = Dims::new(3, 3);
        let mut grid = vec![1u8; 9];
        grid[1] = 0; // (0,1) empty; the center (1,1) holds the moving tube
        let prev = RackState::from_grid(dims, grid);
        let goal = GoalPattern::new(dims, 1, {
            let mut g = vec![1u8; 9];
            g[0] = 0; // the ring never matches: (0,0) must stay empty
            g
        })
        .unwrap();
        let a = SwapAction::encode(dims, Slot::new(1, 1), Slot::new(0, 1)).unwrap();
        let next = apply_action(&prev, &a).unwrap();
        assert!(acceptable_actions(&next).is_empty());
        assert!(!is_goal(&next, &goal));
        let out = reward(&RewardTable::default(), &prev, &a, &next, &goal).unwrap();
        assert_eq!(out.value, -20.0);
        assert_eq!(out.terminal, TerminalKind::Deadlock);
    }

    #[test]
    fn single_tube_never_deadlocks() {
        for rows in 2..=3 {
            for cols in 2..=4 {
                let dims = Dims::new(rows, cols);
                let goal = GoalPattern::new(dims, 1, {
                    let mut g = vec![0u8; dims.slots()];
                    g[0] = 1;
                    g
                })
                .unwrap();
                for f in 0..dims.slots() {
                    let mut grid = vec![0u8; dims.slots()];
                    grid[f] = 1;
                    let s = RackState::from_grid(dims, grid);
                    assert!(!is_deadlock(&s, &goal), "{rows}x{cols} slot {f}");
                }
            }
        }
    }

    #[test]
    fn mutual_obstruction_ring_is_deadlock() {
        // Tubes ringing the only empty slot obstruct each other: the empty
        // center has every neighbor occupied, so no condition holds there and
        // no swap has a usable destination.
        let dims = Dims::new(3, 3);
        let mut grid = vec![1u8; 9];
        grid[4] = 0; // center empty
        let s = RackState::from_grid(dims, grid);
        let goal = GoalPattern::new(dims, 1, {
            let mut g = vec![1u8; 9];
            g[0] = 0;
            g
        })
        .unwrap();
        assert!(!acceptable_actions(&s).iter_ones().any(|_| true));
        assert!(is_deadlock(&s, &goal));
    }

    #[test]
    fn disorder_properties() {
        let dims = Dims::new(2, 3);
        let s = RackState::from_grid(dims, vec![1, 0, 2, 0, 0, 0]);
        assert_eq!(disorder(&s, &s), 0);
        let moved = RackState::from_grid(dims, vec![1, 0, 0, 2, 0, 0]);
        assert_eq!(disorder(&s, &moved), 1);
        // symmetric when tube counts are equal: exhaustive over all ordered
        // pairs of 2-tube 2x3 states with 2 types
        let mut states = Vec::new();
        for a in 0..6 {
            for b in (a + 1)..6 {
                for ta in 1..=2u8 {
                    for tb in 1..=2u8 {
                        let mut g = vec![0u8; 6];
                        g[a] = ta;
                        g[b] = tb;
                        states.push(RackState::from_grid(dims, g));
                    }
                }
            }
        }
        for x in &states {
            for y in &states {
                assert_eq!(disorder(x, y), disorder(y, x));
            }
        }
    }

    #[test]
    fn mismatch_heuristic_properties() {
        let goal = goal_3x5();
        assert_eq!(mismatch_h(&goal.filled_state(), &goal), 0);
        let one_off = state([[0, 1, 0, 0, 2], [1, 0, 0, 0, 0], [0, 0, 0, 0, 2]]);
        assert_eq!(mismatch_h(&one_off, &goal), 1);
        // bounded by tube count and changes by at most 1 per swap,
        // exhaustively on 2-tube 3x3 states
        let dims = Dims::new(3, 3);
        let g3 = GoalPattern::new(dims, 2, vec![1, 2, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                if a == b {
                    continue;
                }
                let mut grid = vec![0u8; 9];
                grid[a] = 1;
                grid[b] = 2;
                let s = RackState::from_grid(dims, grid);
                let h = mismatch_h(&s, &g3);
                assert!(h <= s.tube_count());
                let mask = acceptable_actions(&s);
                for index in mask.iter_ones() {
                    let act = SwapAction::decode(dims, index).unwrap();
                    let next = apply_action(&s, &act).unwrap();
                    let dh = mismatch_h(&next, &g3) as isize - h as isize;
                    assert!(dh.abs() <= 1, "swap changed mismatch by {dh}");
                }
            }
        }
    }

    #[test]
    fn reward_dimension_mismatch_is_rejected() {
        let goal = goal_3x5();
        let prev = RackState::empty(Dims::new(2, 2));
        let a = SwapAction::encode(Dims::new(2, 2), Slot::new(0, 0), Slot::new(0, 1)).unwrap();
        let err = reward(&RewardTable::default(), &prev, &a, &prev, &goal).unwrap_err();
        assert!(matches!(err, RackError::DimensionMismatch(..)));
    }
}
