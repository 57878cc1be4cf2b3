//! A* over rack states with the action-count cost and the tube-mismatch
//! heuristic.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::rack::{
    apply_action, disorder, is_acceptable, is_goal, mismatch_h, visit_acceptable, ConditionSetMap,
    GoalPattern, RackState, Slot, SwapAction,
};

use super::SearchError;

/// Search limits: the A* node-expansion budget and the trimmer's redundancy
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub iteration_limit: usize,
    pub trim_horizon: usize,
}

impl SearchLimits {
    pub fn new(iteration_limit: usize, trim_horizon: usize) -> Result<Self, SearchError> {
        if iteration_limit < 1 {
            return Err(SearchError::BadLimits("iteration limit must be >= 1".into()));
        }
        if trim_horizon < 2 {
            return Err(SearchError::BadLimits("trim horizon must be >= 2".into()));
        }
        Ok(SearchLimits {
            iteration_limit,
            trim_horizon,
        })
    }
}

/// What the search is steering toward: any member of the goal pattern, or
/// one exact arrangement (the trimmer's sub-sequence endpoints).
#[derive(Debug, Clone, Copy)]
pub enum SearchGoal<'a> {
    Pattern(&'a GoalPattern),
    Exact(&'a RackState),
}

impl SearchGoal<'_> {
    fn reached(&self, s: &RackState) -> bool {
        match self {
            SearchGoal::Pattern(goal) => is_goal(s, goal),
            SearchGoal::Exact(target) => s == *target,
        }
    }

    /// Tubes out of place with respect to the target; admissible for the
    /// action count since one swap relocates one tube.
    fn heuristic(&self, s: &RackState) -> usize {
        match self {
            SearchGoal::Pattern(goal) => mismatch_h(s, goal),
            SearchGoal::Exact(target) => disorder(s, target),
        }
    }
}

/// An ordered list of states whose consecutive pairs are each connected by
/// one acceptable swap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence {
    states: Vec<RackState>,
}

impl StateSequence {
    /// Validate connectivity: every consecutive pair must differ by exactly
    /// one tube relocation whose swap is acceptable in the earlier state.
    pub fn new(states: Vec<RackState>) -> Result<Self, SearchError> {
        assert!(!states.is_empty(), "a sequence holds at least one state");
        for i in 1..states.len() {
            states[i]
                .check_same_dims(states[i - 1].dims())
                .map_err(SearchError::Rack)?;
            if exist_action(&states[i - 1], &states[i]).is_none() {
                return Err(SearchError::Disconnected(i - 1, i));
            }
        }
        Ok(StateSequence { states })
    }

    pub fn single(state: RackState) -> Self {
        StateSequence {
            states: vec![state],
        }
    }

    /// Construction for paths that are valid by construction.
    pub(crate) fn from_states_unchecked(states: Vec<RackState>) -> Self {
        debug_assert!(!states.is_empty());
        StateSequence { states }
    }

    pub fn states(&self) -> &[RackState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of swaps along the sequence.
    pub fn action_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn first(&self) -> &RackState {
        &self.states[0]
    }

    pub fn last(&self) -> &RackState {
        self.states.last().expect("nonempty")
    }

    /// The implied action list: one swap per consecutive state pair.
    pub fn actions(&self) -> Vec<SwapAction> {
        (1..self.states.len())
            .map(|i| {
                exist_action(&self.states[i - 1], &self.states[i])
                    .expect("validated sequence stays connected")
            })
            .collect()
    }
}

/// The single tube relocation between two states, if there is exactly one:
/// `(pick, place)` such that `a[pick] = b[place]` moved and all other slots
/// agree.
fn relocation(a: &RackState, b: &RackState) -> Option<(Slot, Slot)> {
    if a.dims() != b.dims() || a.tube_count() != b.tube_count() {
        return None;
    }
    let mut emptied: Option<Slot> = None;
    let mut filled: Option<Slot> = None;
    for slot in a.dims().iter_slots() {
        let (va, vb) = (a.at(slot), b.at(slot));
        if va == vb {
            continue;
        }
        if va != 0 && vb == 0 && emptied.is_none() {
            emptied = Some(slot);
        } else if va == 0 && vb != 0 && filled.is_none() {
            filled = Some(slot);
        } else {
            return None; // more than one relocation or a type change in place
        }
    }
    match (emptied, filled) {
        (Some(p), Some(q)) if a.at(p) == b.at(q) => Some((p, q)),
        _ => None,
    }
}

/// The acceptable action transforming `a` into `b`, when the two states
/// differ by exactly one tube relocation whose swap is acceptable in `a`.
pub fn exist_action(a: &RackState, b: &RackState) -> Option<SwapAction> {
    let (pick, place) = relocation(a, b)?;
    let action = SwapAction::encode(a.dims(), pick, place).ok()?;
    if is_acceptable(a, &action) {
        Some(action)
    } else {
        None
    }
}

struct OpenEntry {
    f: u32,
    g: u32,
    seq: u64,
    idx: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    // max-heap: prefer the lowest f, then the largest g (deeper first), then
    // FIFO insertion order
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then(self.g.cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Best-first search from `start` to the goal with `f = g + h`, `g` the
/// action count so far, and the tube-mismatch heuristic. Successors are the
/// acceptable actions, restricted by `zeta` when given. Returns the found
/// state sequence, or `None` once the expansion budget is spent.
pub fn astar_search(
    start: &RackState,
    goal: SearchGoal<'_>,
    limits: &SearchLimits,
    zeta: Option<&ConditionSetMap>,
) -> Option<StateSequence> {
    if goal.reached(start) {
        return Some(StateSequence::single(start.clone()));
    }

    // arena of discovered states with parent links
    let mut states: Vec<RackState> = vec![start.clone()];
    let mut parents: Vec<usize> = vec![usize::MAX];
    let mut open = BinaryHeap::new();
    let mut closed: HashSet<RackState> = HashSet::new();
    let mut seq: u64 = 0;

    open.push(OpenEntry {
        f: goal.heuristic(start) as u32,
        g: 0,
        seq,
        idx: 0,
    });

    let mut expansions = 0usize;
    while let Some(entry) = open.pop() {
        let state = states[entry.idx].clone();
        if closed.contains(&state) {
            continue;
        }
        if goal.reached(&state) {
            return Some(reconstruct(&states, &parents, entry.idx));
        }
        if expansions >= limits.iteration_limit {
            return None;
        }
        expansions += 1;
        closed.insert(state.clone());

        let mut successors: Vec<SwapAction> = Vec::new();
        visit_acceptable(&state, zeta, |a| successors.push(a));
        for action in successors {
            let next = apply_action(&state, &action).expect("acceptable swap applies");
            if closed.contains(&next) {
                continue;
            }
            let h = goal.heuristic(&next) as u32;
            states.push(next);
            parents.push(entry.idx);
            seq += 1;
            open.push(OpenEntry {
                f: entry.g + 1 + h,
                g: entry.g + 1,
                seq,
                idx: states.len() - 1,
            });
        }
    }
    None
}

fn reconstruct(states: &[RackState], parents: &[usize], mut idx: usize) -> StateSequence {
    let mut path = Vec::new();
    loop {
        path.push(states[idx].clone());
        if parents[idx] == usize::MAX {
            break;
        }
        idx = parents[idx];
    }
    path.reverse();
    StateSequence::from_states_unchecked(path)
}

/// Complete a truncated episode by searching from its interrupted final
/// state to the goal pattern. On success the tail is appended; on failure
/// the episode is abandoned.
pub fn rescue(
    truncated: &StateSequence,
    goal: &GoalPattern,
    limits: &SearchLimits,
) -> Option<StateSequence> {
    let tail = astar_search(truncated.last(), SearchGoal::Pattern(goal), limits, None)?;
    let mut states = truncated.states().to_vec();
    states.extend(tail.states()[1..].iter().cloned());
    Some(StateSequence::from_states_unchecked(states))
}
