//! Finger-clearance conditions, swap acceptability, and per-slot condition
//! sets.
//!
//! A tube at `(x, y)` can be grasped without finger collision when at least
//! one of six occupancy equations over its 8-neighborhood holds. Slots beyond
//! the rack wall evaluate as empty: there is free space outside the rack for
//! the fingers.

use super::action::{ActionMask, SwapAction};
use super::types::{Dims, RackState, Slot};
use super::RackError;

/// A subset of the six clearance conditions `{1..6}`, packed into one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionSet(u8);

impl ConditionSet {
    pub const EMPTY: ConditionSet = ConditionSet(0);
    pub const FULL: ConditionSet = ConditionSet(0b0011_1111);

    /// Build from condition numbers in `1..=6`.
    pub fn from_conditions(ws: &[u8]) -> Self {
        let mut s = ConditionSet::EMPTY;
        for &w in ws {
            s.insert(w);
        }
        s
    }

    pub fn contains(&self, w: u8) -> bool {
        debug_assert!((1..=6).contains(&w));
        self.0 & (1 << (w - 1)) != 0
    }

    pub fn insert(&mut self, w: u8) {
        debug_assert!((1..=6).contains(&w));
        self.0 |= 1 << (w - 1);
    }

    pub fn subtract(&self, other: ConditionSet) -> ConditionSet {
        ConditionSet(self.0 & !other.0)
    }

    pub fn intersect(&self, other: ConditionSet) -> ConditionSet {
        ConditionSet(self.0 & other.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Iterate the member condition numbers in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=6u8).filter(move |&w| self.contains(w))
    }
}

impl std::fmt::Display for ConditionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        for w in self.iter() {
            write!(f, "{w}")?;
        }
        Ok(())
    }
}

/// Per-slot condition sets: the task/motion feedback channel. Starts full for
/// every slot and only shrinks during one planning episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionSetMap {
    dims: Dims,
    sets: Vec<ConditionSet>,
}

impl ConditionSetMap {
    /// All conditions valid at every slot.
    pub fn full(dims: Dims) -> Self {
        ConditionSetMap {
            dims,
            sets: vec![ConditionSet::FULL; dims.slots()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, slot: Slot) -> ConditionSet {
        self.sets[self.dims.flatten(slot)]
    }

    pub fn set(&mut self, slot: Slot, cs: ConditionSet) {
        let idx = self.dims.flatten(slot);
        self.sets[idx] = cs;
    }

    /// Remove the conditions in `xi` from the slot's set.
    pub fn subtract_at(&mut self, slot: Slot, xi: ConditionSet) {
        let idx = self.dims.flatten(slot);
        self.sets[idx] = self.sets[idx].subtract(xi);
    }

    /// Invalidate every condition at the slot.
    pub fn clear_at(&mut self, slot: Slot) {
        self.set(slot, ConditionSet::EMPTY);
    }

    pub fn is_full(&self) -> bool {
        self.sets.iter().all(|s| *s == ConditionSet::FULL)
    }
}

/// Evaluate which of the six clearance conditions hold at a slot.
///
/// Out-of-grid neighbor reads evaluate as empty. The conditions only inspect
/// the slot's neighborhood, never the slot itself, so the result is the same
/// whether the slot currently holds a tube or is probed for insertion.
pub fn slot_conditions(state: &RackState, slot: Slot) -> ConditionSet {
    let x = slot.row as isize;
    let y = slot.col as isize;
    let occ = |r: isize, c: isize| -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < state.dims().rows
            && (c as usize) < state.dims().cols
            && state.at(Slot::new(r as usize, c as usize)) != 0
    };
    // column sums of the left (E1) and right (E2) neighbor columns
    let e1 = occ(x - 1, y - 1) || occ(x, y - 1) || occ(x + 1, y - 1);
    let e2 = occ(x - 1, y + 1) || occ(x, y + 1) || occ(x + 1, y + 1);

    let mut set = ConditionSet::EMPTY;
    if !e1 && !occ(x - 1, y) && !occ(x - 1, y + 1) {
        set.insert(1);
    }
    if !e2 && !occ(x - 1, y) && !occ(x - 1, y - 1) {
        set.insert(2);
    }
    if !e1 && !occ(x + 1, y) && !occ(x + 1, y + 1) {
        set.insert(3);
    }
    if !e2 && !occ(x + 1, y) && !occ(x + 1, y - 1) {
        set.insert(4);
    }
    if !occ(x, y - 1) && !occ(x, y + 1) {
        set.insert(5);
    }
    if !occ(x - 1, y) && !occ(x + 1, y) {
        set.insert(6);
    }
    set
}

/// Resolve which action endpoint is the pick (occupied) slot and which is the
/// place (empty) slot. `None` when the exactly-one-occupied validity rule
/// fails.
pub fn swap_roles(state: &RackState, action: &SwapAction) -> Option<(Slot, Slot)> {
    let a_occ = state.is_occupied(action.slot_a());
    let b_occ = state.is_occupied(action.slot_b());
    match (a_occ, b_occ) {
        (true, false) => Some((action.slot_a(), action.slot_b())),
        (false, true) => Some((action.slot_b(), action.slot_a())),
        _ => None,
    }
}

/// A swap is acceptable when both endpoints satisfy at least one clearance
/// condition and exactly one endpoint is occupied.
pub fn is_acceptable(state: &RackState, action: &SwapAction) -> bool {
    swap_roles(state, action).is_some()
        && !slot_conditions(state, action.slot_a()).is_empty()
        && !slot_conditions(state, action.slot_b()).is_empty()
}

/// Acceptability with each endpoint's disjunction restricted to the surviving
/// conditions in `zeta`. With a full map this reduces to [`is_acceptable`].
pub fn is_acceptable_constrained(
    state: &RackState,
    action: &SwapAction,
    zeta: &ConditionSetMap,
) -> bool {
    swap_roles(state, action).is_some()
        && !slot_conditions(state, action.slot_a())
            .intersect(zeta.get(action.slot_a()))
            .is_empty()
        && !slot_conditions(state, action.slot_b())
            .intersect(zeta.get(action.slot_b()))
            .is_empty()
}

fn acceptable_mask_impl(state: &RackState, zeta: Option<&ConditionSetMap>) -> ActionMask {
    let dims = state.dims();
    let m = dims.slots();
    let mut clear = vec![false; m];
    let mut occupied = vec![false; m];
    for slot in dims.iter_slots() {
        let f = dims.flatten(slot);
        occupied[f] = state.is_occupied(slot);
        let mut cs = slot_conditions(state, slot);
        if let Some(z) = zeta {
            cs = cs.intersect(z.get(slot));
        }
        clear[f] = !cs.is_empty();
    }
    let mut mask = ActionMask::for_dims(dims);
    let mut index = 0;
    for lo in 0..m {
        for hi in (lo + 1)..m {
            if occupied[lo] != occupied[hi] && clear[lo] && clear[hi] {
                mask.set(index);
            }
            index += 1;
        }
    }
    mask
}

/// Visit every acceptable action in index order without materializing a
/// mask; the hot path for search successor expansion.
pub fn visit_acceptable<F: FnMut(SwapAction)>(
    state: &RackState,
    zeta: Option<&ConditionSetMap>,
    mut f: F,
) {
    let dims = state.dims();
    let m = dims.slots();
    let mut clear = vec![false; m];
    let mut occupied = vec![false; m];
    for slot in dims.iter_slots() {
        let fl = dims.flatten(slot);
        occupied[fl] = state.is_occupied(slot);
        let mut cs = slot_conditions(state, slot);
        if let Some(z) = zeta {
            cs = cs.intersect(z.get(slot));
        }
        clear[fl] = !cs.is_empty();
    }
    let mut index = 0;
    for lo in 0..m {
        for hi in (lo + 1)..m {
            if occupied[lo] != occupied[hi] && clear[lo] && clear[hi] {
                f(SwapAction::from_parts_unchecked(
                    dims.unflatten(lo),
                    dims.unflatten(hi),
                    index,
                ));
            }
            index += 1;
        }
    }
}

/// The set of acceptable actions of a state as a bit mask.
pub fn acceptable_actions(state: &RackState) -> ActionMask {
    acceptable_mask_impl(state, None)
}

/// Acceptable actions with the per-slot condition sets `zeta` applied.
pub fn acceptable_actions_constrained(state: &RackState, zeta: &ConditionSetMap) -> ActionMask {
    state
        .check_same_dims(zeta.dims())
        .expect("zeta dimensions must match the state");
    acceptable_mask_impl(state, Some(zeta))
}

/// A state is deadlocked when it is not a goal member and no acceptable
/// action exists.
pub fn is_deadlock(state: &RackState, goal: &super::types::GoalPattern) -> bool {
    !super::reward::is_goal(state, goal) && acceptable_actions(state).is_empty()
}

/// Move the tube across the swap pair. The occupied slot empties, the empty
/// slot receives the tube, and every other entry is unchanged.
pub fn apply_action(state: &RackState, action: &SwapAction) -> Result<RackState, RackError> {
    let (pick, place) = swap_roles(state, action).ok_or_else(|| {
        let occ = state.is_occupied(action.slot_a()) as usize
            + state.is_occupied(action.slot_b()) as usize;
        RackError::SwapOccupancy { occupied: occ }
    })?;
    let mut next = state.clone();
    let tube = next.at(pick);
    next.set(pick, 0);
    next.set(place, tube);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rack::types::GoalPattern;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    fn state_5x10_with(tubes: &[(usize, usize, u8)]) -> RackState {
        let dims = Dims::new(5, 10);
        let mut grid = vec![0u8; dims.slots()];
        for &(r, c, t) in tubes {
            grid[r * 10 + c] = t;
        }
        RackState::from_grid(dims, grid)
    }

    #[test]
    fn isolated_interior_tube_satisfies_all_six() {
        let s = state_5x10_with(&[(2, 4, 1)]);
        assert_eq!(slot_conditions(&s, Slot::new(2, 4)), ConditionSet::FULL);
    }

    #[test]
    fn fully_surrounded_tube_satisfies_none() {
        let mut tubes = vec![(2, 4, 1u8)];
        for dr in -1i32..=1 {
            for dc in -1i32..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                tubes.push(((2 + dr) as usize, (4 + dc) as usize, 1));
            }
        }
        let s = state_5x10_with(&tubes);
        assert!(slot_conditions(&s, Slot::new(2, 4)).is_empty());
    }

    /// Required-empty neighbor offsets for each of the six conditions.
    pub(crate) fn required_empty(w: u8) -> Vec<(i32, i32)> {
        match w {
            1 => vec![(-1, -1), (0, -1), (1, -1), (-1, 0), (-1, 1)],
            2 => vec![(-1, 1), (0, 1), (1, 1), (-1, 0), (-1, -1)],
            3 => vec![(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)],
            4 => vec![(-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)],
            5 => vec![(0, -1), (0, 1)],
            6 => vec![(-1, 0), (1, 0)],
            _ => unreachable!(),
        }
    }

    #[test]
    fn occupancy_templates_match_single_conditions() {
        // For each condition, occupy exactly the neighbors it does not
        // require empty; exactly that one condition must hold.
        let all: Vec<(i32, i32)> = (-1..=1)
            .flat_map(|dr| (-1..=1).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| !(dr == 0 && dc == 0))
            .collect();
        for w in 1..=6u8 {
            let req = required_empty(w);
            let tubes: Vec<(usize, usize, u8)> = std::iter::once((2, 4, 1))
                .chain(all.iter().filter(|d| !req.contains(d)).map(|&(dr, dc)| {
                    ((2 + dr) as usize, (4 + dc) as usize, 1u8)
                }))
                .collect();
            let s = state_5x10_with(&tubes);
            let set = slot_conditions(&s, Slot::new(2, 4));
            assert_eq!(
                set,
                ConditionSet::from_conditions(&[w]),
                "template for condition {w} produced {set}"
            );
        }
    }

    #[test]
    fn border_slots_treat_outside_as_empty() {
        // A tube in the corner of an otherwise empty rack: all neighbor terms
        // that fall outside the grid read as empty, so all conditions hold.
        let s = state_5x10_with(&[(0, 0, 1)]);
        assert_eq!(slot_conditions(&s, Slot::new(0, 0)), ConditionSet::FULL);
        // Against an explicit zero-padded grid the interior computation must
        // agree: embed the corner into a 7x12 grid with a one-cell border.
        let dims_pad = Dims::new(7, 12);
        let mut grid = vec![0u8; dims_pad.slots()];
        grid[1 * 12 + 1] = 1;
        let padded = RackState::from_grid(dims_pad, grid);
        assert_eq!(
            slot_conditions(&padded, Slot::new(1, 1)),
            slot_conditions(&s, Slot::new(0, 0))
        );
    }

    #[test]
    fn acceptability_requires_exactly_one_occupied() {
        let dims = Dims::new(3, 3);
        let s = RackState::from_grid(dims, vec![1, 0, 0, 0, 0, 0, 0, 0, 1]);
        let both_occ = SwapAction::encode(dims, Slot::new(0, 0), Slot::new(2, 2)).unwrap();
        let both_empty = SwapAction::encode(dims, Slot::new(0, 1), Slot::new(1, 1)).unwrap();
        let ok = SwapAction::encode(dims, Slot::new(0, 0), Slot::new(1, 1)).unwrap();
        assert!(!is_acceptable(&s, &both_occ));
        assert!(!is_acceptable(&s, &both_empty));
        assert!(is_acceptable(&s, &ok));
    }

    #[test]
    fn lone_tube_far_empty_slot_is_acceptable() {
        let s = state_5x10_with(&[(2, 2, 1)]);
        let a = SwapAction::encode(s.dims(), Slot::new(2, 2), Slot::new(2, 8)).unwrap();
        assert!(is_acceptable(&s, &a));
    }

    #[test]
    fn constrained_mask_reduces_to_unconstrained_with_full_zeta() {
        // exhaustive over all <=3-tube 3x3 states with 2 types
        let dims = Dims::new(3, 3);
        let zeta = ConditionSetMap::full(dims);
        let mut checked = 0usize;
        for occ_bits in 0u32..(1 << 9) {
            if occ_bits.count_ones() > 3 {
                continue;
            }
            let slots: Vec<usize> = (0..9).filter(|i| occ_bits & (1 << i) != 0).collect();
            let k = slots.len() as u32;
            for assign in 0..(2u32.pow(k)) {
                let mut grid = vec![0u8; 9];
                for (j, &slot) in slots.iter().enumerate() {
                    grid[slot] = 1 + ((assign >> j) & 1) as u8;
                }
                let s = RackState::from_grid(dims, grid);
                assert_eq!(
                    acceptable_actions_constrained(&s, &zeta),
                    acceptable_actions(&s)
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 835);
    }

    #[test]
    fn empty_zeta_at_only_occupied_slot_empties_mask() {
        let dims = Dims::new(3, 5);
        let mut grid = vec![0u8; 15];
        grid[7] = 1;
        let s = RackState::from_grid(dims, grid);
        let mut zeta = ConditionSetMap::full(dims);
        zeta.clear_at(Slot::new(1, 2));
        assert!(acceptable_actions_constrained(&s, &zeta).is_empty());
        assert!(!acceptable_actions(&s).is_empty());
    }

    #[test]
    fn restricting_zeta_removes_only_actions_through_that_slot() {
        // Craft a 3x5 grid where only C1 holds at (1, 2): occupy everything
        // C1 leaves unconstrained around it.
        let dims = Dims::new(3, 5);
        let mut grid = vec![0u8; 15];
        grid[1 * 5 + 2] = 1; // the tube at (1,2)
        for &(r, c) in &[(1usize, 3usize), (2, 2), (2, 3)] {
            grid[r * 5 + c] = 2;
        }
        let s = RackState::from_grid(dims, grid);
        assert_eq!(
            slot_conditions(&s, Slot::new(1, 2)),
            ConditionSet::from_conditions(&[1])
        );
        let mut zeta = ConditionSetMap::full(dims);
        zeta.set(Slot::new(1, 2), ConditionSet::from_conditions(&[2, 3, 4, 5, 6]));
        let before = acceptable_actions(&s);
        let after = acceptable_actions_constrained(&s, &zeta);
        let f = dims.flatten(Slot::new(1, 2));
        for index in 0..dims.action_count() {
            let a = SwapAction::decode(dims, index).unwrap();
            let touches = dims.flatten(a.slot_a()) == f || dims.flatten(a.slot_b()) == f;
            if touches {
                assert!(!after.get(index), "action {a} should be masked out");
            } else {
                assert_eq!(after.get(index), before.get(index));
            }
        }
        assert!(before.iter_ones().any(|i| {
            let a = SwapAction::decode(dims, i).unwrap();
            dims.flatten(a.slot_a()) == f || dims.flatten(a.slot_b()) == f
        }));
    }

    #[test]
    fn mask_agrees_with_bruteforce_reevaluation() {
        // Independent re-evaluation of the clearance equations per action on
        // random states.
        let mut rng = StdRng::seed_from_u64(7);
        let dims = Dims::new(3, 5);
        for _ in 0..200 {
            let grid: Vec<u8> = (0..15)
                .map(|_| {
                    if rng.random::<f64>() < 0.4 {
                        rng.random_range(1..=2)
                    } else {
                        0
                    }
                })
                .collect();
            let s = RackState::from_grid(dims, grid);
            let mask = acceptable_actions(&s);
            for index in 0..dims.action_count() {
                let a = SwapAction::decode(dims, index).unwrap();
                let expect = brute_acceptable(&s, &a);
                assert_eq!(mask.get(index), expect, "state {:?} action {a}", s.grid());
            }
        }
    }

    /// Literal re-evaluation of the clearance equations on an explicitly
    /// padded grid, independent of `slot_conditions`.
    fn brute_acceptable(s: &RackState, a: &SwapAction) -> bool {
        let occ_one = s.is_occupied(a.slot_a()) != s.is_occupied(a.slot_b());
        occ_one && brute_any_condition(s, a.slot_a()) && brute_any_condition(s, a.slot_b())
    }

    fn brute_any_condition(s: &RackState, slot: Slot) -> bool {
        let (rows, cols) = (s.dims().rows, s.dims().cols);
        // explicit zero padding
        let mut pad = vec![vec![0u8; cols + 2]; rows + 2];
        for r in 0..rows {
            for c in 0..cols {
                pad[r + 1][c + 1] = s.at(Slot::new(r, c));
            }
        }
        let x = slot.row + 1;
        let y = slot.col + 1;
        let e = |r: usize, c: usize| pad[r][c] as u32;
        let e1 = e(x - 1, y - 1) + e(x, y - 1) + e(x + 1, y - 1);
        let e2 = e(x - 1, y + 1) + e(x, y + 1) + e(x + 1, y + 1);
        let c1 = e1 + e(x - 1, y) + e(x - 1, y + 1) == 0;
        let c2 = e2 + e(x - 1, y) + e(x - 1, y - 1) == 0;
        let c3 = e1 + e(x + 1, y) + e(x + 1, y + 1) == 0;
        let c4 = e2 + e(x + 1, y) + e(x + 1, y - 1) == 0;
        let c5 = e(x, y - 1) + e(x, y + 1) == 0;
        let c6 = e(x - 1, y) + e(x + 1, y) == 0;
        c1 || c2 || c3 || c4 || c5 || c6
    }

    #[test]
    fn apply_action_moves_tube_and_preserves_count() {
        let dims = Dims::new(2, 2);
        let s = RackState::from_grid(dims, vec![2, 0, 0, 0]);
        let a = SwapAction::encode(dims, Slot::new(0, 0), Slot::new(1, 1)).unwrap();
        let next = apply_action(&s, &a).unwrap();
        assert_eq!(next.at(Slot::new(1, 1)), 2);
        assert_eq!(next.at(Slot::new(0, 0)), 0);
        assert_eq!(next.tube_count(), 1);
        // involution
        assert_eq!(apply_action(&next, &a).unwrap(), s);
    }

    #[test]
    fn apply_action_rejects_invalid_occupancy() {
        let dims = Dims::new(2, 2);
        let s = RackState::from_grid(dims, vec![2, 2, 0, 0]);
        let both_occ = SwapAction::encode(dims, Slot::new(0, 0), Slot::new(0, 1)).unwrap();
        let both_empty = SwapAction::encode(dims, Slot::new(1, 0), Slot::new(1, 1)).unwrap();
        assert!(matches!(
            apply_action(&s, &both_occ),
            Err(RackError::SwapOccupancy { occupied: 2 })
        ));
        assert!(matches!(
            apply_action(&s, &both_empty),
            Err(RackError::SwapOccupancy { occupied: 0 })
        ));
    }

    #[test]
    fn tube_count_invariant_over_random_walk() {
        let dims = Dims::new(3, 5);
        let goal = GoalPattern::new(dims, 2, {
            let mut g = vec![0u8; 15];
            g[0] = 1;
            g[1] = 1;
            g[5] = 2;
            g[6] = 2;
            g
        })
        .unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let mut s = crate::rack::generate_instance(&goal, 4, 2, &mut rng).unwrap();
        let per_type: Vec<usize> = (1..=2).map(|t| s.count_of_type(t)).collect();
        for _ in 0..1000 {
            let mask = acceptable_actions(&s);
            if mask.is_empty() {
                break;
            }
            let ones: Vec<usize> = mask.iter_ones().collect();
            let index = ones[rng.random_range(0..ones.len())];
            let a = SwapAction::decode(dims, index).unwrap();
            s = apply_action(&s, &a).unwrap();
            assert_eq!(s.tube_count(), 4);
            let now: Vec<usize> = (1..=2).map(|t| s.count_of_type(t)).collect();
            assert_eq!(now, per_type);
        }
    }

    proptest! {
        #[test]
        fn prop_apply_is_involution(occ in 0u32..(1 << 9), pick in 0usize..9, place in 0usize..9) {
            let dims = Dims::new(3, 3);
            prop_assume!(pick != place);
            prop_assume!(occ & (1 << pick) != 0);
            prop_assume!(occ & (1 << place) == 0);
            let grid: Vec<u8> = (0..9).map(|i| if occ & (1 << i) != 0 { 1 } else { 0 }).collect();
            let s = RackState::from_grid(dims, grid);
            let a = SwapAction::encode(dims, dims.unflatten(pick), dims.unflatten(place)).unwrap();
            let twice = apply_action(&apply_action(&s, &a).unwrap(), &a).unwrap();
            prop_assert_eq!(twice, s);
        }
    }
}
