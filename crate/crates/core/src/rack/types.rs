//! Core rack domain types: dimensions, slots, goal patterns, and states.

use ndarray::Array3;

use super::RackError;
use crate::scalar::Scalar;

/// Rack dimensions in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize) -> Self {
        Dims { rows, cols }
    }

    /// Number of slots in the rack.
    pub fn slots(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of distinct unordered swap actions: `m(m-1)/2` for `m` slots.
    pub fn action_count(&self) -> usize {
        let m = self.slots();
        m * (m - 1) / 2
    }

    pub fn contains(&self, slot: Slot) -> bool {
        slot.row < self.rows && slot.col < self.cols
    }

    /// Row-major flat index of a slot.
    pub fn flatten(&self, slot: Slot) -> usize {
        slot.row * self.cols + slot.col
    }

    pub fn unflatten(&self, index: usize) -> Slot {
        Slot::new(index / self.cols, index % self.cols)
    }

    /// Iterate all slots in row-major order.
    pub fn iter_slots(&self) -> impl Iterator<Item = Slot> + '_ {
        let cols = self.cols;
        (0..self.slots()).map(move |i| Slot::new(i / cols, i % cols))
    }

    pub fn check_slot(&self, slot: Slot) -> Result<(), RackError> {
        if self.contains(slot) {
            Ok(())
        } else {
            Err(RackError::SlotOutOfBounds {
                row: slot.row,
                col: slot.col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

/// A rack slot addressed by row and column (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub row: usize,
    pub col: usize,
}

impl Slot {
    pub fn new(row: usize, col: usize) -> Self {
        Slot { row, col }
    }
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// The target arrangement: a grid of tube type ids where 0 marks slots that
/// must stay empty in the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalPattern {
    dims: Dims,
    tube_types: u8,
    grid: Vec<u8>,
}

impl GoalPattern {
    pub fn new(dims: Dims, tube_types: u8, grid: Vec<u8>) -> Result<Self, RackError> {
        assert_eq!(grid.len(), dims.slots(), "grid length must match dims");
        for &v in &grid {
            if v > tube_types {
                return Err(RackError::EntryOutOfRange {
                    value: v,
                    types: tube_types,
                });
            }
        }
        Ok(GoalPattern {
            dims,
            tube_types,
            grid,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn tube_types(&self) -> u8 {
        self.tube_types
    }

    /// Goal entry at a slot; 0 means the goal keeps the slot empty.
    pub fn at(&self, slot: Slot) -> u8 {
        self.grid[self.dims.flatten(slot)]
    }

    pub fn grid(&self) -> &[u8] {
        &self.grid
    }

    /// Number of goal slots designated for tube type `lambda`.
    pub fn capacity(&self, lambda: u8) -> usize {
        self.grid.iter().filter(|&&v| v == lambda && v != 0).count()
    }

    /// Total number of goal slots (nonzero entries).
    pub fn total_capacity(&self) -> usize {
        self.grid.iter().filter(|&&v| v != 0).count()
    }

    /// The fully arranged state that places one tube on every goal slot.
    pub fn filled_state(&self) -> RackState {
        RackState::from_grid(self.dims, self.grid.clone())
    }
}

/// A rack arrangement: the occupancy matrix with entries in `0..=n_t`, 0
/// meaning an empty slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RackState {
    dims: Dims,
    grid: Vec<u8>,
    tube_count: u16,
}

impl RackState {
    /// Empty rack.
    pub fn empty(dims: Dims) -> Self {
        RackState {
            dims,
            grid: vec![0; dims.slots()],
            tube_count: 0,
        }
    }

    pub fn from_grid(dims: Dims, grid: Vec<u8>) -> Self {
        assert_eq!(grid.len(), dims.slots(), "grid length must match dims");
        let tube_count = grid.iter().filter(|&&v| v != 0).count() as u16;
        RackState {
            dims,
            grid,
            tube_count,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn at(&self, slot: Slot) -> u8 {
        self.grid[self.dims.flatten(slot)]
    }

    pub fn is_occupied(&self, slot: Slot) -> bool {
        self.at(slot) != 0
    }

    pub fn grid(&self) -> &[u8] {
        &self.grid
    }

    /// Cached number of occupied slots.
    pub fn tube_count(&self) -> usize {
        self.tube_count as usize
    }

    /// Number of tubes of one type.
    pub fn count_of_type(&self, lambda: u8) -> usize {
        debug_assert!(lambda != 0);
        self.grid.iter().filter(|&&v| v == lambda).count()
    }

    pub(crate) fn set(&mut self, slot: Slot, value: u8) {
        let idx = self.dims.flatten(slot);
        let old = self.grid[idx];
        if old != 0 {
            self.tube_count -= 1;
        }
        if value != 0 {
            self.tube_count += 1;
        }
        self.grid[idx] = value;
    }

    pub fn check_same_dims(&self, other: Dims) -> Result<(), RackError> {
        if self.dims == other {
            Ok(())
        } else {
            Err(RackError::DimensionMismatch(
                self.dims.rows,
                self.dims.cols,
                other.rows,
                other.cols,
            ))
        }
    }

    /// One-hot tensor encoding of shape `(n_t, n_r, n_c)`: channel
    /// `lambda - 1` is 1 exactly where the grid holds type `lambda`.
    pub fn encode_tensor<S: Scalar>(&self, tube_types: u8) -> Array3<S> {
        let mut t = Array3::zeros((tube_types as usize, self.dims.rows, self.dims.cols));
        for slot in self.dims.iter_slots() {
            let v = self.at(slot);
            if v != 0 {
                t[[v as usize - 1, slot.row, slot.col]] = S::one();
            }
        }
        t
    }
}
