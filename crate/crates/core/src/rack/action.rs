//! Swap actions and their one-hot index encoding, plus bit masks over the
//! action space.

use super::types::{Dims, Slot};
use super::RackError;

/// An unordered pair of distinct slots exchanging a tube with an empty slot.
///
/// The pair is stored in canonical order (row-major smaller slot first) and
/// carries its one-hot index in `[0, m(m-1)/2)` where `m` is the slot count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwapAction {
    slot_a: Slot,
    slot_b: Slot,
    index: usize,
}

impl SwapAction {
    /// Encode a slot pair as a canonical action. Fails on out-of-bounds or
    /// identical slots.
    pub fn encode(dims: Dims, s1: Slot, s2: Slot) -> Result<Self, RackError> {
        dims.check_slot(s1)?;
        dims.check_slot(s2)?;
        let (f1, f2) = (dims.flatten(s1), dims.flatten(s2));
        if f1 == f2 {
            return Err(RackError::IdenticalSlots);
        }
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        Ok(SwapAction {
            slot_a: dims.unflatten(lo),
            slot_b: dims.unflatten(hi),
            index: pair_to_index(dims.slots(), lo, hi),
        })
    }

    /// Decode a one-hot index back into the canonical slot pair.
    pub fn decode(dims: Dims, index: usize) -> Result<Self, RackError> {
        let count = dims.action_count();
        if index >= count {
            return Err(RackError::ActionIndexOutOfRange { index, count });
        }
        let (lo, hi) = index_to_pair(dims.slots(), index);
        Ok(SwapAction {
            slot_a: dims.unflatten(lo),
            slot_b: dims.unflatten(hi),
            index,
        })
    }

    /// Assemble from already-canonical parts; used by the acceptability
    /// visitors which enumerate pairs in index order.
    pub(crate) fn from_parts_unchecked(slot_a: Slot, slot_b: Slot, index: usize) -> Self {
        SwapAction {
            slot_a,
            slot_b,
            index,
        }
    }

    pub fn slot_a(&self) -> Slot {
        self.slot_a
    }

    pub fn slot_b(&self) -> Slot {
        self.slot_b
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

impl std::fmt::Display for SwapAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "swap[{} <-> {}]", self.slot_a, self.slot_b)
    }
}

/// Lexicographic index of the pair `(lo, hi)`, `0 <= lo < hi < m`.
fn pair_to_index(m: usize, lo: usize, hi: usize) -> usize {
    lo * m - lo * (lo + 1) / 2 + (hi - lo - 1)
}

fn index_to_pair(m: usize, index: usize) -> (usize, usize) {
    let mut remaining = index;
    for lo in 0..m - 1 {
        let row = m - 1 - lo;
        if remaining < row {
            return (lo, lo + 1 + remaining);
        }
        remaining -= row;
    }
    unreachable!("index checked against action count")
}

/// A bit vector over the action space; bit `i` set means the action with
/// index `i` belongs to the represented set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask {
    words: Vec<u64>,
    len: usize,
}

impl ActionMask {
    pub fn new(len: usize) -> Self {
        ActionMask {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn for_dims(dims: Dims) -> Self {
        Self::new(dims.action_count())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn set(&mut self, index: usize) {
        debug_assert!(index < self.len);
        self.words[index / 64] |= 1 << (index % 64);
    }

    pub fn clear(&mut self, index: usize) {
        debug_assert!(index < self.len);
        self.words[index / 64] &= !(1 << (index % 64));
    }

    pub fn get(&self, index: usize) -> bool {
        debug_assert!(index < self.len);
        self.words[index / 64] & (1 << (index % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Intersection with another mask of the same length.
    pub fn and(&self, other: &ActionMask) -> ActionMask {
        assert_eq!(self.len, other.len, "mask lengths must match");
        ActionMask {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
            len: self.len,
        }
    }

    /// Iterate the indices of set bits in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let base = wi * 64;
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let tz = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(base + tz)
                }
            })
        })
    }
}
