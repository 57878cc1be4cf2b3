//! Binary sum tree over leaf priorities for proportional sampling.

/// Complete binary tree stored as an array; internal nodes hold the sum of
/// their children. Parents are recomputed from both children on update, so
/// the root stays consistent with the leaves instead of accumulating
/// difference-propagation drift.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        SumTree {
            capacity,
            nodes: vec![0.0; 2 * capacity.next_power_of_two()],
        }
    }

    fn leaf_base(&self) -> usize {
        self.capacity.next_power_of_two()
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn leaf(&self, index: usize) -> f64 {
        debug_assert!(index < self.capacity);
        self.nodes[self.leaf_base() + index]
    }

    pub fn set(&mut self, index: usize, priority: f64) {
        debug_assert!(index < self.capacity);
        debug_assert!(priority >= 0.0 && priority.is_finite());
        let mut i = self.leaf_base() + index;
        self.nodes[i] = priority;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Find the leaf whose cumulative priority interval contains `prefix`.
    /// `prefix` outside `[0, total)` clamps to the nearest end.
    pub fn find(&self, prefix: f64) -> usize {
        let mut remaining = prefix.max(0.0);
        let mut i = 1usize;
        let base = self.leaf_base();
        while i < base {
            let left = 2 * i;
            if remaining < self.nodes[left] || self.nodes[left + 1] == 0.0 {
                i = left;
            } else {
                remaining -= self.nodes[left];
                i = left + 1;
            }
        }
        (i - base).min(self.capacity - 1)
    }
}
