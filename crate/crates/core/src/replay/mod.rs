//! Centralized prioritized replay buffer with proportional sampling.
//!
//! Transitions enter with the maximum priority seen so far and are resampled
//! in proportion to `(|td_error| + eps)^alpha`. Importance weights correct
//! the sampling bias with an annealed exponent. The buffer has one owner;
//! workers interact with it through the training pipeline's channels.

mod sum_tree;

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rack::{
    acceptable_actions, ActionMask, RackError, RackState, SwapAction, TerminalKind,
};
use crate::rack::text::{parse_state, write_state};
use sum_tree::SumTree;

/// One environment step as stored for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: RackState,
    pub action: SwapAction,
    pub reward: f64,
    pub next_state: RackState,
    pub terminal: TerminalKind,
    pub next_mask: ActionMask,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay buffer is empty")]
    Empty,
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Rack(#[from] RackError),
}

/// Buffer hyperparameters; defaults follow the canonical proportional
/// prioritization values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_anneal_steps: u64,
    pub epsilon: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            capacity: 200_000,
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            beta_anneal_steps: 100_000,
            epsilon: 1e-3,
        }
    }
}

impl ReplayConfig {
    /// Importance exponent at a learner step, annealed linearly.
    pub fn beta_at(&self, step: u64) -> f64 {
        if self.beta_anneal_steps == 0 {
            return self.beta_end;
        }
        let frac = (step as f64 / self.beta_anneal_steps as f64).min(1.0);
        self.beta_start + (self.beta_end - self.beta_start) * frac
    }
}

/// Identifies a stored transition; the tag detects slots that were
/// overwritten between sampling and the priority update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotId {
    pub index: usize,
    pub tag: u64,
}

/// A sampled training batch before tensor encoding.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub transitions: Vec<Transition>,
    pub weights: Vec<f64>,
    pub slots: Vec<SlotId>,
}

pub struct PrioritizedBuffer {
    config: ReplayConfig,
    items: Vec<Option<Transition>>,
    tags: Vec<u64>,
    tree: SumTree,
    next: usize,
    size: usize,
    next_tag: u64,
    /// largest raw |td| magnitude seen; new transitions enter at this level
    max_priority: f64,
}

impl PrioritizedBuffer {
    pub fn new(config: ReplayConfig) -> Self {
        let capacity = config.capacity.max(1);
        PrioritizedBuffer {
            items: vec![None; capacity],
            tags: vec![0; capacity],
            tree: SumTree::new(capacity),
            next: 0,
            size: 0,
            next_tag: 1,
            max_priority: 1.0,
            config,
        }
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.items.len()
    }

    fn stored_priority(&self, raw: f64) -> f64 {
        (raw.abs() + self.config.epsilon).powf(self.config.alpha)
    }

    /// Insert a transition, evicting the oldest once full. Without an
    /// explicit priority the max seen so far is used so new data gets
    /// sampled soon.
    pub fn push(&mut self, transition: Transition, initial_priority: Option<f64>) -> SlotId {
        let raw = initial_priority.unwrap_or(self.max_priority);
        self.max_priority = self.max_priority.max(raw);
        let index = self.next;
        self.items[index] = Some(transition);
        self.tags[index] = self.next_tag;
        self.tree.set(index, self.stored_priority(raw));
        let id = SlotId {
            index,
            tag: self.next_tag,
        };
        self.next_tag += 1;
        self.next = (self.next + 1) % self.items.len();
        self.size = (self.size + 1).min(self.items.len());
        id
    }

    /// Stratified proportional sample: the priority mass is cut into
    /// `batch_size` equal segments and one point is drawn per segment.
    /// Importance weights are `(N * P(i))^-beta`, normalized by the batch
    /// maximum into `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<SampleBatch, ReplayError> {
        if self.size == 0 {
            return Err(ReplayError::Empty);
        }
        let total = self.tree.total();
        debug_assert!(total > 0.0);
        let segment = total / batch_size as f64;
        let n = self.size as f64;

        let mut transitions = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        let mut slots = Vec::with_capacity(batch_size);
        for k in 0..batch_size {
            let u = segment * (k as f64 + rng.random::<f64>());
            let index = self.tree.find(u);
            let item = self.items[index]
                .as_ref()
                .expect("sampled leaf holds a transition");
            let p = self.tree.leaf(index) / total;
            let w = (n * p).powf(-beta);
            transitions.push(item.clone());
            weights.push(w);
            slots.push(SlotId {
                index,
                tag: self.tags[index],
            });
        }
        let w_max = weights.iter().cloned().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= w_max;
        }
        Ok(SampleBatch {
            transitions,
            weights,
            slots,
        })
    }

    /// Reprioritize sampled slots from fresh TD errors. Slots overwritten
    /// since sampling are skipped.
    pub fn update_priorities(&mut self, slots: &[SlotId], td_errors: &[f64]) {
        debug_assert_eq!(slots.len(), td_errors.len());
        for (slot, &td) in slots.iter().zip(td_errors) {
            if self.tags[slot.index] != slot.tag {
                continue;
            }
            let raw = td.abs();
            self.max_priority = self.max_priority.max(raw);
            self.tree.set(slot.index, self.stored_priority(raw));
        }
    }

    /// Raw stored priority of a slot (testing and diagnostics).
    pub fn priority_of(&self, index: usize) -> f64 {
        self.tree.leaf(index)
    }

    pub fn tree_total(&self) -> f64 {
        self.tree.total()
    }

    /// Write the buffer to disk: a header, the priority array, then each
    /// transition with its states in the rack text encoding. Masks are
    /// recomputed from the next states on load.
    pub fn save_snapshot(&self, path: &Path, tube_types: u8) -> Result<(), ReplayError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            f,
            "rackplan-replay v1 capacity={} size={} next={} next_tag={} max_priority={} types={}",
            self.capacity(),
            self.size,
            self.next,
            self.next_tag,
            self.max_priority,
            tube_types
        )?;
        for index in 0..self.size {
            let t = self.items[index].as_ref().expect("within size");
            writeln!(
                f,
                "transition tag={} priority={} from={},{} to={},{} reward={} terminal={}",
                self.tags[index],
                self.tree.leaf(index),
                t.action.slot_a().row,
                t.action.slot_a().col,
                t.action.slot_b().row,
                t.action.slot_b().col,
                t.reward,
                match t.terminal {
                    TerminalKind::NonTerminal => "none",
                    TerminalKind::Goal => "goal",
                    TerminalKind::Deadlock => "deadlock",
                }
            )?;
            f.write_all(write_state(&t.state, tube_types).as_bytes())?;
            f.write_all(write_state(&t.next_state, tube_types).as_bytes())?;
        }
        Ok(())
    }

    pub fn load_snapshot(path: &Path, config: ReplayConfig) -> Result<Self, ReplayError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| ReplayError::Format("empty snapshot".into()))??;
        let fields = parse_kv(&header, "rackplan-replay v1")?;
        let capacity: usize = get_field(&fields, "capacity")?;
        let size: usize = get_field(&fields, "size")?;
        let next: usize = get_field(&fields, "next")?;
        let next_tag: u64 = get_field(&fields, "next_tag")?;
        let max_priority: f64 = get_field(&fields, "max_priority")?;

        let mut config = config;
        config.capacity = capacity;
        let mut buf = PrioritizedBuffer::new(config);
        buf.size = size;
        buf.next = next;
        buf.next_tag = next_tag;
        buf.max_priority = max_priority;

        for index in 0..size {
            let head = lines
                .next()
                .ok_or_else(|| ReplayError::Format("truncated snapshot".into()))??;
            let fields = parse_kv(&head, "transition")?;
            let tag: u64 = get_field(&fields, "tag")?;
            let priority: f64 = get_field(&fields, "priority")?;
            let from = parse_slot(&get_field::<String>(&fields, "from")?)?;
            let to = parse_slot(&get_field::<String>(&fields, "to")?)?;
            let reward: f64 = get_field(&fields, "reward")?;
            let terminal = match get_field::<String>(&fields, "terminal")?.as_str() {
                "none" => TerminalKind::NonTerminal,
                "goal" => TerminalKind::Goal,
                "deadlock" => TerminalKind::Deadlock,
                other => {
                    return Err(ReplayError::Format(format!("bad terminal {other:?}")))
                }
            };
            let state_text = read_block(&mut lines)?;
            let (state, _) = parse_state(&state_text)?;
            let next_text = read_block(&mut lines)?;
            let (next_state, _) = parse_state(&next_text)?;
            let action = SwapAction::encode(state.dims(), from, to)?;
            let next_mask = acceptable_actions(&next_state);
            buf.items[index] = Some(Transition {
                state,
                action,
                reward,
                next_state,
                terminal,
                next_mask,
            });
            buf.tags[index] = tag;
            buf.tree.set(index, priority);
        }
        Ok(buf)
    }
}

fn parse_slot(text: &str) -> Result<crate::rack::Slot, ReplayError> {
    let (r, c) = text
        .split_once(',')
        .ok_or_else(|| ReplayError::Format(format!("bad slot {text:?}")))?;
    Ok(crate::rack::Slot::new(
        r.parse()
            .map_err(|_| ReplayError::Format(format!("bad slot row {r:?}")))?,
        c.parse()
            .map_err(|_| ReplayError::Format(format!("bad slot col {c:?}")))?,
    ))
}

fn parse_kv(line: &str, expected_prefix: &str) -> Result<Vec<(String, String)>, ReplayError> {
    if !line.starts_with(expected_prefix) {
        return Err(ReplayError::Format(format!(
            "expected line starting with {expected_prefix:?}, got {line:?}"
        )));
    }
    Ok(line[expected_prefix.len()..]
        .split_whitespace()
        .filter_map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect())
}

fn get_field<T: std::str::FromStr>(
    fields: &[(String, String)],
    key: &str,
) -> Result<T, ReplayError> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| ReplayError::Format(format!("missing field {key:?}")))?;
    raw.parse()
        .map_err(|_| ReplayError::Format(format!("bad value for {key:?}: {raw:?}")))
}

/// Read a `rows cols types` header plus its grid rows.
fn read_block(
    lines: &mut std::io::Lines<BufReader<std::fs::File>>,
) -> Result<String, ReplayError> {
    let header = lines
        .next()
        .ok_or_else(|| ReplayError::Format("truncated state block".into()))??;
    let rows: usize = header
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ReplayError::Format(format!("bad state header {header:?}")))?;
    let mut block = header;
    block.push('\n');
    for _ in 0..rows {
        let row = lines
            .next()
            .ok_or_else(|| ReplayError::Format("truncated state rows".into()))??;
        block.push_str(&row);
        block.push('\n');
    }
    Ok(block)
}
