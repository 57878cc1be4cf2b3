//! Double-Q TD loss with importance weights and the full training step.

use ndarray::{Array2, Array4, Axis};

use crate::rack::{acceptable_actions, ActionMask};
use crate::replay::Transition;
use crate::scalar::Scalar;

use super::d3qn::{backward, forward, forward_trace, masked_argmax};
use super::{AgentParams, QNetError};

/// Aligned tensors for one gradient step. Masks for the current states are
/// recomputed from the states themselves; next-state masks travel with the
/// transitions.
#[derive(Debug, Clone)]
pub struct TrainBatch<S> {
    pub states: Array4<S>,
    pub state_masks: Vec<ActionMask>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Array4<S>,
    pub next_masks: Vec<ActionMask>,
    pub terminal: Vec<bool>,
    pub weights: Vec<f64>,
}

impl<S: Scalar> TrainBatch<S> {
    pub fn from_transitions(
        transitions: &[Transition],
        weights: &[f64],
        tube_types: u8,
    ) -> Self {
        assert_eq!(transitions.len(), weights.len());
        assert!(!transitions.is_empty());
        let dims = transitions[0].state.dims();
        let b = transitions.len();
        let mut states = Array4::zeros((b, tube_types as usize, dims.rows, dims.cols));
        let mut next_states = states.clone();
        let mut state_masks = Vec::with_capacity(b);
        let mut actions = Vec::with_capacity(b);
        let mut rewards = Vec::with_capacity(b);
        let mut next_masks = Vec::with_capacity(b);
        let mut terminal = Vec::with_capacity(b);
        for (i, t) in transitions.iter().enumerate() {
            states
                .index_axis_mut(Axis(0), i)
                .assign(&t.state.encode_tensor::<S>(tube_types));
            next_states
                .index_axis_mut(Axis(0), i)
                .assign(&t.next_state.encode_tensor::<S>(tube_types));
            state_masks.push(acceptable_actions(&t.state));
            actions.push(t.action.index());
            rewards.push(t.reward);
            next_masks.push(t.next_mask.clone());
            terminal.push(t.terminal.is_terminal());
        }
        TrainBatch {
            states,
            state_masks,
            actions,
            rewards,
            next_states,
            next_masks,
            terminal,
            weights: weights.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

pub struct StepStats {
    pub loss: f64,
    pub td_errors: Vec<f64>,
}

struct TdEval<S: Scalar> {
    loss: f64,
    td_errors: Vec<f64>,
    q: Array2<S>,
    trace: super::d3qn::Trace<S>,
}

/// TD targets: `y = r` for terminal rows, otherwise
/// `y = r + gamma * Q_target(s', argmax over acceptable a' of Q_primary(s', a'))`.
/// The selection argmax runs on the primary net and the evaluation on the
/// target net. Per-sample errors are `Q(s, a) - y` and the loss is the mean
/// of `weight * error^2`.
fn td_eval<S: Scalar>(
    agent: &AgentParams<S>,
    batch: &TrainBatch<S>,
    gamma: f64,
) -> Result<TdEval<S>, QNetError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(QNetError::BadGamma(gamma));
    }
    let b = batch.len();
    if batch.state_masks.len() != b
        || batch.rewards.len() != b
        || batch.next_masks.len() != b
        || batch.terminal.len() != b
        || batch.weights.len() != b
    {
        return Err(QNetError::BatchShape(
            "batch field lengths disagree".into(),
        ));
    }
    for (row, (m, term)) in batch
        .next_masks
        .iter()
        .zip(&batch.terminal)
        .enumerate()
    {
        if !term && m.is_empty() {
            return Err(QNetError::EmptyMask { row });
        }
    }

    let (q, trace) = forward_trace(&agent.primary, &batch.states, &batch.state_masks)?;

    // evaluate next states only for the non-terminal rows
    let live: Vec<usize> = (0..b).filter(|&i| !batch.terminal[i]).collect();
    let mut targets = vec![0.0f64; b];
    if !live.is_empty() {
        let shape = batch.next_states.dim();
        let mut next = Array4::zeros((live.len(), shape.1, shape.2, shape.3));
        let mut masks = Vec::with_capacity(live.len());
        for (k, &i) in live.iter().enumerate() {
            next.index_axis_mut(Axis(0), k)
                .assign(&batch.next_states.index_axis(Axis(0), i));
            masks.push(batch.next_masks[i].clone());
        }
        let q_next_primary = forward(&agent.primary, &next, &masks)?;
        let q_next_target = forward(&agent.target, &next, &masks)?;
        for (k, &i) in live.iter().enumerate() {
            let sel = masked_argmax(q_next_primary.row(k), &masks[k])
                .expect("non-terminal masks are nonempty");
            targets[i] = gamma * q_next_target[[k, sel]].to_f64();
        }
    }

    let mut td_errors = Vec::with_capacity(b);
    let mut loss = 0.0f64;
    for i in 0..b {
        let qa = q[[i, batch.actions[i]]].to_f64();
        let y = batch.rewards[i] + targets[i];
        let delta = qa - y;
        td_errors.push(delta);
        loss += batch.weights[i] * delta * delta;
    }
    loss /= b as f64;

    Ok(TdEval {
        loss,
        td_errors,
        q,
        trace,
    })
}

/// Loss and per-sample TD errors for a batch.
pub fn td_loss<S: Scalar>(
    agent: &AgentParams<S>,
    batch: &TrainBatch<S>,
    gamma: f64,
) -> Result<(f64, Vec<f64>), QNetError> {
    td_eval(agent, batch, gamma).map(|e| (e.loss, e.td_errors))
}

/// Full training step: loss, exact reverse-mode gradients, one optimizer
/// update. A non-finite loss aborts before any mutation.
pub fn backward_and_step<S: Scalar>(
    agent: &mut AgentParams<S>,
    batch: &TrainBatch<S>,
    gamma: f64,
    lr: f64,
) -> Result<StepStats, QNetError> {
    let eval = td_eval(agent, batch, gamma)?;
    if !eval.loss.is_finite() {
        return Err(QNetError::NonFiniteLoss);
    }
    let b = batch.len();
    let mut dq = Array2::zeros(eval.q.dim());
    for i in 0..b {
        let scale = 2.0 * batch.weights[i] * eval.td_errors[i] / b as f64;
        dq[[i, batch.actions[i]]] = S::from_f64(scale);
    }
    let grads = backward(&agent.primary, &eval.trace, &dq);
    agent.opt.step(&mut agent.primary, &grads, lr);
    Ok(StepStats {
        loss: eval.loss,
        td_errors: eval.td_errors,
    })
}
