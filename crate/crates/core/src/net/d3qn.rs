//! Network composition: stem, residual blocks, dueling heads with the
//! masked-mean aggregation, and the matching reverse pass.

use ndarray::{Array1, Array2, Array4};

use crate::rack::ActionMask;
use crate::scalar::Scalar;

use super::layers::{
    conv_backward, conv_forward, elu_backward, elu_forward, flatten, linear_backward,
    linear_forward, unflatten,
};
use super::{NetParams, QNetError, BODY_ELU_ALPHA, STEM_ELU_ALPHA};

struct BlockTrace<S> {
    input_shape: (usize, usize, usize, usize),
    cols1: Array2<S>,
    z1: Array4<S>,
    y1: Array4<S>,
    cols2: Array2<S>,
}

/// Intermediate activations kept for the reverse pass.
pub struct Trace<S> {
    input_shape: (usize, usize, usize, usize),
    stem_cols: Array2<S>,
    stem_z: Array4<S>,
    stem_y: Array4<S>,
    blocks: Vec<BlockTrace<S>>,
    trunk_shape: (usize, usize, usize, usize),
    adv_cols: Array2<S>,
    adv_z: Array4<S>,
    adv_y: Array4<S>,
    val_cols: Array2<S>,
    val_z: Array4<S>,
    val_y: Array4<S>,
    value: Array1<S>,
    advantage: Array2<S>,
    masks: Vec<ActionMask>,
}

impl<S: Scalar> Trace<S> {
    /// State values of the forward batch.
    pub fn value(&self) -> &Array1<S> {
        &self.value
    }

    /// Raw advantage head output before the masked centering.
    pub fn advantage(&self) -> &Array2<S> {
        &self.advantage
    }
}

fn check_masks<S: Scalar>(
    params: &NetParams<S>,
    batch: usize,
    masks: &[ActionMask],
) -> Result<(), QNetError> {
    if masks.len() != batch {
        return Err(QNetError::BatchShape(format!(
            "{} masks for a batch of {batch}",
            masks.len()
        )));
    }
    let expected = params.config().action_count();
    for (row, m) in masks.iter().enumerate() {
        if m.len() != expected {
            return Err(QNetError::MaskWidth {
                got: m.len(),
                expected,
            });
        }
        if m.is_empty() {
            return Err(QNetError::EmptyMask { row });
        }
    }
    Ok(())
}

/// Full forward pass with trace. `Q(s, a) = V(s) + A(s, a) - mean(A over the
/// acceptable actions of s)`; the returned Q covers every action, masked-out
/// entries gain the minus-infinity sentinel only at selection time.
pub fn forward_trace<S: Scalar>(
    params: &NetParams<S>,
    states: &Array4<S>,
    masks: &[ActionMask],
) -> Result<(Array2<S>, Trace<S>), QNetError> {
    let (b, _c, _h, _w) = states.dim();
    check_masks(params, b, masks)?;

    let (stem_z, stem_cols) = conv_forward(states, &params.stem);
    let stem_y = elu_forward(&stem_z, STEM_ELU_ALPHA);

    let mut trunk = stem_y.clone();
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for (c1, c2) in &params.blocks {
        let input_shape = trunk.dim();
        let (z1, cols1) = conv_forward(&trunk, c1);
        let y1 = elu_forward(&z1, BODY_ELU_ALPHA);
        let (z2, cols2) = conv_forward(&y1, c2);
        let out = &trunk + &z2;
        blocks.push(BlockTrace {
            input_shape,
            cols1,
            z1,
            y1,
            cols2,
        });
        trunk = out;
    }
    let trunk_shape = trunk.dim();

    let (adv_z, adv_cols) = conv_forward(&trunk, &params.adv_conv);
    let adv_y = elu_forward(&adv_z, BODY_ELU_ALPHA);
    let advantage = linear_forward(&flatten(&adv_y), &params.adv_fc);

    let (val_z, val_cols) = conv_forward(&trunk, &params.val_conv);
    let val_y = elu_forward(&val_z, BODY_ELU_ALPHA);
    let value = linear_forward(&flatten(&val_y), &params.val_fc)
        .column(0)
        .to_owned();

    let q = dueling_q(&value, &advantage, masks);
    let trace = Trace {
        input_shape: states.dim(),
        stem_cols,
        stem_z,
        stem_y,
        blocks,
        trunk_shape,
        adv_cols,
        adv_z,
        adv_y,
        val_cols,
        val_z,
        val_y,
        value,
        advantage,
        masks: masks.to_vec(),
    };
    Ok((q, trace))
}

/// Forward pass without keeping the trace.
pub fn forward<S: Scalar>(
    params: &NetParams<S>,
    states: &Array4<S>,
    masks: &[ActionMask],
) -> Result<Array2<S>, QNetError> {
    forward_trace(params, states, masks).map(|(q, _)| q)
}

fn dueling_q<S: Scalar>(value: &Array1<S>, adv: &Array2<S>, masks: &[ActionMask]) -> Array2<S> {
    let (b, a) = adv.dim();
    let mut q = Array2::zeros((b, a));
    for row in 0..b {
        let mask = &masks[row];
        let count = S::from_f64(mask.count() as f64);
        let mut mean = S::zero();
        for idx in mask.iter_ones() {
            mean += adv[[row, idx]];
        }
        mean /= count;
        let base = value[row] - mean;
        for col in 0..a {
            q[[row, col]] = base + adv[[row, col]];
        }
    }
    q
}

/// Reverse pass: gradient of a scalar loss with respect to every weight,
/// given the loss gradient on the Q outputs.
pub fn backward<S: Scalar>(
    params: &NetParams<S>,
    trace: &Trace<S>,
    dq: &Array2<S>,
) -> NetParams<S> {
    let mut grads = NetParams::zeros(*params.config());
    let (b, a) = dq.dim();

    // dueling aggregation: dV[b] = sum_a dQ; dA[b,a] = dQ[b,a] - 1[a in
    // mask] * sum_a dQ / |mask|
    let mut dv = Array2::zeros((b, 1));
    let mut dadv = dq.clone();
    for row in 0..b {
        let mask = &trace.masks[row];
        let mut total = S::zero();
        for col in 0..a {
            total += dq[[row, col]];
        }
        dv[[row, 0]] = total;
        let share = total / S::from_f64(mask.count() as f64);
        for idx in mask.iter_ones() {
            dadv[[row, idx]] -= share;
        }
    }

    // advantage head
    let adv_flat = flatten(&trace.adv_y);
    let (dw, db, dflat) = linear_backward(&params.adv_fc, &adv_flat, &dadv);
    grads.adv_fc.weight = dw;
    grads.adv_fc.bias = db;
    let dady = unflatten(&dflat, trace.adv_y.dim());
    let dadz = elu_backward(&trace.adv_z, &trace.adv_y, &dady, BODY_ELU_ALPHA);
    let (dw, db, mut dtrunk) =
        conv_backward(&params.adv_conv, &trace.adv_cols, &dadz, trace.trunk_shape);
    grads.adv_conv.weight = dw;
    grads.adv_conv.bias = db;

    // value head
    let val_flat = flatten(&trace.val_y);
    let (dw, db, dflat) = linear_backward(&params.val_fc, &val_flat, &dv);
    grads.val_fc.weight = dw;
    grads.val_fc.bias = db;
    let dvaly = unflatten(&dflat, trace.val_y.dim());
    let dvalz = elu_backward(&trace.val_z, &trace.val_y, &dvaly, BODY_ELU_ALPHA);
    let (dw, db, dtrunk_v) =
        conv_backward(&params.val_conv, &trace.val_cols, &dvalz, trace.trunk_shape);
    grads.val_conv.weight = dw;
    grads.val_conv.bias = db;
    dtrunk += &dtrunk_v;

    // residual blocks, reversed: out = input + conv2(elu(conv1(input)))
    for (i, (c1, c2)) in params.blocks.iter().enumerate().rev() {
        let bt = &trace.blocks[i];
        let (dw2, db2, dy1) = conv_backward(c2, &bt.cols2, &dtrunk, bt.y1.dim());
        let dz1 = elu_backward(&bt.z1, &bt.y1, &dy1, BODY_ELU_ALPHA);
        let (dw1, db1, dinput) = conv_backward(c1, &bt.cols1, &dz1, bt.input_shape);
        grads.blocks[i].0.weight = dw1;
        grads.blocks[i].0.bias = db1;
        grads.blocks[i].1.weight = dw2;
        grads.blocks[i].1.bias = db2;
        // skip connection adds straight through
        dtrunk += &dinput;
    }

    // stem
    let dstem_z = elu_backward(&trace.stem_z, &trace.stem_y, &dtrunk, STEM_ELU_ALPHA);
    let (dw, db, _dx) = conv_backward(&params.stem, &trace.stem_cols, &dstem_z, trace.input_shape);
    grads.stem.weight = dw;
    grads.stem.bias = db;
    grads
}

/// Greedy action over the acceptable set: masked-out actions act as a
/// minus-infinity sentinel. Ties break toward the lowest index; `None` for
/// an empty mask.
pub fn masked_argmax<S: Scalar>(q_row: ndarray::ArrayView1<'_, S>, mask: &ActionMask) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for idx in mask.iter_ones() {
        let v = q_row[idx];
        match best {
            Some((_, bv)) if bv >= v => {}
            _ => best = Some((idx, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Q values with the minus-infinity sentinel written over masked-out
/// actions.
pub fn masked_q_values<S: Scalar>(q: &Array2<S>, masks: &[ActionMask]) -> Array2<S> {
    let mut out = q.clone();
    for (row, mask) in masks.iter().enumerate() {
        for col in 0..q.dim().1 {
            if !mask.get(col) {
                out[[row, col]] = S::neg_infinity();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetConfig;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn tiny_config() -> NetConfig {
        NetConfig {
            tube_types: 2,
            rows: 3,
            cols: 4,
            stem_channels: 6,
            residual_blocks: 2,
            advantage_channels: 4,
            value_channels: 3,
        }
    }

    fn random_batch(
        cfg: &NetConfig,
        b: usize,
        seed: u64,
    ) -> (Array4<f64>, Vec<ActionMask>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let x = Array4::from_shape_fn((b, cfg.tube_types, cfg.rows, cfg.cols), |_| {
            if rng.random::<f64>() < 0.3 {
                1.0
            } else {
                0.0
            }
        });
        let masks = (0..b)
            .map(|_| {
                let mut m = ActionMask::new(cfg.action_count());
                for i in 0..cfg.action_count() {
                    if rng.random::<f64>() < 0.25 {
                        m.set(i);
                    }
                }
                if m.is_empty() {
                    m.set(rng.random_range(0..cfg.action_count()));
                }
                m
            })
            .collect();
        (x, masks)
    }

    #[test]
    fn masked_mean_of_centered_advantage_is_zero() {
        let cfg = tiny_config();
        let params = NetParams::<f64>::init(cfg, &mut StdRng::seed_from_u64(3));
        let (x, masks) = random_batch(&cfg, 16, 4);
        let (q, trace) = forward_trace(&params, &x, &masks).unwrap();
        for row in 0..16 {
            let v = trace.value()[row];
            let mask = &masks[row];
            let mean: f64 = mask.iter_ones().map(|i| q[[row, i]] - v).sum::<f64>()
                / mask.count() as f64;
            assert!(mean.abs() < 1e-12, "row {row} mean {mean}");
        }
    }

    #[test]
    fn single_acceptable_action_pins_q_to_v() {
        let cfg = tiny_config();
        let params = NetParams::<f64>::init(cfg, &mut StdRng::seed_from_u64(5));
        let (x, _) = random_batch(&cfg, 1, 6);
        let mut mask = ActionMask::new(cfg.action_count());
        mask.set(13);
        let (q, trace) = forward_trace(&params, &x, &[mask]).unwrap();
        assert!((q[[0, 13]] - trace.value()[0]).abs() < 1e-12);
    }

    #[test]
    fn forward_is_reproducible_bit_for_bit() {
        let cfg = tiny_config();
        let params = NetParams::<f32>::init(cfg, &mut StdRng::seed_from_u64(7));
        let (x, masks) = random_batch(&cfg, 4, 8);
        let x32 = x.mapv(|v| v as f32);
        let q1 = forward(&params, &x32, &masks).unwrap();
        let q2 = forward(&params, &x32, &masks).unwrap();
        assert_eq!(q1, q2);
        // and across a re-initialized identical network
        let params_again = NetParams::<f32>::init(cfg, &mut StdRng::seed_from_u64(7));
        let q3 = forward(&params_again, &x32, &masks).unwrap();
        assert_eq!(q1, q3);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let cfg = tiny_config();
        let params = NetParams::<f64>::init(cfg, &mut StdRng::seed_from_u64(9));
        let (x, mut masks) = random_batch(&cfg, 2, 10);
        masks[1] = ActionMask::new(cfg.action_count());
        assert!(matches!(
            forward(&params, &x, &masks),
            Err(QNetError::EmptyMask { row: 1 })
        ));
    }

    #[test]
    fn masked_argmax_ignores_higher_raw_values() {
        let cfg = tiny_config();
        let params = NetParams::<f64>::init(cfg, &mut StdRng::seed_from_u64(11));
        let (x, _) = random_batch(&cfg, 1, 12);
        let full = {
            let mut m = ActionMask::new(cfg.action_count());
            for i in 0..cfg.action_count() {
                m.set(i);
            }
            m
        };
        let q = forward(&params, &x, &[full.clone()]).unwrap();
        let raw_best = masked_argmax(q.row(0), &full).unwrap();
        let mut masked = full.clone();
        masked.clear(raw_best);
        let chosen = masked_argmax(q.row(0), &masked).unwrap();
        assert_ne!(chosen, raw_best);
        assert!(masked.get(chosen));
        let sentinel = masked_q_values(&q, &[masked]);
        assert_eq!(sentinel[[0, raw_best]], f64::NEG_INFINITY);
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        // reduced architecture at 64-bit: perturb a sample of weights in
        // every array and compare against the analytic reverse pass
        let cfg = tiny_config();
        let mut params = NetParams::<f64>::init(cfg, &mut StdRng::seed_from_u64(13));
        let (x, masks) = random_batch(&cfg, 3, 14);

        // scalar loss: weighted sum of Q over a fixed probe matrix
        let probe = Array2::from_shape_fn((3, cfg.action_count()), |(i, j)| {
            ((i * 31 + j * 17) % 7) as f64 * 0.25 - 0.75
        });
        let loss_of = |p: &NetParams<f64>| -> f64 {
            let q = forward(p, &x, &masks).unwrap();
            (&q * &probe).sum()
        };

        let (_, trace) = forward_trace(&params, &x, &masks).unwrap();
        let grads = backward(&params, &trace, &probe);

        let eps = 1e-6;
        let mut rng = StdRng::seed_from_u64(15);
        let n_arrays = grads.param_slices().len();
        for slot in 0..n_arrays {
            let len = grads.param_slices()[slot].len();
            for _ in 0..4.min(len) {
                let idx = rng.random_range(0..len);
                let analytic = grads.param_slices()[slot][idx];
                let orig = params.param_slices()[slot][idx];
                params.param_slices_mut()[slot][idx] = orig + eps;
                let up = loss_of(&params);
                params.param_slices_mut()[slot][idx] = orig - eps;
                let down = loss_of(&params);
                params.param_slices_mut()[slot][idx] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic - numeric).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "array {slot} index {idx}: analytic {analytic} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }
}
