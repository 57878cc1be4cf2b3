//! The dueling double deep-Q function: convolutional trunk with residual
//! blocks, masked dueling aggregation, TD loss with importance weights,
//! adaptive-moment optimizer, soft target updates, and checkpoints.
//!
//! Weights are generic over [`Scalar`]: `f32` for training, `f64` for the
//! finite-difference gradient checks.

mod adam;
mod checkpoint;
mod d3qn;
mod layers;
mod loss;

pub use adam::{soft_update, AdamState};
pub use checkpoint::{load_checkpoint, peek_config, save_checkpoint};
pub use d3qn::{forward, forward_trace, masked_argmax, masked_q_values, Trace};
pub use loss::{backward_and_step, td_loss, StepStats, TrainBatch};

use ndarray::{Array1, Array2, Array4};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum QNetError {
    #[error("acceptability mask is empty for non-terminal batch row {row}")]
    EmptyMask { row: usize },
    #[error("mask width {got} does not match the action space width {expected}")]
    MaskWidth { got: usize, expected: usize },
    #[error("batch sizes disagree: {0}")]
    BatchShape(String),
    #[error("discount factor must lie in [0, 1), got {0}")]
    BadGamma(f64),
    #[error("non-finite loss; optimizer step aborted and batch flagged")]
    NonFiniteLoss,
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("checkpoint truncated: expected {expected} more bytes")]
    Truncated { expected: usize },
    #[error("checkpoint holds trailing bytes beyond the declared layout")]
    TrailingData,
}

/// Architecture hyperparameters. The channel and block counts default to the
/// fixed production sizes; rack dimensions parameterize the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub tube_types: usize,
    pub rows: usize,
    pub cols: usize,
    pub stem_channels: usize,
    pub residual_blocks: usize,
    pub advantage_channels: usize,
    pub value_channels: usize,
}

impl NetConfig {
    /// The production architecture: 48 stem filters, 6 residual blocks, and
    /// 30/10 channel heads.
    pub fn standard(tube_types: usize, rows: usize, cols: usize) -> Self {
        NetConfig {
            tube_types,
            rows,
            cols,
            stem_channels: 48,
            residual_blocks: 6,
            advantage_channels: 30,
            value_channels: 10,
        }
    }

    pub fn dims(&self) -> crate::rack::Dims {
        crate::rack::Dims::new(self.rows, self.cols)
    }

    /// Width of the advantage head output.
    pub fn action_count(&self) -> usize {
        self.dims().action_count()
    }

    pub fn spatial(&self) -> usize {
        self.rows * self.cols
    }
}

/// ELU slope used by the stem activation.
pub(crate) const STEM_ELU_ALPHA: f64 = 0.1;
/// ELU slope used everywhere else.
pub(crate) const BODY_ELU_ALPHA: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    pub weight: Array4<S>, // (out, in, k, k)
    pub bias: Array1<S>,
    pub kernel: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
pub struct Linear<S> {
    pub weight: Array2<S>, // (out, in)
    pub bias: Array1<S>,
}

/// All weights of one network.
#[derive(Debug, Clone)]
pub struct NetParams<S> {
    config: NetConfig,
    pub stem: Conv2d<S>,
    pub blocks: Vec<(Conv2d<S>, Conv2d<S>)>,
    pub adv_conv: Conv2d<S>,
    pub adv_fc: Linear<S>,
    pub val_conv: Conv2d<S>,
    pub val_fc: Linear<S>,
}

fn uniform_fan_in<S: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Vec<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..shape.iter().product::<usize>())
        .map(|_| S::from_f64(rng.random_range(-bound..bound)))
        .collect()
}

fn conv_init<S: Scalar, R: Rng + ?Sized>(
    c_out: usize,
    c_in: usize,
    k: usize,
    pad: usize,
    rng: &mut R,
) -> Conv2d<S> {
    let fan_in = c_in * k * k;
    let weight = Array4::from_shape_vec(
        (c_out, c_in, k, k),
        uniform_fan_in(&[c_out, c_in, k, k], fan_in, rng),
    )
    .expect("shape matches");
    let bias = Array1::from_vec(uniform_fan_in(&[c_out], fan_in, rng));
    Conv2d {
        weight,
        bias,
        kernel: k,
        pad,
    }
}

fn conv_zeros<S: Scalar>(c_out: usize, c_in: usize, k: usize, pad: usize) -> Conv2d<S> {
    Conv2d {
        weight: Array4::zeros((c_out, c_in, k, k)),
        bias: Array1::zeros(c_out),
        kernel: k,
        pad,
    }
}

fn linear_init<S: Scalar, R: Rng + ?Sized>(
    out: usize,
    input: usize,
    rng: &mut R,
) -> Linear<S> {
    Linear {
        weight: Array2::from_shape_vec((out, input), uniform_fan_in(&[out, input], input, rng))
            .expect("shape matches"),
        bias: Array1::from_vec(uniform_fan_in(&[out], input, rng)),
    }
}

impl<S: Scalar> NetParams<S> {
    /// Fan-in-scaled uniform initialization, fully determined by the rng.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let c = config.stem_channels;
        let stem = conv_init(c, config.tube_types, 3, 1, rng);
        let blocks = (0..config.residual_blocks)
            .map(|_| (conv_init(c, c, 3, 1, rng), conv_init(c, c, 3, 1, rng)))
            .collect();
        let adv_conv = conv_init(config.advantage_channels, c, 1, 0, rng);
        let val_conv = conv_init(config.value_channels, c, 1, 0, rng);
        let adv_fc = linear_init(
            config.action_count(),
            config.advantage_channels * config.spatial(),
            rng,
        );
        let val_fc = linear_init(1, config.value_channels * config.spatial(), rng);
        NetParams {
            config,
            stem,
            blocks,
            adv_conv,
            adv_fc,
            val_conv,
            val_fc,
        }
    }

    /// A same-shaped parameter holder filled with zeros (gradients, moments).
    pub fn zeros(config: NetConfig) -> Self {
        let c = config.stem_channels;
        NetParams {
            config,
            stem: conv_zeros(c, config.tube_types, 3, 1),
            blocks: (0..config.residual_blocks)
                .map(|_| (conv_zeros(c, c, 3, 1), conv_zeros(c, c, 3, 1)))
                .collect(),
            adv_conv: conv_zeros(config.advantage_channels, c, 1, 0),
            adv_fc: Linear {
                weight: Array2::zeros((
                    config.action_count(),
                    config.advantage_channels * config.spatial(),
                )),
                bias: Array1::zeros(config.action_count()),
            },
            val_conv: conv_zeros(config.value_channels, c, 1, 0),
            val_fc: Linear {
                weight: Array2::zeros((1, config.value_channels * config.spatial())),
                bias: Array1::zeros(1),
            },
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    /// Flat views over every parameter array in the fixed serialization
    /// order. Arrays are owned and standard layout throughout, so the slice
    /// views always exist.
    pub fn param_slices(&self) -> Vec<&[S]> {
        let mut v: Vec<&[S]> = Vec::new();
        v.push(self.stem.weight.as_slice().unwrap());
        v.push(self.stem.bias.as_slice().unwrap());
        for (c1, c2) in &self.blocks {
            v.push(c1.weight.as_slice().unwrap());
            v.push(c1.bias.as_slice().unwrap());
            v.push(c2.weight.as_slice().unwrap());
            v.push(c2.bias.as_slice().unwrap());
        }
        v.push(self.adv_conv.weight.as_slice().unwrap());
        v.push(self.adv_conv.bias.as_slice().unwrap());
        v.push(self.adv_fc.weight.as_slice().unwrap());
        v.push(self.adv_fc.bias.as_slice().unwrap());
        v.push(self.val_conv.weight.as_slice().unwrap());
        v.push(self.val_conv.bias.as_slice().unwrap());
        v.push(self.val_fc.weight.as_slice().unwrap());
        v.push(self.val_fc.bias.as_slice().unwrap());
        v
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut v: Vec<&mut [S]> = Vec::new();
        v.push(self.stem.weight.as_slice_mut().unwrap());
        v.push(self.stem.bias.as_slice_mut().unwrap());
        for (c1, c2) in &mut self.blocks {
            v.push(c1.weight.as_slice_mut().unwrap());
            v.push(c1.bias.as_slice_mut().unwrap());
            v.push(c2.weight.as_slice_mut().unwrap());
            v.push(c2.bias.as_slice_mut().unwrap());
        }
        v.push(self.adv_conv.weight.as_slice_mut().unwrap());
        v.push(self.adv_conv.bias.as_slice_mut().unwrap());
        v.push(self.adv_fc.weight.as_slice_mut().unwrap());
        v.push(self.adv_fc.bias.as_slice_mut().unwrap());
        v.push(self.val_conv.weight.as_slice_mut().unwrap());
        v.push(self.val_conv.bias.as_slice_mut().unwrap());
        v.push(self.val_fc.weight.as_slice_mut().unwrap());
        v.push(self.val_fc.bias.as_slice_mut().unwrap());
        v
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Convert precision, preserving the architecture.
    pub fn cast<T: Scalar>(&self) -> NetParams<T> {
        let mut out = NetParams::<T>::zeros(self.config);
        for (dst, src) in out.param_slices_mut().into_iter().zip(self.param_slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = T::from_f64(Scalar::to_f64(*s));
            }
        }
        out
    }
}

/// Primary and target weights plus optimizer moments and the step counter.
#[derive(Debug, Clone)]
pub struct AgentParams<S> {
    pub primary: NetParams<S>,
    pub target: NetParams<S>,
    pub opt: AdamState<S>,
}

impl<S: Scalar> AgentParams<S> {
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let primary = NetParams::init(config, rng);
        let target = primary.clone();
        AgentParams {
            primary,
            target,
            opt: AdamState::new(config),
        }
    }

    pub fn config(&self) -> &NetConfig {
        self.primary.config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn advantage_width_matches_action_space() {
        let cfg = NetConfig::standard(3, 5, 10);
        assert_eq!(cfg.action_count(), 1225);
        let mut rng = StdRng::seed_from_u64(0);
        let p = NetParams::<f32>::init(cfg, &mut rng);
        assert_eq!(p.adv_fc.weight.dim().0, 1225);
        assert_eq!(p.val_fc.weight.dim().0, 1);
    }

    #[test]
    fn param_slices_cover_everything_in_order() {
        let cfg = NetConfig {
            tube_types: 2,
            rows: 3,
            cols: 4,
            stem_channels: 4,
            residual_blocks: 2,
            advantage_channels: 3,
            value_channels: 2,
        };
        let mut rng = StdRng::seed_from_u64(1);
        let p = NetParams::<f64>::init(cfg, &mut rng);
        let total: usize = p.param_slices().iter().map(|s| s.len()).sum();
        let expect = {
            let stem = 4 * 2 * 9 + 4;
            let blocks = 2 * 2 * (4 * 4 * 9 + 4);
            let adv = 3 * 4 + 3 + (cfg.action_count() * 3 * 12 + cfg.action_count());
            let val = 2 * 4 + 2 + (2 * 12 + 1);
            stem + blocks + adv + val
        };
        assert_eq!(total, expect);
        assert_eq!(p.param_count(), expect);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = NetConfig::standard(2, 3, 5);
        let a = NetParams::<f32>::init(cfg, &mut StdRng::seed_from_u64(7));
        let b = NetParams::<f32>::init(cfg, &mut StdRng::seed_from_u64(7));
        for (x, y) in a.param_slices().into_iter().zip(b.param_slices()) {
            assert_eq!(x, y);
        }
    }
}
