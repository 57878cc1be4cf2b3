//! Layer primitives with explicit forward and reverse passes.
//!
//! Convolutions run as one batched im2col matrix product so the fast
//! matrix-multiply path does the heavy lifting for both `f32` and `f64`.

use ndarray::{Array1, Array2, Array4, ArrayView2, Axis, Dimension, Zip};

use crate::scalar::Scalar;

use super::{Conv2d, Linear};

/// Unfold `(B, C, H, W)` into `(C*K*K, B*H*W)` patch columns with zero
/// padding. Column order is `(b, i, j)` row-major.
pub fn im2col<S: Scalar>(x: &Array4<S>, k: usize, pad: usize) -> Array2<S> {
    let (b, c, h, w) = x.dim();
    let mut cols = Array2::zeros((c * k * k, b * h * w));
    for bi in 0..b {
        for ci in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = ci * k * k + ki * k + kj;
                    for i in 0..h {
                        let si = i as isize + ki as isize - pad as isize;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        for j in 0..w {
                            let sj = j as isize + kj as isize - pad as isize;
                            if sj < 0 || sj >= w as isize {
                                continue;
                            }
                            cols[[row, bi * h * w + i * w + j]] =
                                x[[bi, ci, si as usize, sj as usize]];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add the transpose of [`im2col`]: fold patch-column gradients back
/// onto the input image gradient.
fn col2im<S: Scalar>(
    dcols: &Array2<S>,
    shape: (usize, usize, usize, usize),
    k: usize,
    pad: usize,
) -> Array4<S> {
    let (b, c, h, w) = shape;
    let mut dx = Array4::zeros(shape);
    for bi in 0..b {
        for ci in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = ci * k * k + ki * k + kj;
                    for i in 0..h {
                        let si = i as isize + ki as isize - pad as isize;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        for j in 0..w {
                            let sj = j as isize + kj as isize - pad as isize;
                            if sj < 0 || sj >= w as isize {
                                continue;
                            }
                            dx[[bi, ci, si as usize, sj as usize]] +=
                                dcols[[row, bi * h * w + i * w + j]];
                        }
                    }
                }
            }
        }
    }
    dx
}

fn weight_matrix<S: Scalar>(conv: &Conv2d<S>) -> ArrayView2<'_, S> {
    let (c_out, c_in, k, _) = conv.weight.dim();
    conv.weight
        .view()
        .into_shape_with_order((c_out, c_in * k * k))
        .expect("conv weights are standard layout")
}

/// Convolution forward; returns the output and the patch columns the
/// backward pass reuses.
pub fn conv_forward<S: Scalar>(x: &Array4<S>, conv: &Conv2d<S>) -> (Array4<S>, Array2<S>) {
    let (b, _, h, w) = x.dim();
    let c_out = conv.weight.dim().0;
    let cols = im2col(x, conv.kernel, conv.pad);
    let mut out2 = weight_matrix(conv).dot(&cols);
    out2 += &conv.bias.view().insert_axis(Axis(1));
    let out = out2
        .into_shape_with_order((c_out, b, h, w))
        .expect("matmul output is contiguous")
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .to_owned();
    (out, cols)
}

/// Convolution reverse pass from the output gradient.
pub fn conv_backward<S: Scalar>(
    conv: &Conv2d<S>,
    cols: &Array2<S>,
    dy: &Array4<S>,
    input_shape: (usize, usize, usize, usize),
) -> (Array4<S>, Array1<S>, Array4<S>) {
    let (b, c_out, h, w) = dy.dim();
    let dy2 = dy
        .view()
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_shape_with_order((c_out, b * h * w))
        .expect("permuted copy is contiguous")
        .to_owned();
    let (c_out_w, c_in, k, _) = conv.weight.dim();
    debug_assert_eq!(c_out, c_out_w);
    let dw = dy2
        .dot(&cols.t())
        .into_shape_with_order((c_out, c_in, k, k))
        .expect("weight gradient is contiguous");
    let db = dy2.sum_axis(Axis(1));
    let dcols = weight_matrix(conv).t().dot(&dy2);
    let dx = col2im(&dcols, input_shape, conv.kernel, conv.pad);
    (dw, db, dx)
}

pub fn elu_forward<S: Scalar, D: Dimension>(
    z: &ndarray::Array<S, D>,
    alpha: f64,
) -> ndarray::Array<S, D> {
    let a = S::from_f64(alpha);
    z.mapv(|v| if v > S::zero() { v } else { a * (v.exp() - S::one()) })
}

/// ELU reverse pass from the pre-activation `z` and activation `y`:
/// the slope is 1 above zero and `y + alpha` (= alpha * exp(z)) below.
pub fn elu_backward<S: Scalar, D: Dimension>(
    z: &ndarray::Array<S, D>,
    y: &ndarray::Array<S, D>,
    dy: &ndarray::Array<S, D>,
    alpha: f64,
) -> ndarray::Array<S, D> {
    let a = S::from_f64(alpha);
    Zip::from(z)
        .and(y)
        .and(dy)
        .map_collect(|&z, &y, &dy| if z > S::zero() { dy } else { dy * (y + a) })
}

pub fn linear_forward<S: Scalar>(x: &Array2<S>, lin: &Linear<S>) -> Array2<S> {
    let mut y = x.dot(&lin.weight.t());
    y += &lin.bias.view().insert_axis(Axis(0));
    y
}

pub fn linear_backward<S: Scalar>(
    lin: &Linear<S>,
    x: &Array2<S>,
    dy: &Array2<S>,
) -> (Array2<S>, Array1<S>, Array2<S>) {
    let dw = dy.t().dot(x);
    let db = dy.sum_axis(Axis(0));
    let dx = dy.dot(&lin.weight);
    (dw, db, dx)
}

/// Collapse `(B, C, H, W)` into `(B, C*H*W)` rows.
pub fn flatten<S: Scalar>(x: &Array4<S>) -> Array2<S> {
    let (b, c, h, w) = x.dim();
    x.view()
        .into_shape_with_order((b, c * h * w))
        .expect("standard layout")
        .to_owned()
}

pub fn unflatten<S: Scalar>(x: &Array2<S>, shape: (usize, usize, usize, usize)) -> Array4<S> {
    x.view()
        .into_shape_with_order(shape)
        .expect("standard layout")
        .to_owned()
}
