//! Adaptive-moment optimizer state and the soft target blend.

use crate::scalar::Scalar;

use super::{NetConfig, NetParams};

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub m: NetParams<S>,
    pub v: NetParams<S>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: NetConfig) -> Self {
        AdamState {
            m: NetParams::zeros(config),
            v: NetParams::zeros(config),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One optimizer step over every parameter.
    pub fn step(&mut self, params: &mut NetParams<S>, grads: &NetParams<S>, lr: f64) {
        self.step += 1;
        let b1 = S::from_f64(self.beta1);
        let b2 = S::from_f64(self.beta2);
        let one = S::one();
        let corr1 = S::from_f64(1.0 - self.beta1.powi(self.step as i32));
        let corr2 = S::from_f64(1.0 - self.beta2.powi(self.step as i32));
        let lr = S::from_f64(lr);
        let eps = S::from_f64(self.eps);

        let mut p_slices = params.param_slices_mut();
        let g_slices = grads.param_slices();
        let mut m_slices = self.m.param_slices_mut();
        let mut v_slices = self.v.param_slices_mut();
        for (((p, g), m), v) in p_slices
            .iter_mut()
            .zip(g_slices)
            .zip(m_slices.iter_mut())
            .zip(v_slices.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Blend the target weights toward the primary: `t <- (1 - tau) t + tau p`.
pub fn soft_update<S: Scalar>(target: &mut NetParams<S>, primary: &NetParams<S>, tau: f64) {
    let tau = S::from_f64(tau);
    let keep = S::one() - tau;
    let mut t_slices = target.param_slices_mut();
    let p_slices = primary.param_slices();
    for (t, p) in t_slices.iter_mut().zip(p_slices) {
        for i in 0..t.len() {
            t[i] = keep * t[i] + tau * p[i];
        }
    }
}
