use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::store::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Bias-corrected Adam without weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    states: BTreeMap<String, AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, states: BTreeMap::new() }
    }

    pub fn state(&self, name: &str) -> Option<&AdamState> {
        self.states.get(name)
    }

    /// Applies one update from the accumulated `grad` buffers and clears
    /// them. Parameters with `requires_grad == false` are left untouched.
    pub fn step(&mut self, params: &mut ParamStore) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (name, p) in params.iter_mut() {
            if !p.requires_grad {
                p.zero_grad();
                continue;
            }
            let st = self.states.entry(name.to_string()).or_insert_with(|| AdamState {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
            });
            for i in 0..p.data.len() {
                let g = p.grad[i];
                st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g;
                st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g * g;
                let m_hat = st.m[i] / bc1;
                let v_hat = st.v[i] / bc2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn single(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::new(vec![1], vec![x]).unwrap());
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = single(1.0);
        let g: f64 = 0.37;
        s.get_mut("x").unwrap().grad[0] = g;
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut s);
        let cfg = adam.config;
        let expected = cfg.lr * g / (g + cfg.eps);
        let moved = 1.0 - s.get("x").unwrap().data[0];
        assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
        assert!((moved - cfg.lr).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = single(2.5);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut s);
        }
        assert_eq!(s.get("x").unwrap().data[0], 2.5);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // f(x) = (x - 3)^2, minimum at 3
        let mut s = single(2.5);
        let mut adam = Adam::new(AdamConfig { lr: 0.02, ..AdamConfig::default() });
        for _ in 0..100 {
            let x = s.get("x").unwrap().data[0];
            s.get_mut("x").unwrap().grad[0] = 2.0 * (x - 3.0);
            adam.step(&mut s);
        }
        let x = s.get("x").unwrap().data[0];
        assert!((x - 3.0).abs() < 1e-3, "x = {x}");
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut s = single(1.0);
        s.set_trainable("x", false);
        s.get_mut("x").unwrap().grad[0] = 5.0;
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut s);
        assert_eq!(s.get("x").unwrap().data[0].to_bits(), 1f64.to_bits());
        assert_eq!(s.get("x").unwrap().grad[0], 0.0);
    }
}
