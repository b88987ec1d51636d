use crate::autodiff::{Gradients, ParamStore};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let sizes: Vec<usize> = params.iter().map(|(_, _, t)| t.numel()).collect();
        Self::with_sizes(&sizes, learning_rate)
    }

    /// Optimizer state for free slices of the given lengths.
    pub fn with_sizes(sizes: &[usize], learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One descent step on every parameter of the store.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let (bc1, bc2) = self.advance();
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            self.update(id.0, params.get_mut(id).values_mut(), grads.param(id).values(), bc1, bc2);
        }
    }

    /// One descent step on a single free slice registered as slot 0.
    pub fn step_slice(&mut self, values: &mut [f64], grad: &[f64]) {
        let (bc1, bc2) = self.advance();
        self.update(0, values, grad, bc1, bc2);
    }

    fn advance(&mut self) -> (f64, f64) {
        self.step += 1;
        let t = self.step.min(i32::MAX as u64) as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn update(&mut self, k: usize, vals: &mut [f64], g: &[f64], bc1: f64, bc2: f64) {
        let (m, v) = (&mut self.m[k], &mut self.v[k]);
        for i in 0..vals.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
            vals[i] -= self.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.epsilon);
        }
    }
}
