use crate::error::{Error, Result};

/// Adam moments for one parameter block, with optional decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f32>,
    pub second_moment: Vec<f32>,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f32) -> Self {
        AdamState {
            step: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f32) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let lr = self.learning_rate;
        let decay = lr * self.weight_decay;
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            if decay != 0.0 {
                *p -= decay * *p;
            }
            *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// One Adam state per named parameter block, sharing a learning rate.
#[derive(Debug, Clone)]
pub struct BlockOptimizer {
    states: Vec<AdamState>,
}

impl BlockOptimizer {
    pub fn new(sizes: &[usize], learning_rate: f32, weight_decay: f32) -> Self {
        BlockOptimizer {
            states: sizes
                .iter()
                .map(|&n| AdamState::new(n, learning_rate).with_weight_decay(weight_decay))
                .collect(),
        }
    }

    pub fn set_learning_rate(&mut self, lr: f32) {
        for s in &mut self.states {
            s.learning_rate = lr;
        }
    }

    pub fn learning_rate(&self) -> f32 {
        self.states.first().map_or(0.0, |s| s.learning_rate)
    }

    pub fn step_block(&mut self, block: usize, params: &mut [f32], grads: &[f32]) -> Result<()> {
        self.states[block].step(params, grads)
    }
}
