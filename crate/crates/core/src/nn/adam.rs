use alloc::vec::Vec;

use super::grad::Gradients;
use super::layer::Network;

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// One bias-corrected Adam update of every parameter in `net`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        if self.first.is_empty() {
            let n = net.param_count();
            self.first = alloc::vec![0.0; n];
            self.second = alloc::vec![0.0; n];
        }
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(self.step));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(self.step));
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);

        let params = net.layers_mut().iter_mut().flat_map(|l| {
            let (w, b) = l.params_mut();
            w.iter_mut().chain(b.iter_mut())
        });
        let g = grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases));
        for (((p, g), m), v) in params.zip(g).zip(self.first.iter_mut()).zip(self.second.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
    }
}
