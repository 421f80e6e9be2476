use alloc::vec;
use alloc::vec::Vec;

use super::layer::{Activation, ForwardPass, Network};
use crate::error::{Error, Result};

/// Gradient of one dense layer, laid out like the layer itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer gradients for a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights().len()], biases: vec![0.0; l.biases().len()] })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weights.iter_mut().chain(g.biases.iter_mut()).for_each(|x| *x *= s);
        }
    }
}

/// Sum of squared weights (biases excluded).
pub fn l2_penalty(net: &Network) -> f64 {
    net.layers().iter().flat_map(|l| l.weights()).map(|w| w * w).sum()
}

/// Analytic gradient of `bce(output, target) + l2_lambda * sum(W^2)` for a
/// network ending in a sigmoid layer.
///
/// The sigmoid/BCE pair collapses to an output delta of
/// `(output - target) / n`. The epsilon clamp in the loss is ignored here,
/// so outputs saturated within 1e-7 of 0 or 1 see the unclamped gradient.
pub fn backward(net: &Network, pass: &ForwardPass, target: &[f64], l2_lambda: f64) -> Result<Gradients> {
    let layers = net.layers();
    let last = layers.len() - 1;
    if layers[last].activation() != Activation::Sigmoid {
        return Err(Error::InvalidModel("backward expects a sigmoid output layer".into()));
    }
    if target.len() != net.out_dim() {
        return Err(Error::DimensionMismatch { expected: net.out_dim(), got: target.len() });
    }
    let n = target.len() as f64;
    let mut delta: Vec<f64> = pass.output().iter().zip(target).map(|(o, t)| (o - t) / n).collect();
    let mut grads = Gradients::zeros_like(net);

    for i in (0..=last).rev() {
        let layer = &layers[i];
        let input = &pass.activations[i];
        let g = &mut grads.layers[i];
        for (r, d) in delta.iter().enumerate() {
            g.biases[r] = *d;
            let row = &mut g.weights[r * layer.in_dim()..(r + 1) * layer.in_dim()];
            for (gw, x) in row.iter_mut().zip(input) {
                *gw = d * x;
            }
        }
        if l2_lambda != 0.0 {
            for (gw, w) in g.weights.iter_mut().zip(layer.weights()) {
                *gw += 2.0 * l2_lambda * w;
            }
        }
        if i == 0 {
            break;
        }
        // Propagate through W, then the previous layer's dropout mask and activation.
        let prev = &layers[i - 1];
        let mut next = vec![0.0; layer.in_dim()];
        for (r, d) in delta.iter().enumerate() {
            let row = &layer.weights()[r * layer.in_dim()..(r + 1) * layer.in_dim()];
            for (acc, w) in next.iter_mut().zip(row) {
                *acc += w * d;
            }
        }
        let z = &pass.pre_activations[i - 1];
        for (j, v) in next.iter_mut().enumerate() {
            if let Some(mask) = &pass.masks[i - 1] {
                *v *= mask[j];
            }
            *v *= match prev.activation() {
                Activation::Relu => {
                    if z[j] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Sigmoid => {
                    let s = super::layer::sigmoid(z[j]);
                    s * (1.0 - s)
                }
            };
        }
        delta = next;
    }
    Ok(grads)
}
