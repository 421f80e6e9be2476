use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }
}

/// Logistic function, evaluated on whichever branch keeps `exp` bounded.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Fully connected layer. `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidModel("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch { expected: in_dim * out_dim, got: weights.len() });
        }
        if biases.len() != out_dim {
            return Err(Error::DimensionMismatch { expected: out_dim, got: biases.len() });
        }
        Ok(Self { in_dim, out_dim, activation, weights, biases })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, activation, weights: vec![0.0; in_dim * out_dim], biases: vec![0.0; out_dim] }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (in_dim + out_dim) as f64);
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect();
        Self { in_dim, out_dim, activation, weights, biases: vec![0.0; out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Weights and biases borrowed together.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// `W x + b`.
    pub fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Activations recorded by a forward pass. `activations[0]` is the input and
/// `activations[i + 1]` the (post-dropout) output of layer `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers per layer (`0` or `1 / keep`), if any.
    pub masks: Vec<Option<Vec<f64>>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("forward pass has at least the input")
    }

    /// Output of layer `index`.
    pub fn layer_output(&self, index: usize) -> &[f64] {
        &self.activations[index + 1]
    }
}

/// An ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

impl Network {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::InvalidModel(alloc::format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim,
                    pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Dense> {
        self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim() {
            return Err(Error::DimensionMismatch { expected: self.in_dim(), got: input.len() });
        }
        Ok(())
    }

    /// Eval-mode output only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut next);
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Eval-mode pass keeping every intermediate value.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        self.run(input, None::<(f64, &mut rand_chacha::ChaCha8Rng)>)
    }

    /// Training-mode pass. With `dropout_rate > 0`, every hidden layer's
    /// activation is multiplied by a Bernoulli(1 - rate) mask scaled by
    /// `1 / (1 - rate)`; the input and output layers are never masked.
    pub fn forward_train<R: Rng + ?Sized>(&self, input: &[f64], dropout_rate: f64, rng: &mut R) -> Result<ForwardPass> {
        if dropout_rate > 0.0 {
            self.run(input, Some((dropout_rate, rng)))
        } else {
            self.run(input, None::<(f64, &mut R)>)
        }
    }

    fn run<R: Rng + ?Sized>(&self, input: &[f64], mut dropout: Option<(f64, &mut R)>) -> Result<ForwardPass> {
        self.check_input(input)?;
        let n = self.layers.len();
        let mut pass = ForwardPass {
            pre_activations: Vec::with_capacity(n),
            activations: Vec::with_capacity(n + 1),
            masks: Vec::with_capacity(n),
        };
        pass.activations.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine(&pass.activations[i], &mut z);
            let mut a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            let mask = match dropout.as_mut() {
                Some((rate, rng)) if i + 1 < n => {
                    let keep = 1.0 - *rate;
                    let scale = 1.0 / keep;
                    let m: Vec<f64> = (0..a.len()).map(|_| if rng.random_bool(keep) { scale } else { 0.0 }).collect();
                    for (v, k) in a.iter_mut().zip(&m) {
                        *v *= k;
                    }
                    Some(m)
                }
                _ => None,
            };
            pass.pre_activations.push(z);
            pass.activations.push(a);
            pass.masks.push(mask);
        }
        Ok(pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy() -> Network {
        // 3 -> 2 (relu) -> 2 (sigmoid)
        let l1 = Dense::new(3, 2, Activation::Relu, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75], vec![0.1, -0.2]).unwrap();
        let l2 = Dense::new(2, 2, Activation::Sigmoid, vec![1.0, -2.0, 0.5, 0.5], vec![0.0, 0.3]).unwrap();
        Network::new(vec![l1, l2]).unwrap()
    }

    #[test]
    fn toy_matches_hand_computation() {
        let x = [1.0, 2.0, 0.5];
        // hidden z = [0.5 - 2 + 1 + 0.1, 1.5 + 0.5 - 0.375 - 0.2] = [-0.4, 1.425]
        // relu -> [0, 1.425]
        // out z = [0 - 2.85, 0 + 0.7125 + 0.3] = [-2.85, 1.0125]
        let out = toy().forward(&x).unwrap();
        assert_eq!(out.layer_output(0), &[0.0, 1.425]);
        let expected = [1.0 / (1.0 + libm::exp(2.85)), 1.0 / (1.0 + libm::exp(-1.0125))];
        for (o, e) in out.output().iter().zip(expected) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
        assert_eq!(toy().predict(&x).unwrap(), out.output());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0).is_finite());
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn dimension_checks() {
        assert!(toy().forward(&[1.0, 2.0]).is_err());
        let l1 = Dense::zeros(3, 2, Activation::Relu);
        let l2 = Dense::zeros(3, 2, Activation::Sigmoid);
        assert!(Network::new(vec![l1, l2]).is_err());
        assert!(Dense::new(2, 2, Activation::Relu, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn training_pass_without_dropout_equals_eval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, -0.2, 0.9];
        assert_eq!(toy().forward_train(&x, 0.0, &mut rng).unwrap(), toy().forward(&x).unwrap());
    }

    #[test]
    fn dropout_masks_hidden_only() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pass = toy().forward_train(&[1.0, 2.0, 0.5], 0.5, &mut rng).unwrap();
        let m = pass.masks[0].as_ref().unwrap();
        assert!(m.iter().all(|&k| k == 0.0 || k == 2.0));
        assert!(pass.masks[1].is_none());
    }
}
