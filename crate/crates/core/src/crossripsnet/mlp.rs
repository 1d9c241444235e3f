//! Dense ReLU networks with hand-written backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// Fully connected network. Parameters are stored flat, layer by layer, as
/// the weight matrix (row-major, `out x in`) followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// ReLU after the last layer too.
    relu_last: bool,
    params: Vec<f64>,
}

/// Per-layer inputs and pre-activations of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform init in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new(sizes: Vec<usize>, relu_last: bool, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[1] * (w[0] + 1)).map(|_| rng.random_range(-bound..bound)));
        }
        Ok(Self { sizes, relu_last, params })
    }

    pub fn from_params(sizes: Vec<usize>, relu_last: bool, params: Vec<f64>) -> Result<Self> {
        let want: usize = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        if sizes.len() < 2 || params.len() != want {
            return Err(Error::ShapeMismatch(format!("{} parameters for sizes {sizes:?}", params.len())));
        }
        Ok(Self { sizes, relu_last, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn relu_at(&self, layer: usize) -> bool {
        layer + 1 < self.layers() || self.relu_last
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_impl(x, None, None)
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut cache = MlpCache { inputs: Vec::new(), pre: Vec::new() };
        let out = self.forward_impl(x, Some(&mut cache), None);
        (out, cache)
    }

    /// Appends the sign of every ReLU pre-activation to `pattern`.
    pub fn activation_pattern(&self, x: &[f64], pattern: &mut Vec<bool>) -> Vec<f64> {
        self.forward_impl(x, None, Some(pattern))
    }

    fn forward_impl(&self, x: &[f64], mut cache: Option<&mut MlpCache>, mut pattern: Option<&mut Vec<bool>>) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut h = x.to_vec();
        let mut off = 0;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_out * n_in];
            let b = &self.params[off + n_out * n_in..off + n_out * (n_in + 1)];
            off += n_out * (n_in + 1);
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(&h).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let relu = self.relu_at(l);
            if let (true, Some(p)) = (relu, pattern.as_deref_mut()) {
                p.extend(z.iter().map(|&v| v > 0.0));
            }
            let a = if relu { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(std::mem::replace(&mut h, a));
                c.pre.push(z);
            } else {
                h = a;
            }
        }
        h
    }

    /// Adds parameter gradients into `grad` (same layout as the parameters)
    /// and returns the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        let mut offsets = Vec::with_capacity(self.layers());
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[1] * (w[0] + 1);
        }
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if self.relu_at(l) {
                g.iter_mut().zip(&cache.pre[l]).for_each(|(gv, &z)| {
                    if z <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            let off = offsets[l];
            let input = &cache.inputs[l];
            let mut g_in = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                let row = off + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += go * input[i];
                    g_in[i] += go * self.params[row + i];
                }
                grad[off + n_out * n_in + o] += go;
            }
            g = g_in;
        }
        g
    }
}
