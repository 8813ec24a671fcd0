use serde::{Deserialize, Serialize};

use super::{DenseParams, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fully connected network with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseParams>,
}

/// Per-layer inputs (post-activation) recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape(
                "an MLP needs at least input and output sizes".into(),
            ));
        }
        let layers = sizes
            .windows(2)
            .map(|w| DenseParams::init(w[0], w[1], rng))
            .collect();
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseParams {
        self.layers.last_mut().expect("mlp has layers")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&a)?;
            if k < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut a, z));
        }
        Ok((a, MlpCache { inputs }))
    }

    /// Accumulates gradients for upstream `dout` on the output into `grads`;
    /// returns `dL/dx`.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], grads: &mut Mlp) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape(
                "mlp cache does not match network depth".into(),
            ));
        }
        let mut d = dout.to_vec();
        for k in (0..self.layers.len()).rev() {
            let x = &cache.inputs[k];
            d = self.layers[k].backward(x, &d, &mut grads.layers[k])?;
            if k > 0 {
                // x is the ReLU output of layer k-1
                for (dv, xv) in d.iter_mut().zip(x) {
                    if *xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
        }
        Ok(d)
    }
}

impl Parameterized for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.tensors_mut())
            .collect()
    }
}
