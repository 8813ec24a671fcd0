use serde::{Deserialize, Serialize};

use super::{check_len, matvec_add, matvec_t_add, outer_add, uniform_init, Parameterized};
use crate::error::Result;
use crate::rng::Rng;

/// Affine layer `y = W x + b` with `W` stored `out x in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        DenseParams {
            in_dim,
            out_dim,
            weights: uniform_init(in_dim * out_dim, in_dim, rng),
            bias: uniform_init(out_dim, in_dim, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_len(
            "dense weights",
            self.weights.len(),
            self.in_dim * self.out_dim,
        )?;
        check_len("dense bias", self.bias.len(), self.out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("dense input", x.len(), self.in_dim)?;
        let mut y = self.bias.clone();
        matvec_add(&self.weights, self.in_dim, x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dout: &[f64], grads: &mut DenseParams) -> Result<Vec<f64>> {
        check_len("dense input", x.len(), self.in_dim)?;
        check_len("dense upstream gradient", dout.len(), self.out_dim)?;
        outer_add(&mut grads.weights, self.in_dim, dout, x);
        for (b, d) in grads.bias.iter_mut().zip(dout) {
            *b += d;
        }
        let mut dx = vec![0.0; self.in_dim];
        matvec_t_add(&self.weights, self.in_dim, dout, &mut dx);
        Ok(dx)
    }
}

impl Parameterized for DenseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.bias]
    }
}
