use serde::{Deserialize, Serialize};

use super::{check_len, lstm::LstmForward, DenseParams, Differentiable, LstmParams, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Stacked LSTM layers followed by a linear head on the last hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmRegressor {
    pub layers: Vec<LstmParams>,
    pub head: DenseParams,
}

#[derive(Debug, Clone)]
pub struct RegressorCache {
    layers: Vec<LstmForward>,
    last_hidden: Vec<f64>,
}

impl LstmRegressor {
    pub fn init(
        input: usize,
        hidden: usize,
        num_layers: usize,
        output: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_layers == 0 || hidden == 0 || input == 0 || output == 0 {
            return Err(Error::Shape("regressor dimensions must be positive".into()));
        }
        let layers = (0..num_layers)
            .map(|k| LstmParams::init(if k == 0 { input } else { hidden }, hidden, rng))
            .collect();
        let head = DenseParams::init(hidden, output, rng);
        Ok(LstmRegressor { layers, head })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn output_dim(&self) -> usize {
        self.head.out_dim
    }

    pub fn forward_cached(&self, seq: &[Vec<f64>]) -> Result<(Vec<f64>, RegressorCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current: Vec<Vec<f64>> = seq.to_vec();
        for layer in &self.layers {
            let out = layer.forward_from_zero(&current)?;
            current = out.hidden.clone();
            caches.push(out);
        }
        let last_hidden = current.pop().expect("non-empty sequence");
        let y = self.head.forward(&last_hidden)?;
        Ok((
            y,
            RegressorCache {
                layers: caches,
                last_hidden,
            },
        ))
    }

    pub fn predict(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(seq)?.0)
    }

    /// Backward pass for upstream gradient `dy` on the output; accumulates
    /// into `grads`.
    pub fn backward(
        &self,
        cache: &RegressorCache,
        dy: &[f64],
        grads: &mut LstmRegressor,
    ) -> Result<()> {
        check_len("regressor upstream gradient", dy.len(), self.head.out_dim)?;
        let dh_last = self
            .head
            .backward(&cache.last_hidden, dy, &mut grads.head)?;
        let t_len = cache.layers[0].cache.len();
        let hidden = self.layers[0].hidden_size;
        let mut upstream = vec![vec![0.0; hidden]; t_len];
        upstream[t_len - 1] = dh_last;
        for k in (0..self.layers.len()).rev() {
            let back = self.layers[k].backward(
                &cache.layers[k].cache,
                &upstream,
                None,
                &mut grads.layers[k],
            )?;
            upstream = back.dx;
        }
        Ok(())
    }

    /// Squared-error loss on one sample and accumulation of `scale * grad`
    /// into `grads`. Returns the unscaled per-element mean loss.
    pub fn accumulate(
        &self,
        seq: &[Vec<f64>],
        target: &[f64],
        scale: f64,
        grads: &mut LstmRegressor,
    ) -> Result<f64> {
        let (y, cache) = self.forward_cached(seq)?;
        check_len("regressor target", target.len(), y.len())?;
        let n = y.len() as f64;
        let mut loss = 0.0;
        let dy: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(a, b)| {
                let d = a - b;
                loss += d * d;
                scale * 2.0 * d / n
            })
            .collect();
        self.backward(&cache, &dy, grads)?;
        Ok(loss / n)
    }
}

impl Parameterized for LstmRegressor {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| l.tensors())
            .chain(self.head.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let LstmRegressor { layers, head } = self;
        layers
            .iter_mut()
            .flat_map(|l| l.tensors_mut())
            .chain(head.tensors_mut())
            .collect()
    }
}

impl Differentiable for LstmRegressor {
    type Sample = (Vec<Vec<f64>>, Vec<f64>);

    fn loss_and_grad(&self, s: &Self::Sample) -> Result<(f64, Self)> {
        let mut grads = self.zeros_like();
        let loss = self.accumulate(&s.0, &s.1, 1.0, &mut grads)?;
        Ok((loss, grads))
    }
}
