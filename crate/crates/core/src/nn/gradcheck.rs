//! Central finite-difference verification of analytic gradients.

use super::{mse_loss, DenseParams, Parameterized};
use crate::error::Result;
use crate::nn::LstmRegressor;
use crate::rng::substream;
use rand::Rng as _;

/// Denominator floor in the relative error.
pub const REL_ERR_FLOOR: f64 = 1e-8;
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A model with a scalar loss on one sample and its analytic gradient.
pub trait Differentiable: Parameterized + Clone {
    type Sample;

    fn loss_and_grad(&self, sample: &Self::Sample) -> Result<(f64, Self)>;

    fn loss(&self, sample: &Self::Sample) -> Result<f64> {
        Ok(self.loss_and_grad(sample)?.0)
    }
}

impl Differentiable for DenseParams {
    type Sample = (Vec<f64>, Vec<f64>);

    fn loss_and_grad(&self, s: &Self::Sample) -> Result<(f64, Self)> {
        let y = self.forward(&s.0)?;
        let (loss, g) = mse_loss(&[y], &[s.1.clone()])?;
        let mut grads = self.zeros_like();
        self.backward(&s.0, &g[0], &mut grads)?;
        Ok((loss, grads))
    }
}

/// Maximum over all parameters of `|a - f| / max(|a|, |f|, 1e-8)` where `a` is
/// the analytic and `f` the central-difference gradient. Zero for a model
/// without parameters.
pub fn grad_check<M: Differentiable>(model: &M, sample: &M::Sample, step: f64) -> Result<f64> {
    let (_, analytic) = model.loss_and_grad(sample)?;
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, grad_t) in analytic.iter().enumerate() {
        for (j, &a) in grad_t.iter().enumerate() {
            let orig = probe.tensors()[k][j];
            probe.tensors_mut()[k][j] = orig + step;
            let up = probe.loss(sample)?;
            probe.tensors_mut()[k][j] = orig - step;
            let down = probe.loss(sample)?;
            probe.tensors_mut()[k][j] = orig;
            let f = (up - down) / (2.0 * step);
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(REL_ERR_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Shape of the reference network used by the `grad-check` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSpec {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub output: usize,
    pub seq_len: usize,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            input: 2,
            hidden: 8,
            layers: 2,
            output: 2,
            seq_len: 5,
        }
    }
}

/// Builds a random regressor and sample from `seed` and checks it.
pub fn grad_check_lstm(spec: GradCheckSpec, seed: u64, step: f64) -> Result<f64> {
    let mut rng = substream(seed, "grad-check", &[]);
    let model = LstmRegressor::init(spec.input, spec.hidden, spec.layers, spec.output, &mut rng)?;
    let seq: Vec<Vec<f64>> = (0..spec.seq_len)
        .map(|_| {
            (0..spec.input)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    // Residuals are kept small: the central difference carries about one ulp
    // of the loss divided by the step, which scales with the residual and
    // would otherwise swamp parameters with gradients near the 1e-8 floor.
    let output = model.predict(&seq)?;
    let target: Vec<f64> = output
        .iter()
        .map(|y| y + rng.random_range(-TARGET_RESIDUAL..TARGET_RESIDUAL))
        .collect();
    grad_check(&model, &(seq, target), step)
}

/// Half-width of the random output residual used by [`grad_check_lstm`].
pub const TARGET_RESIDUAL: f64 = 1e-3;

/// Largest gradient error over `seeds` random networks.
pub fn grad_check_lstm_seeds(
    spec: GradCheckSpec,
    seeds: impl IntoIterator<Item = u64>,
    step: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        worst = worst.max(grad_check_lstm(spec, seed, step)?);
    }
    Ok(worst)
}
