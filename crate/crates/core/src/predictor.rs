//! Next-position predictor: stacked LSTM over the last `seq_len` normalised
//! fixes, linear head to the next normalised (lat, lon).
//!
//! Metrics are reported on normalised coordinates and averaged over both
//! dimensions, which keeps `A_c = 1 - RMSE` dimensionless.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, NormalizationBounds};
use crate::nn::{self, AdamConfig, AdamState, LstmRegressor, Parameterized};
use crate::rng::substream;

pub const CHECKPOINT_KIND: &str = "predictor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub seq_len: usize,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            seq_len: 8,
            num_layers: 2,
            hidden_size: 64,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0
            || self.num_layers == 0
            || self.hidden_size == 0
            || self.batch_size == 0
        {
            return Err(Error::Config(
                "predictor seq_len, num_layers, hidden_size and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("predictor learning_rate must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub model: LstmRegressor,
    pub bounds: [NormalizationBounds; 2],
    pub config: PredictorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub accuracy: f64,
}

impl EvalReport {
    /// Builds the report from per-element prediction errors.
    pub fn from_errors(errors: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (mut n, mut abs, mut sq) = (0usize, 0.0, 0.0);
        for e in errors {
            n += 1;
            abs += e.abs();
            sq += e * e;
        }
        if n == 0 {
            return Err(Error::Shape("evaluation over an empty test set".into()));
        }
        let mse = sq / n as f64;
        let rmse = mse.sqrt();
        Ok(EvalReport {
            mae: abs / n as f64,
            mse,
            rmse,
            accuracy: 1.0 - rmse,
        })
    }

    pub fn csv_header() -> &'static str {
        "mae,mse,rmse,accuracy"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.mae, self.mse, self.rmse, self.accuracy)
    }
}

/// Untrained predictor with freshly initialised weights.
pub fn init(bounds: [NormalizationBounds; 2], cfg: &PredictorConfig) -> Result<TrainedPredictor> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, "predictor-init", &[]);
    let model = LstmRegressor::init(2, cfg.hidden_size, cfg.num_layers, 2, &mut rng)?;
    Ok(TrainedPredictor {
        model,
        bounds,
        config: cfg.clone(),
    })
}

fn window_input(w: &[[f64; 2]]) -> Vec<Vec<f64>> {
    w.iter().map(|p| p.to_vec()).collect()
}

pub fn train(dataset: &WindowedDataset, cfg: &PredictorConfig) -> Result<TrainedPredictor> {
    Ok(train_with_history(dataset, cfg)?.0)
}

/// Mini-batch Adam on shuffled windows. Returns the model and the mean
/// training loss of each epoch.
pub fn train_with_history(
    dataset: &WindowedDataset,
    cfg: &PredictorConfig,
) -> Result<(TrainedPredictor, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::Shape("training on an empty dataset".into()));
    }
    if dataset.seq_len != cfg.seq_len {
        return Err(Error::Config(format!(
            "dataset windows have {} steps, predictor expects {}",
            dataset.seq_len, cfg.seq_len
        )));
    }
    let mut p = init(dataset.bounds, cfg)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.learning_rate), &p.model)?;
    let mut grads = p.model.zeros_like();
    let mut rng = substream(cfg.seed, "predictor-shuffle", &[]);

    // Canonical order first, so the result depends on the seed and not on
    // the order windows were supplied in.
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| {
        let (wa, wb) = (&dataset.windows[a], &dataset.windows[b]);
        wa.target_time
            .total_cmp(&wb.target_time)
            .then_with(|| wa.target[0].total_cmp(&wb.target[0]))
            .then_with(|| wa.target[1].total_cmp(&wb.target[1]))
    });

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut epoch_order = order.clone();
        epoch_order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, batch) in epoch_order.chunks(cfg.batch_size).enumerate() {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let w = &dataset.windows[i];
                batch_loss +=
                    p.model
                        .accumulate(&window_input(&w.input), &w.target, scale, &mut grads)?;
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss(format!("epoch {epoch}, step {step}")));
            }
            if let Some(max) = cfg.clip_norm {
                nn::clip_global_norm(&mut grads, max);
            }
            adam.step(&mut p.model, &grads)?;
            total += batch_loss;
        }
        history.push(total / dataset.len() as f64);
    }
    Ok((p, history))
}

impl TrainedPredictor {
    fn normalize(&self, p: GeoPoint) -> [f64; 2] {
        [
            self.bounds[0].normalize(p.lat_deg),
            self.bounds[1].normalize(p.lon_deg),
        ]
    }

    /// Predicts the fix following `window` (oldest first).
    pub fn predict_next(&self, window: &[GeoPoint]) -> Result<GeoPoint> {
        if window.len() != self.config.seq_len {
            return Err(Error::Shape(format!(
                "window has {} positions, predictor expects {}",
                window.len(),
                self.config.seq_len
            )));
        }
        let input: Vec<Vec<f64>> = window.iter().map(|p| self.normalize(*p).to_vec()).collect();
        let y = self.model.predict(&input)?;
        Ok(GeoPoint::clamped(
            self.bounds[0].denormalize(y[0]),
            self.bounds[1].denormalize(y[1]),
        ))
    }

    /// Predicts normalised coordinates for an already normalised window.
    pub fn predict_normalized(&self, input: &[[f64; 2]]) -> Result<[f64; 2]> {
        let y = self.model.predict(&window_input(input))?;
        Ok([y[0], y[1]])
    }

    pub fn evaluate(&self, test: &WindowedDataset) -> Result<EvalReport> {
        if test.is_empty() {
            return Err(Error::Shape("evaluation over an empty test set".into()));
        }
        let mut errors = Vec::with_capacity(2 * test.len());
        for w in &test.windows {
            let y = self.predict_normalized(&w.input)?;
            errors.push(y[0] - w.target[0]);
            errors.push(y[1] - w.target[1]);
        }
        EvalReport::from_errors(errors)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        nn::checkpoint::save(path, CHECKPOINT_KIND, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        nn::checkpoint::load(path, CHECKPOINT_KIND)
    }
}
