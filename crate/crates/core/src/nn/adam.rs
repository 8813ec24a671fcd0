use serde::{Deserialize, Serialize};

use super::{check_len, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// First/second moment estimates laid out like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: Parameterized>(config: AdamConfig, params: &P) -> Result<Self> {
        let in_range = |b: f64| b > 0.0 && b < 1.0;
        if !in_range(config.beta1)
            || !in_range(config.beta2)
            || config.lr < 0.0
            || config.eps <= 0.0
        {
            return Err(Error::Config(format!(
                "invalid Adam hyperparameters {config:?}"
            )));
        }
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        Ok(AdamState {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        })
    }

    /// One bias-corrected Adam update of `params` using `grads`.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.tensors();
        let mut ps = params.tensors_mut();
        check_len("adam tensor count", ps.len(), self.m.len())?;
        check_len("adam gradient tensor count", gs.len(), self.m.len())?;
        for (k, (p, g)) in ps.iter().zip(&gs).enumerate() {
            check_len("adam parameter tensor", p.len(), self.m[k].len())?;
            check_len("adam gradient tensor", g.len(), self.m[k].len())?;
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (p, g)) in ps.iter_mut().zip(gs).enumerate() {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseParams;

    fn params() -> DenseParams {
        let mut p = DenseParams::zeros(2, 2);
        p.weights = vec![0.5, -0.25, 1.0, 2.0];
        p.bias = vec![0.1, -0.1];
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = params();
        let g = p.zeros_like();
        let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
        for _ in 0..5 {
            st.step(&mut p, &g).unwrap();
        }
        assert_eq!(p, params());
        assert!(st.m.iter().chain(&st.v).flatten().all(|v| *v == 0.0));
        assert_eq!(st.t, 5);
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.fill(0.3);
        let mut st = AdamState::new(AdamConfig::with_lr(0.0), &p).unwrap();
        st.step(&mut p, &g).unwrap();
        assert_eq!(p, params());
    }

    #[test]
    fn constant_gradient_step_tends_to_lr_sign() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.weights = vec![0.3, -2.0, 1e-3, -7.0];
        g.bias = vec![5.0, -0.01];
        let lr = 1e-3;
        let mut st = AdamState::new(AdamConfig::with_lr(lr), &p).unwrap();
        for _ in 0..999 {
            st.step(&mut p, &g).unwrap();
        }
        let before = p.clone();
        st.step(&mut p, &g).unwrap();
        for (a, (b, gv)) in p.weights.iter().chain(&p.bias).zip(
            before
                .weights
                .iter()
                .chain(&before.bias)
                .zip(g.weights.iter().chain(&g.bias)),
        ) {
            let step = b - a;
            let expected = lr * gv.signum();
            assert!((step - expected).abs() <= 0.01 * lr, "{step} vs {expected}");
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = params();
            let mut g = p.zeros_like();
            g.weights = vec![0.1, 0.2, 0.3, 0.4];
            let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
            for k in 0..50 {
                g.bias = vec![(k as f64).sin(), (k as f64).cos()];
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        for (x, y) in a
            .weights
            .iter()
            .chain(&a.bias)
            .zip(b.weights.iter().chain(&b.bias))
        {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = params();
        let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
        let g = DenseParams::zeros(3, 2);
        assert!(st.step(&mut p, &g).is_err());
    }
}
