//! LSTM layer with full backpropagation through time.
//!
//! Gate pre-activations are stacked `[i; f; g; o]`, each `hidden` rows:
//!
//! ```text
//! i = sigmoid(W_i x + U_i h_prev + b_i)     f = sigmoid(W_f x + U_f h_prev + b_f)
//! g = tanh   (W_g x + U_g h_prev + b_g)     o = sigmoid(W_o x + U_o h_prev + b_o)
//! c = f * c_prev + i * g                     h = o * tanh(c)
//! ```

use serde::{Deserialize, Serialize};

use super::{check_len, matvec_add, matvec_t_add, outer_add, sigmoid, uniform_init, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// Input weights, `4H x I`.
    pub w_x: Vec<f64>,
    /// Recurrent weights, `4H x H`.
    pub w_h: Vec<f64>,
    /// Biases, `4H`.
    pub b: Vec<f64>,
}

/// Activations of one time step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub type TapeCache = Vec<CellCache>;

#[derive(Debug, Clone)]
pub struct LstmForward {
    pub hidden: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub cache: TapeCache,
}

#[derive(Debug, Clone)]
pub struct LstmBackward {
    pub dx: Vec<Vec<f64>>,
    pub dh0: Vec<f64>,
    pub dc0: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            input_size,
            hidden_size,
            w_x: vec![0.0; 4 * hidden_size * input_size],
            w_h: vec![0.0; 4 * hidden_size * hidden_size],
            b: vec![0.0; 4 * hidden_size],
        }
    }

    /// Uniform `±1/sqrt(input + hidden)` weights and biases, forget-gate bias 1.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut Rng) -> Self {
        let fan_in = input_size + hidden_size;
        let mut p = LstmParams {
            input_size,
            hidden_size,
            w_x: uniform_init(4 * hidden_size * input_size, fan_in, rng),
            w_h: uniform_init(4 * hidden_size * hidden_size, fan_in, rng),
            b: uniform_init(4 * hidden_size, fan_in, rng),
        };
        p.gate_bias_mut(Gate::Forget).fill(FORGET_BIAS_INIT);
        p
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let h = self.hidden_size;
        &self.b[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_size;
        &mut self.b[gate as usize * h..(gate as usize + 1) * h]
    }

    /// Input weights of one gate, `H x I`.
    pub fn gate_input_weights(&self, gate: Gate) -> &[f64] {
        let n = self.hidden_size * self.input_size;
        &self.w_x[gate as usize * n..(gate as usize + 1) * n]
    }

    /// Recurrent weights of one gate, `H x H`.
    pub fn gate_recurrent_weights(&self, gate: Gate) -> &[f64] {
        let n = self.hidden_size * self.hidden_size;
        &self.w_h[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size;
        check_len("lstm w_x", self.w_x.len(), 4 * h * self.input_size)?;
        check_len("lstm w_h", self.w_h.len(), 4 * h * h)?;
        check_len("lstm bias", self.b.len(), 4 * h)
    }

    pub fn cell_forward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
        let h = self.hidden_size;
        check_len("lstm input", x.len(), self.input_size)?;
        check_len("lstm h_prev", h_prev.len(), h)?;
        check_len("lstm c_prev", c_prev.len(), h)?;

        let mut z = self.b.clone();
        matvec_add(&self.w_x, self.input_size, x, &mut z);
        matvec_add(&self.w_h, h, h_prev, &mut z);

        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();

        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();

        let cache = CellCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c: c.clone(),
            tanh_c,
        };
        Ok((h_new, c, cache))
    }

    pub fn forward(&self, seq: &[Vec<f64>], h0: &[f64], c0: &[f64]) -> Result<LstmForward> {
        if seq.is_empty() {
            return Err(Error::Shape("lstm over an empty sequence".into()));
        }
        let mut h = h0.to_vec();
        let mut c = c0.to_vec();
        let mut hidden = Vec::with_capacity(seq.len());
        let mut cache = Vec::with_capacity(seq.len());
        for x in seq {
            let (h_new, c_new, step) = self.cell_forward(x, &h, &c)?;
            hidden.push(h_new.clone());
            cache.push(step);
            h = h_new;
            c = c_new;
        }
        Ok(LstmForward {
            hidden,
            h,
            c,
            cache,
        })
    }

    pub fn forward_from_zero(&self, seq: &[Vec<f64>]) -> Result<LstmForward> {
        let z = vec![0.0; self.hidden_size];
        self.forward(seq, &z, &z)
    }

    /// Backpropagation through time. `dhidden[t]` is the upstream gradient on
    /// the hidden output of step `t`; `dc_final` is the gradient on the final
    /// cell state. Parameter gradients accumulate into `grads`.
    pub fn backward(
        &self,
        cache: &TapeCache,
        dhidden: &[Vec<f64>],
        dc_final: Option<&[f64]>,
        grads: &mut LstmParams,
    ) -> Result<LstmBackward> {
        let h = self.hidden_size;
        let t_len = cache.len();
        check_len("lstm upstream gradients", dhidden.len(), t_len)?;
        if t_len == 0 {
            return Err(Error::Shape("lstm backward over an empty cache".into()));
        }
        let mut dh_next = vec![0.0; h];
        let mut dc_next = match dc_final {
            Some(dc) => {
                check_len("lstm dc_final", dc.len(), h)?;
                dc.to_vec()
            }
            None => vec![0.0; h],
        };
        let mut dx = vec![Vec::new(); t_len];
        let mut dz = vec![0.0; 4 * h];

        for t in (0..t_len).rev() {
            let s = &cache[t];
            check_len("lstm upstream gradient", dhidden[t].len(), h)?;
            for k in 0..h {
                let dh = dhidden[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                let di = dc * s.g[k];
                let dg = dc * s.i[k];
                let df = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                dz[k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[h + k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2 * h + k] = dg * (1.0 - s.g[k] * s.g[k]);
                dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            outer_add(&mut grads.w_x, self.input_size, &dz, &s.x);
            outer_add(&mut grads.w_h, h, &dz, &s.h_prev);
            for (b, d) in grads.b.iter_mut().zip(&dz) {
                *b += d;
            }
            let mut dxt = vec![0.0; self.input_size];
            matvec_t_add(&self.w_x, self.input_size, &dz, &mut dxt);
            dx[t] = dxt;
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(&self.w_h, h, &dz, &mut dh_next);
        }
        Ok(LstmBackward {
            dx,
            dh0: dh_next,
            dc0: dc_next,
        })
    }
}

impl Parameterized for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w_x, &self.w_h, &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}
