//! A small neural toolkit built directly on `Vec<f64>`: dense and LSTM layers
//! with hand-written reverse mode (including backpropagation through time),
//! MSE, Adam, global-norm clipping and a central-difference gradient checker.
//!
//! Matrices are row-major `Vec<f64>`. Backward passes *accumulate* into a
//! caller-provided gradient container of the same type as the parameters, so
//! a mini-batch is one zeroed container plus one backward call per sample.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod mlp;
pub mod regressor;

pub use adam::{AdamConfig, AdamState};
pub use dense::DenseParams;
pub use gradcheck::{grad_check, Differentiable};
pub use loss::mse_loss;
pub use lstm::{CellCache, LstmParams, TapeCache};
pub use mlp::Mlp;
pub use regressor::LstmRegressor;

/// Anything exposing its parameters as a fixed sequence of flat tensors.
///
/// `tensors` and `tensors_mut` must return tensors in the same order and with
/// the same lengths; gradient containers rely on that to line up with
/// parameters.
pub trait Parameterized {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = value);
        }
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Copies every tensor from `other`, which must have the same layout.
    fn copy_from(&mut self, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.copy_from_slice(src);
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm<P: Parameterized>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}

pub(crate) fn uniform_init(len: usize, fan_in: usize, rng: &mut Rng) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..=bound)).collect()
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

/// Dot product with four independent accumulators so it vectorises.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += W x` for a `rows x cols` row-major `W`.
#[inline]
pub(crate) fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `dx += W^T dz`, skipping zero entries of `dz`.
#[inline]
pub(crate) fn matvec_t_add(w: &[f64], cols: usize, dz: &[f64], dx: &mut [f64]) {
    for (&g, row) in dz.iter().zip(w.chunks_exact(cols)) {
        if g != 0.0 {
            for (d, a) in dx.iter_mut().zip(row) {
                *d += g * a;
            }
        }
    }
}

/// `G += dz x^T`, skipping zero entries of `dz`.
#[inline]
pub(crate) fn outer_add(g: &mut [f64], cols: usize, dz: &[f64], x: &[f64]) {
    for (&d, row) in dz.iter().zip(g.chunks_exact_mut(cols)) {
        if d != 0.0 {
            for (gv, xv) in row.iter_mut().zip(x) {
                *gv += d * xv;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
