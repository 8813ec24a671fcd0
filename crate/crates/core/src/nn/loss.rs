use super::check_len;
use crate::error::{Error, Result};

/// Mean squared error over every scalar in `pred`, and its gradient
/// `2 (pred - target) / n_elements` in the same shape.
pub fn mse_loss(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    check_len("mse batch", target.len(), pred.len())?;
    let n: usize = pred.iter().map(|p| p.len()).sum();
    if n == 0 {
        return Err(Error::Shape("mse over zero elements".into()));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target) {
        check_len("mse element", t.len(), p.len())?;
        let g = p
            .iter()
            .zip(t)
            .map(|(a, b)| {
                let d = a - b;
                loss += d * d;
                2.0 * d / n as f64
            })
            .collect();
        grad.push(g);
    }
    Ok((loss / n as f64, grad))
}
