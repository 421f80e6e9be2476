use crate::error::{Error, Result};

/// Outputs are clamped into `[EPSILON, 1 - EPSILON]` before taking logs.
pub const EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over all slots.
pub fn bce_loss(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() || output.is_empty() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: output.len() });
    }
    let sum: f64 = output
        .iter()
        .zip(target)
        .map(|(&o, &t)| {
            let o = o.clamp(EPSILON, 1.0 - EPSILON);
            -(t * libm::log(o) + (1.0 - t) * libm::log(1.0 - o))
        })
        .sum();
    Ok(sum / output.len() as f64)
}
