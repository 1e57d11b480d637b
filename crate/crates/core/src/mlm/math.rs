//! Numeric primitives shared by the encoder: shift-invariant softmax, argmax
//! with the smallest-index tie rule, GELU and layer normalization.

use ndarray::{Array1, ArrayView1};

use super::{MlmError, LAYER_NORM_EPS};

/// Shift-invariant softmax: subtracting the maximum before exponentiation
/// keeps the largest exponent at zero so overflow cannot occur.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>, MlmError> {
    if values.is_empty() {
        return Err(MlmError::EmptyInput("softmax"));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(MlmError::NonFinite("softmax"));
    }
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// The same kernel without validation, used on attention score rows and
/// logit rows inside the forward pass.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Smallest index attaining the maximum.
pub fn argmax_select(values: &[f64]) -> Result<usize, MlmError> {
    if values.is_empty() {
        return Err(MlmError::EmptyInput("argmax"));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(MlmError::NonFinite("argmax"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

const GELU_COEF: f64 = 0.044_715;

fn sqrt_2_over_pi() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    let u = sqrt_2_over_pi() * (x + GELU_COEF * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

/// Analytic derivative of [`gelu`].
pub fn gelu_grad(x: f64) -> f64 {
    let c = sqrt_2_over_pi();
    let u = c * (x + GELU_COEF * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * GELU_COEF * x * x)
}

/// Row layer norm: returns (normalized row pre-gain, reciprocal std). The
/// caller applies gain and bias; backward reuses both outputs.
pub fn layer_norm_row(x: ArrayView1<f64>) -> (Array1<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    let xhat = x.mapv(|v| (v - mean) * rstd);
    (xhat, rstd)
}
