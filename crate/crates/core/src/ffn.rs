//! Two fully connected layers with a tanh between them, applied row-wise:
//! `out = tanh(x·W1 + b1)·W2 + b2`.

use serde::{Deserialize, Serialize};

use crate::numerics::{GradBuffer, Matrix, ParamId, ParamSet, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfnIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FfnIds {
    /// Registers `{prefix}.w1/b1/w2/b2` with Glorot-uniform weights and zero
    /// biases.
    pub fn register(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            w1: params.add(format!("{prefix}.w1"), glorot(input, hidden, rng), true),
            b1: params.add(format!("{prefix}.b1"), Matrix::zeros(1, hidden), true),
            w2: params.add(format!("{prefix}.w2"), glorot(hidden, output, rng), true),
            b2: params.add(format!("{prefix}.b2"), Matrix::zeros(1, output), true),
        }
    }

    pub fn all(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// Uniform in `±√(6 / (fan_in + fan_out))`, stored `fan_in × fan_out`.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.uniform_matrix(fan_in, fan_out, -limit, limit)
}

#[derive(Clone, Debug)]
pub struct FfnCache {
    pub input: Matrix,
    pub hidden: Matrix,
    pub output: Matrix,
}

pub fn ffn_forward(params: &ParamSet, ids: &FfnIds, input: Matrix) -> FfnCache {
    let mut hidden = input.mm(params.value(ids.w1));
    hidden.add_row_broadcast(params.value(ids.b1));
    let hidden = hidden.map(f64::tanh);
    let mut output = hidden.mm(params.value(ids.w2));
    output.add_row_broadcast(params.value(ids.b2));
    FfnCache { input, hidden, output }
}

/// Accumulates parameter gradients and returns `∂L/∂input`.
pub fn ffn_backward(params: &ParamSet, ids: &FfnIds, cache: &FfnCache, d_out: &Matrix, grads: &mut GradBuffer) -> Matrix {
    if let Some(g) = grads.get_mut(ids.w2) {
        g.add_assign(&cache.hidden.mm_tn(d_out));
    }
    if let Some(g) = grads.get_mut(ids.b2) {
        g.add_assign(&d_out.col_sums());
    }
    let mut d_pre = d_out.mm_nt(params.value(ids.w2));
    for (d, h) in d_pre.data_mut().iter_mut().zip(cache.hidden.data()) {
        *d *= 1.0 - h * h;
    }
    if let Some(g) = grads.get_mut(ids.w1) {
        g.add_assign(&cache.input.mm_tn(&d_pre));
    }
    if let Some(g) = grads.get_mut(ids.b1) {
        g.add_assign(&d_pre.col_sums());
    }
    d_pre.mm_nt(params.value(ids.w1))
}
