//! Multi-head, cluster-masked attention over a single interaction sequence,
//! with a hand-written backward pass.
//!
//! Conventions: rows are sequence positions. For head `h`,
//! `Q = E·Wq + bq`, `K = E·Wk + bk` and `S[i][j] = k_i·q_j / √d_model`
//! (key `i`, query `j`). Weights are normalized over the key index for each
//! query, the mask is applied after the softmax without renormalization, and
//! values are the raw item embeddings: `φ^h_j = Σ_i A[i][j]·M[i][j]·p_i`.

use serde::{Deserialize, Serialize};

use crate::clustering::Mask;
use crate::error::{Error, Result};
use crate::ffn::{ffn_backward, ffn_forward, glorot, FfnCache, FfnIds};
use crate::numerics::{GradBuffer, Matrix, ParamId, ParamSet, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadIds {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
}

impl HeadIds {
    pub fn register(params: &mut ParamSet, head: usize, d_e: usize, d_model: usize, rng: &mut Rng) -> Self {
        Self {
            wq: params.add(format!("head{head}.wq"), glorot(d_e, d_model, rng), true),
            bq: params.add(format!("head{head}.bq"), Matrix::zeros(1, d_model), true),
            wk: params.add(format!("head{head}.wk"), glorot(d_e, d_model, rng), true),
            bk: params.add(format!("head{head}.bk"), Matrix::zeros(1, d_model), true),
        }
    }

    pub fn all(&self) -> [ParamId; 4] {
        [self.wq, self.bq, self.wk, self.bk]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderIds {
    pub heads: Vec<HeadIds>,
    pub fuse: FfnIds,
}

/// `E·W + b`.
pub fn project(e: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    let mut out = e.mm(w);
    out.add_row_broadcast(b);
    out
}

/// `S[i][j] = k_i·q_j / √d_model` from already projected queries and keys.
pub fn scores_from_projections(q: &Matrix, k: &Matrix) -> Matrix {
    let mut s = k.mm_nt(q);
    s.scale(1.0 / (q.cols() as f64).sqrt());
    s
}

pub fn attention_scores(e: &Matrix, params: &ParamSet, head: &HeadIds) -> Matrix {
    let q = project(e, params.value(head.wq), params.value(head.bq));
    let k = project(e, params.value(head.wk), params.value(head.bk));
    scores_from_projections(&q, &k)
}

/// Softmax down each column: for every query `j`, `Σ_i A[i][j] = 1`.
pub fn attention_weights(s: &Matrix) -> Matrix {
    let (rows, cols) = s.shape();
    let mut a = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let max = (0..rows).map(|i| s[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for i in 0..rows {
            let v = (s[(i, j)] - max).exp();
            a[(i, j)] = v;
            sum += v;
        }
        for i in 0..rows {
            a[(i, j)] /= sum;
        }
    }
    a
}

fn apply_mask(a: &Matrix, mask: &Mask) -> Matrix {
    let mut am = a.clone();
    if !mask.is_all_ones() {
        let n = a.rows();
        for i in 0..n {
            for j in 0..n {
                if !mask.get(i, j) {
                    am[(i, j)] = 0.0;
                }
            }
        }
    }
    am
}

/// `φ = (A∘M)ᵀ·P`, one row per query position.
pub fn context_vectors(a: &Matrix, mask: &Mask, p: &Matrix) -> Matrix {
    apply_mask(a, mask).mm_tn(p)
}

/// Inverted-dropout scale factors (`0` or `1/(1-rate)`); `None` when the rate
/// is zero, in which case no random numbers are drawn.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Option<Matrix> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Some(Matrix::from_vec(rows, cols, data).expect("length matches"))
}

fn concat_heads(phis: &[Matrix]) -> Matrix {
    let rows = phis[0].rows();
    let d = phis[0].cols();
    let mut c = Matrix::zeros(rows, d * phis.len());
    for (h, phi) in phis.iter().enumerate() {
        for r in 0..rows {
            c.row_mut(r)[h * d..(h + 1) * d].copy_from_slice(phi.row(r));
        }
    }
    c
}

/// Concatenates the heads, applies dropout, then the fusion FFN.
pub fn fuse_heads(phis: &[Matrix], params: &ParamSet, ffn: &FfnIds, dropout: Option<&Matrix>) -> Matrix {
    let mut c = concat_heads(phis);
    if let Some(m) = dropout {
        for (x, s) in c.data_mut().iter_mut().zip(m.data()) {
            *x *= s;
        }
    }
    ffn_forward(params, ffn, c).output
}

/// Activations kept from the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    e: Matrix,
    p: Matrix,
    mask: Mask,
    q: Vec<Matrix>,
    k: Vec<Matrix>,
    a: Vec<Matrix>,
    dropout: Option<Matrix>,
    ffn: FfnCache,
}

impl AttentionCache {
    /// Fused context vectors `φ`, `l × d`.
    pub fn phi(&self) -> &Matrix {
        &self.ffn.output
    }

    /// Attention weights of head `h` (before masking).
    pub fn weights(&self, h: usize) -> &Matrix {
        &self.a[h]
    }

    /// Per-head context vectors, recomputed from the cached weights.
    pub fn head_contexts(&self) -> Vec<Matrix> {
        self.a.iter().map(|a| context_vectors(a, &self.mask, &self.p)).collect()
    }
}

/// Runs every head and the fusion FFN. `p` holds the raw item embeddings
/// (`l × d`) and `e` the full interaction embeddings (`l × d_e`).
pub fn encoder_forward(
    params: &ParamSet,
    ids: &EncoderIds,
    p: &Matrix,
    e: &Matrix,
    mask: Mask,
    dropout: Option<Matrix>,
) -> AttentionCache {
    let heads = ids.heads.len();
    let (mut qs, mut ks, mut as_, mut phis) = (
        Vec::with_capacity(heads),
        Vec::with_capacity(heads),
        Vec::with_capacity(heads),
        Vec::with_capacity(heads),
    );
    for head in &ids.heads {
        let q = project(e, params.value(head.wq), params.value(head.bq));
        let k = project(e, params.value(head.wk), params.value(head.bk));
        let a = attention_weights(&scores_from_projections(&q, &k));
        phis.push(context_vectors(&a, &mask, p));
        qs.push(q);
        ks.push(k);
        as_.push(a);
    }
    let mut c = concat_heads(&phis);
    if let Some(m) = &dropout {
        for (x, s) in c.data_mut().iter_mut().zip(m.data()) {
            *x *= s;
        }
    }
    let ffn = ffn_forward(params, &ids.fuse, c);
    AttentionCache {
        e: e.clone(),
        p: p.clone(),
        mask,
        q: qs,
        k: ks,
        a: as_,
        dropout,
        ffn,
    }
}

/// Gradients with respect to the encoder inputs.
#[derive(Clone, Debug)]
pub struct InputGrads {
    /// Through the value path, `l × d`.
    pub d_values: Matrix,
    /// Through the query/key path, `l × d_e`.
    pub d_embeddings: Matrix,
}

impl InputGrads {
    /// Total gradient on the item embeddings: value path plus the item block
    /// of the interaction embeddings.
    pub fn d_items(&self) -> Matrix {
        let mut d = self.d_values.clone();
        for r in 0..d.rows() {
            for (x, g) in d.row_mut(r).iter_mut().zip(self.d_embeddings.row(r)) {
                *x += g;
            }
        }
        d
    }
}

/// Backpropagates `∂L/∂φ` through the encoder, accumulating into `grads`.
pub fn encoder_backward(
    params: &ParamSet,
    ids: &EncoderIds,
    cache: &AttentionCache,
    d_phi: &Matrix,
    grads: &mut GradBuffer,
) -> InputGrads {
    let mut d_c = ffn_backward(params, &ids.fuse, &cache.ffn, d_phi, grads);
    if let Some(m) = &cache.dropout {
        for (x, s) in d_c.data_mut().iter_mut().zip(m.data()) {
            *x *= s;
        }
    }
    let l = cache.p.rows();
    let d = cache.p.cols();
    let mut d_values = Matrix::zeros(l, d);
    let mut d_embeddings = Matrix::zeros(l, cache.e.cols());

    for (h, head) in ids.heads.iter().enumerate() {
        let mut d_phi_h = Matrix::zeros(l, d);
        for r in 0..l {
            d_phi_h.row_mut(r).copy_from_slice(&d_c.row(r)[h * d..(h + 1) * d]);
        }
        let a = &cache.a[h];
        let am = apply_mask(a, &cache.mask);
        d_values.add_assign(&am.mm(&d_phi_h));

        // dA[i][j] = M[i][j]·(p_i·dφ_j); then the column-softmax Jacobian.
        let d_a = apply_mask(&cache.p.mm_nt(&d_phi_h), &cache.mask);
        let mut d_s = Matrix::zeros(l, l);
        for j in 0..l {
            let inner: f64 = (0..l).map(|i| a[(i, j)] * d_a[(i, j)]).sum();
            for i in 0..l {
                d_s[(i, j)] = a[(i, j)] * (d_a[(i, j)] - inner);
            }
        }
        let inv = 1.0 / (cache.q[h].cols() as f64).sqrt();
        let mut d_k = d_s.mm(&cache.q[h]);
        d_k.scale(inv);
        let mut d_q = d_s.mm_tn(&cache.k[h]);
        d_q.scale(inv);

        for (d_proj, w, b) in [(&d_q, head.wq, head.bq), (&d_k, head.wk, head.bk)] {
            if let Some(g) = grads.get_mut(w) {
                g.add_assign(&cache.e.mm_tn(d_proj));
            }
            if let Some(g) = grads.get_mut(b) {
                g.add_assign(&d_proj.col_sums());
            }
            d_embeddings.add_assign(&d_proj.mm_nt(params.value(w)));
        }
    }
    InputGrads {
        d_values,
        d_embeddings,
    }
}

/// Stateful wrapper holding the last forward cache, so a backward call
/// without a preceding forward is reported rather than silently wrong.
#[derive(Debug, Default)]
pub struct Encoder {
    cache: Option<AttentionCache>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(
        &mut self,
        params: &ParamSet,
        ids: &EncoderIds,
        p: &Matrix,
        e: &Matrix,
        mask: Mask,
        dropout: Option<Matrix>,
    ) -> &Matrix {
        self.cache.insert(encoder_forward(params, ids, p, e, mask, dropout)).phi()
    }

    /// Consumes the cached forward pass.
    pub fn backward(&mut self, params: &ParamSet, ids: &EncoderIds, d_phi: &Matrix, grads: &mut GradBuffer) -> Result<InputGrads> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("encoder backward called without a cached forward pass".into()))?;
        Ok(encoder_backward(params, ids, &cache, d_phi, grads))
    }
}
