//! Temporal and positional encodings, and assembly of the per-interaction
//! embedding `e_j = [p_j; τ(t_j); ρ(j)]`.
//!
//! Sinusoid digits follow the transformer convention with the encoding
//! length as frequency divisor: `out[2m] = sin(t / max_scale^(2m/dim))`,
//! `out[2m+1] = cos(…)`. One-hot and two-hot encodings use exponential
//! buckets `[0, b), [b, b²), …, [b^(k−1), ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    None,
    Sinusoid,
    Onehot,
    Twohot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub kind: EncodingKind,
    /// Sinusoid vector length; must be even.
    pub dim: usize,
    /// `τ_max` / `ρ_max`.
    pub max_scale: f64,
    /// Bucket base `b` for one-hot/two-hot.
    pub base: f64,
    /// Bucket count `k` for one-hot/two-hot.
    pub bucket_count: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            kind: EncodingKind::Sinusoid,
            dim: 8,
            max_scale: 1e4,
            base: 2.0,
            bucket_count: 16,
        }
    }
}

impl EncodingConfig {
    pub fn none() -> Self {
        Self {
            kind: EncodingKind::None,
            ..Self::default()
        }
    }

    pub fn sinusoid(dim: usize) -> Self {
        Self {
            kind: EncodingKind::Sinusoid,
            dim,
            ..Self::default()
        }
    }

    pub fn onehot(base: f64, bucket_count: usize) -> Self {
        Self {
            kind: EncodingKind::Onehot,
            base,
            bucket_count,
            ..Self::default()
        }
    }

    pub fn twohot(base: f64, bucket_count: usize) -> Self {
        Self {
            kind: EncodingKind::Twohot,
            base,
            bucket_count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EncodingKind::None => Ok(()),
            EncodingKind::Sinusoid => {
                if self.dim < 2 || !self.dim.is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "sinusoid encoding dim must be even and >= 2, got {}",
                        self.dim
                    )));
                }
                if !(self.max_scale > 0.0) {
                    return Err(Error::Config("sinusoid max_scale must be positive".into()));
                }
                Ok(())
            }
            EncodingKind::Onehot | EncodingKind::Twohot => {
                if !(self.base > 1.0) {
                    return Err(Error::Config(format!("bucket base must exceed 1, got {}", self.base)));
                }
                if self.bucket_count < 2 {
                    return Err(Error::Config(format!(
                        "bucket_count must be >= 2, got {}",
                        self.bucket_count
                    )));
                }
                Ok(())
            }
        }
    }

    /// Length of the produced vector (0 for `none`).
    pub fn output_dim(&self) -> usize {
        match self.kind {
            EncodingKind::None => 0,
            EncodingKind::Sinusoid => self.dim,
            EncodingKind::Onehot | EncodingKind::Twohot => self.bucket_count,
        }
    }

    /// Encodes `t` (days for temporal, position for positional).
    pub fn encode(&self, t: f64) -> Result<Vec<f64>> {
        match self.kind {
            EncodingKind::None => Ok(Vec::new()),
            EncodingKind::Sinusoid => sinusoid_encode(t, self),
            EncodingKind::Onehot => Ok(onehot_encode(t, self)),
            EncodingKind::Twohot => twohot_encode(t, self),
        }
    }

    /// Encodes a whole sequence into an `n × output_dim` matrix.
    pub fn encode_all(&self, values: impl IntoIterator<Item = f64>) -> Result<Matrix> {
        let dim = self.output_dim();
        let mut data = Vec::new();
        let mut n = 0;
        for v in values {
            data.extend(self.encode(v)?);
            n += 1;
        }
        Matrix::from_vec(n, dim, data)
    }
}

pub fn sinusoid_encode(t: f64, cfg: &EncodingConfig) -> Result<Vec<f64>> {
    if !cfg.dim.is_multiple_of(2) {
        return Err(Error::Config(format!("sinusoid dim must be even, got {}", cfg.dim)));
    }
    let mut out = Vec::with_capacity(cfg.dim);
    for m in 0..cfg.dim / 2 {
        let freq_exp = (2 * m) as f64 / cfg.dim as f64;
        let angle = t / cfg.max_scale.powf(freq_exp);
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

/// Index of the exponential bucket holding `t`: bucket 0 is `[0, b)`,
/// bucket `i ≥ 1` is `[b^i, b^(i+1))`, and the last bucket is open-ended.
fn bucket_index(t: f64, base: f64, count: usize) -> usize {
    if t < base {
        return 0;
    }
    let mut i = (t.ln() / base.ln()).floor() as usize;
    // Correct for rounding in the log ratio near bucket edges.
    while i > 0 && base.powi(i as i32) > t {
        i -= 1;
    }
    while base.powi(i as i32 + 1) <= t && i < count {
        i += 1;
    }
    i.min(count - 1)
}

pub fn onehot_encode(t: f64, cfg: &EncodingConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.bucket_count];
    out[bucket_index(t.max(0.0), cfg.base, cfg.bucket_count)] = 1.0;
    out
}

/// Two-hot split between neighbouring boundaries `b^i ≤ t < b^(i+1)`:
/// `τ_i = log_b(t) − i`, `τ_(i+1) = i + 1 − log_b(t)`.
///
/// `t = 0` (and anything below the first boundary `b^0 = 1`) puts all mass on
/// entry 0. Beyond the last boundary the mass saturates on the last entry.
pub fn twohot_encode(t: f64, cfg: &EncodingConfig) -> Result<Vec<f64>> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Validation(format!("two-hot needs a finite t >= 0, got {t}")));
    }
    let k = cfg.bucket_count;
    let mut out = vec![0.0; k];
    if t < 1.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let log = t.ln() / cfg.base.ln();
    let mut i = log.floor();
    // Exact powers: log_b(b^i) may land a hair under the integer.
    if (log - log.round()).abs() < 1e-12 {
        i = log.round();
    }
    let frac = (log - i).clamp(0.0, 1.0);
    let i = i as usize;
    if i + 1 >= k {
        out[k - 1] = 1.0;
        return Ok(out);
    }
    out[i] = frac;
    out[i + 1] = 1.0 - frac;
    Ok(out)
}

/// `[p; τ(t); ρ(position)]`, with absent blocks omitted.
pub fn build_interaction_embedding(
    item: &[f64],
    t: f64,
    position: usize,
    temporal: &EncodingConfig,
    positional: &EncodingConfig,
) -> Result<Vec<f64>> {
    let mut e = Vec::with_capacity(item.len() + temporal.output_dim() + positional.output_dim());
    e.extend_from_slice(item);
    e.extend(temporal.encode(t)?);
    e.extend(positional.encode(position as f64)?);
    Ok(e)
}

/// Sequence-level encodings: `(τ block, ρ block)` as `l × dim` matrices.
pub fn encode_sequence(
    timestamps: &[f64],
    temporal: &EncodingConfig,
    positional: &EncodingConfig,
) -> Result<(Matrix, Matrix)> {
    let tau = temporal.encode_all(timestamps.iter().copied())?;
    let rho = positional.encode_all((0..timestamps.len()).map(|j| j as f64))?;
    Ok((tau, rho))
}

/// Row-wise concatenation `[P | T | R]`.
pub fn concat_blocks(item: &Matrix, tau: &Matrix, rho: &Matrix) -> Result<Matrix> {
    let l = item.rows();
    if tau.rows() != l || rho.rows() != l {
        return Err(Error::Validation(format!(
            "encoding blocks have {} / {} rows for a sequence of length {l}",
            tau.rows(),
            rho.rows()
        )));
    }
    let width = item.cols() + tau.cols() + rho.cols();
    let mut e = Matrix::zeros(l, width);
    for j in 0..l {
        let row = e.row_mut(j);
        row[..item.cols()].copy_from_slice(item.row(j));
        row[item.cols()..item.cols() + tau.cols()].copy_from_slice(tau.row(j));
        row[item.cols() + tau.cols()..].copy_from_slice(rho.row(j));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_at_zero() {
        assert_eq!(sinusoid_encode(0.0, &EncodingConfig::sinusoid(4)).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn sinusoid_dim_two_at_one() {
        let v = sinusoid_encode(1.0, &EncodingConfig::sinusoid(2)).unwrap();
        assert!((v[0] - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!((v[1] - 0.540_302_305_868_139_7).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_rejects_odd_dim() {
        let cfg = EncodingConfig::sinusoid(3);
        assert!(matches!(sinusoid_encode(1.0, &cfg), Err(Error::Config(_))));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn onehot_buckets() {
        let cfg = EncodingConfig::onehot(2.0, 4);
        assert_eq!(onehot_encode(0.0, &cfg), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(onehot_encode(5.0, &cfg), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(onehot_encode(1e9, &cfg), vec![0.0, 0.0, 0.0, 1.0]);
        // Boundary enumeration: b^i opens bucket i.
        assert_eq!(onehot_encode(1.999, &cfg)[0], 1.0);
        assert_eq!(onehot_encode(2.0, &cfg)[1], 1.0);
        assert_eq!(onehot_encode(4.0, &cfg)[2], 1.0);
        assert_eq!(onehot_encode(8.0, &cfg)[3], 1.0);
    }

    #[test]
    fn twohot_exact_power_and_midpoint() {
        let cfg = EncodingConfig::twohot(2.0, 8);
        for i in 0..6 {
            let v = twohot_encode(2f64.powi(i), &cfg).unwrap();
            let mut expected = vec![0.0; 8];
            expected[i as usize + 1] = 1.0;
            assert_eq!(v, expected, "t = 2^{i}");
            let mid = twohot_encode(2f64.sqrt() * 2f64.powi(i), &cfg).unwrap();
            assert!((mid[i as usize] - 0.5).abs() < 1e-12);
            assert!((mid[i as usize + 1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn twohot_zero_and_negative() {
        let cfg = EncodingConfig::twohot(2.0, 4);
        assert_eq!(twohot_encode(0.0, &cfg).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(twohot_encode(-1.0, &cfg), Err(Error::Validation(_))));
        assert_eq!(twohot_encode(1e12, &cfg).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn embedding_blocks() {
        let none = EncodingConfig::none();
        let p = [0.3, -0.2];
        assert_eq!(build_interaction_embedding(&p, 5.0, 3, &none, &none).unwrap(), p.to_vec());
        let s2 = EncodingConfig::sinusoid(2);
        let e = build_interaction_embedding(&p, 0.0, 0, &s2, &s2).unwrap();
        assert_eq!(e, vec![0.3, -0.2, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn four_ablation_arms_have_distinct_lengths() {
        let none = EncodingConfig::none();
        let pos = EncodingConfig::sinusoid(4);
        let tmp = EncodingConfig::sinusoid(6);
        let p = [0.0; 3];
        let lens: Vec<usize> = [(none, none), (none, pos), (tmp, none), (tmp, pos)]
            .iter()
            .map(|(t, r)| build_interaction_embedding(&p, 1.0, 1, t, r).unwrap().len())
            .collect();
        assert_eq!(lens, vec![3, 7, 9, 13]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sinusoid_pairs_on_unit_circle(t in 0.0f64..1e6, half in 1usize..16) {
                let v = sinusoid_encode(t, &EncodingConfig::sinusoid(2 * half)).unwrap();
                for pair in v.chunks(2) {
                    prop_assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn twohot_is_a_distribution(t in 0.0f64..1e7, base in 1.5f64..4.0, k in 2usize..20) {
                let v = twohot_encode(t, &EncodingConfig::twohot(base, k)).unwrap();
                prop_assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let nz: Vec<usize> = (0..k).filter(|&i| v[i] != 0.0).collect();
                prop_assert!(nz.len() <= 2);
                if nz.len() == 2 { prop_assert_eq!(nz[1], nz[0] + 1); }
            }

            #[test]
            fn onehot_has_one_hot_entry(t in 0.0f64..1e9) {
                let v = onehot_encode(t, &EncodingConfig::onehot(2.0, 16));
                prop_assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
                prop_assert_eq!(v.iter().sum::<f64>(), 1.0);
            }
        }
    }
}
