//! Multi-field behavior encoding primitives: hashed bag-of-tokens text
//! encoding, periodic sine-cosine time features, and the amount transform.
//!
//! The trainable side (token tables, fusion projection) lives in the model;
//! this module holds the deterministic feature extraction.

use chrono::{DateTime, Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::data::PaymentBehavior;
use crate::nn::{Scalar, Tensor};

/// Width of the concatenated time features: four (cos, sin) pairs.
pub const TIME_FEATURES: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeConfig {
    pub hash_buckets: usize,
    pub token_dim: usize,
    pub d_model: usize,
    /// Share one token table between descriptions and merchant names.
    pub shared_token_table: bool,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig { hash_buckets: 8192, token_dim: 64, d_model: 128, shared_token_table: true }
    }
}

/// Hashed token vocabulary: FNV-1a 64-bit, modulo `hash_buckets`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenVocab {
    pub hash_buckets: usize,
    pub token_dim: usize,
}

impl TokenVocab {
    pub fn new(hash_buckets: usize, token_dim: usize) -> Self {
        assert!(hash_buckets >= 2, "hash_buckets must be >= 2");
        TokenVocab { hash_buckets, token_dim }
    }
}

impl From<&EncodeConfig> for TokenVocab {
    fn from(cfg: &EncodeConfig) -> Self {
        TokenVocab::new(cfg.hash_buckets, cfg.token_dim)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Lowercase, split on anything that is not alphanumeric, hash each token
/// into a bucket. Empty text gives an empty list.
pub fn tokenize_text(text: &str, vocab: &TokenVocab) -> Vec<u32> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| (fnv1a(t.as_bytes()) % vocab.hash_buckets as u64) as u32)
        .collect()
}

/// Mean of the token embedding rows; empty token lists give a zero vector.
pub fn encode_text<S: Scalar>(text: &str, vocab: &TokenVocab, table: &Tensor<S>) -> Tensor<S> {
    assert_eq!(table.shape()[0], vocab.hash_buckets, "table rows must equal hash_buckets");
    let dim = table.shape()[1];
    let tokens = tokenize_text(text, vocab);
    let mut out = Tensor::zeros(vec![dim]);
    if tokens.is_empty() {
        return out;
    }
    let inv = S::one() / S::from_f64(tokens.len() as f64);
    for t in tokens {
        for (o, &e) in out.data_mut().iter_mut().zip(table.row(t as usize)) {
            *o += e * inv;
        }
    }
    out
}

/// Periodic time features of one timestamp: (cos, sin) pairs for
/// month-of-year, day-of-month, day-of-week, and hour-of-day, in that order.
/// Calendar decomposition is fixed to UTC; day-of-month uses period 31.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub values: [f64; TIME_FEATURES],
}

impl TimeFeatures {
    pub fn pair(&self, i: usize) -> (f64, f64) {
        (self.values[2 * i], self.values[2 * i + 1])
    }
}

fn phase_pair(t: f64, period: f64) -> (f64, f64) {
    let angle = 2.0 * std::f64::consts::PI * t / period;
    (angle.cos(), angle.sin())
}

/// Sine-cosine time embedding of an epoch-second timestamp (UTC).
pub fn time_embed(ts: i64) -> TimeFeatures {
    let dt = DateTime::from_timestamp(ts, 0).expect("timestamp in range");
    let month = (dt.month0()) as f64; // [0, 12)
    let day = (dt.day0()) as f64; // [0, 31)
    let weekday = dt.weekday().num_days_from_monday() as f64; // [0, 7)
    let hour = dt.hour() as f64; // [0, 24)

    let mut values = [0.0; TIME_FEATURES];
    let pairs = [
        phase_pair(month, 12.0),
        phase_pair(day, 31.0),
        phase_pair(weekday, 7.0),
        phase_pair(hour, 24.0),
    ];
    for (i, (c, s)) in pairs.into_iter().enumerate() {
        values[2 * i] = c;
        values[2 * i + 1] = s;
    }
    TimeFeatures { values }
}

/// Train-split amount statistics frozen into the checkpoint. The amount
/// feature of a behavior is `(log1p(amount) - mu) / sigma`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AmountStats {
    pub mu: f64,
    pub sigma: f64,
}

impl AmountStats {
    /// Fit on the amounts of a training split.
    pub fn fit(amounts: impl Iterator<Item = f64>) -> Result<AmountStats, EncodeError> {
        let logs: Vec<f64> = amounts.map(|a| a.ln_1p()).collect();
        if logs.is_empty() {
            return Err(EncodeError::NoAmounts);
        }
        let n = logs.len() as f64;
        let mu = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n;
        let sigma = var.sqrt();
        let stats = AmountStats { mu, sigma };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.sigma < 1e-12 || !self.sigma.is_finite() || !self.mu.is_finite() {
            return Err(EncodeError::DegenerateAmounts { mu: self.mu, sigma: self.sigma });
        }
        Ok(())
    }

    pub fn transform(&self, amount: f64) -> f64 {
        (amount.ln_1p() - self.mu) / self.sigma
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("cannot fit amount statistics on an empty training split")]
    NoAmounts,
    #[error("degenerate training amounts (mu={mu}, sigma={sigma})")]
    DegenerateAmounts { mu: f64, sigma: f64 },
}

/// Raw (pre-projection) feature row of one behavior under the given ablation
/// switches: `[description bag placeholder | time features | amount]`.
/// The description part is filled by the model's token table; this helper
/// returns the constant tail and the token list.
pub fn behavior_features(
    b: &PaymentBehavior,
    vocab: &TokenVocab,
    stats: &AmountStats,
    use_description: bool,
    use_timing: bool,
    use_amount: bool,
) -> (Vec<u32>, Vec<f64>) {
    let tokens = if use_description { tokenize_text(&b.description, vocab) } else { Vec::new() };
    let mut tail = Vec::with_capacity(TIME_FEATURES + 1);
    if use_timing {
        tail.extend_from_slice(&time_embed(b.ts).values);
    }
    if use_amount {
        tail.push(stats.transform(b.amount));
    }
    (tokens, tail)
}
