//! Domain types for users and payment behaviors, JSONL ingestion, validation,
//! and a seeded synthetic-data generator.

mod jsonl;
mod synth;

pub use jsonl::{parse_jsonl, write_jsonl};
pub use synth::{
    generate_synthetic, generate_synthetic_with_truth, merchant_catalog, MerchantTier,
    PlantedPattern, SynthesisConfig, UserTruth,
};

use serde::{Deserialize, Serialize};

/// One payment: merchant, free-text description, epoch-second timestamp,
/// and a non-negative amount in currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentBehavior {
    #[serde(rename = "merchant")]
    pub merchant_name: String,
    pub description: String,
    pub ts: i64,
    pub amount: f64,
}

/// A user's chronological behavior sequence with an optional default label.
///
/// Behaviors are kept sorted by `(ts, merchant, description, amount)`; the
/// secondary keys give equal-timestamp behaviors a canonical order so that
/// folding is independent of input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    pub user_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub behaviors: Vec<PaymentBehavior>,
}

impl UserRecord {
    pub fn new(user_id: impl Into<String>, label: Option<u8>, mut behaviors: Vec<PaymentBehavior>) -> Self {
        sort_behaviors(&mut behaviors);
        UserRecord { user_id: user_id.into(), label, behaviors }
    }

    pub fn sort_behaviors(&mut self) {
        sort_behaviors(&mut self.behaviors);
    }
}

pub(crate) fn sort_behaviors(behaviors: &mut [PaymentBehavior]) {
    behaviors.sort_by(|a, b| {
        a.ts.cmp(&b.ts)
            .then_with(|| a.merchant_name.cmp(&b.merchant_name))
            .then_with(|| a.description.cmp(&b.description))
            .then_with(|| a.amount.total_cmp(&b.amount))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// A collection of user records belonging to one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<UserRecord>,
    pub split: Split,
}

impl Dataset {
    pub fn new(records: Vec<UserRecord>, split: Split) -> Self {
        Dataset { records, split }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Split off the last `fraction` of records as a second dataset.
    pub fn split_tail(&self, fraction: f64, tail_split: Split) -> (Dataset, Dataset) {
        assert!((0.0..1.0).contains(&fraction));
        let n_tail = ((self.records.len() as f64) * fraction).round() as usize;
        let cut = self.records.len() - n_tail;
        (
            Dataset::new(self.records[..cut].to_vec(), self.split),
            Dataset::new(self.records[cut..].to_vec(), tail_split),
        )
    }
}

/// Check every type invariant of a record. Violations are data, not errors;
/// each entry names the field and the broken rule.
pub fn validate_record(r: &UserRecord) -> Vec<String> {
    let mut violations = Vec::new();
    if let Some(label) = r.label {
        if label > 1 {
            violations.push("label: must be 0 or 1".to_string());
        }
    }
    if r.user_id.is_empty() {
        violations.push("user_id: must be non-empty".to_string());
    }
    let mut last_ts = i64::MIN;
    for (i, b) in r.behaviors.iter().enumerate() {
        if b.merchant_name.is_empty() {
            violations.push(format!("behaviors[{i}].merchant_name: must be non-empty"));
        }
        if b.ts <= 0 {
            violations.push(format!("behaviors[{i}].timestamp: must be > 0"));
        }
        if !(b.amount >= 0.0) {
            violations.push("amount: must be ≥ 0".to_string());
        }
        if b.ts < last_ts {
            violations.push(format!("behaviors[{i}]: not sorted by timestamp"));
        }
        last_ts = b.ts;
    }
    violations
}

/// Errors from parsing, validation, and generation of datasets.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid value for `{field}`: {message}")]
    InvalidField { line: usize, field: &'static str, message: String },
    #[error("line {line}: duplicate user_id `{user_id}`")]
    DuplicateUserId { line: usize, user_id: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
