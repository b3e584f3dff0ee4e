//! JSONL ingestion and serialization.
//!
//! One record per line: `{"user_id": str, "label": 0|1 (optional),
//! "behaviors": [{"merchant": str, "description": str, "ts": int,
//! "amount": number}]}`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{sort_behaviors, DataError, Dataset, PaymentBehavior, Split, UserRecord};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBehavior {
    merchant: String,
    description: String,
    ts: serde_json::Number,
    amount: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    user_id: String,
    #[serde(default)]
    label: Option<u8>,
    behaviors: Vec<RawBehavior>,
}

/// Parse a JSONL stream into a dataset. Behaviors are re-sorted
/// chronologically per user; the input order of users is preserved.
/// Line numbers in errors are 1-based.
pub fn parse_jsonl(reader: impl BufRead, split: Split) -> Result<Dataset, DataError> {
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line)
            .map_err(|e| DataError::Parse { line: line_no, message: e.to_string() })?;
        let mut behaviors = Vec::with_capacity(raw.behaviors.len());
        for b in raw.behaviors {
            let ts = b.ts.as_i64().ok_or_else(|| DataError::InvalidField {
                line: line_no,
                field: "ts",
                message: format!("must be an integer, got {}", b.ts),
            })?;
            if b.amount < 0.0 {
                return Err(DataError::InvalidField {
                    line: line_no,
                    field: "amount",
                    message: format!("must be ≥ 0, got {}", b.amount),
                });
            }
            behaviors.push(PaymentBehavior {
                merchant_name: b.merchant,
                description: b.description,
                ts,
                amount: b.amount,
            });
        }
        if !seen_ids.insert(raw.user_id.clone()) {
            return Err(DataError::DuplicateUserId { line: line_no, user_id: raw.user_id });
        }
        sort_behaviors(&mut behaviors);
        records.push(UserRecord { user_id: raw.user_id, label: raw.label, behaviors });
    }
    Ok(Dataset::new(records, split))
}

/// Write a dataset in the same schema `parse_jsonl` reads.
pub fn write_jsonl(dataset: &Dataset, mut writer: impl Write) -> Result<(), DataError> {
    for r in &dataset.records {
        serde_json::to_writer(&mut writer, r).map_err(|e| DataError::Parse {
            line: 0,
            message: format!("serialization failed: {e}"),
        })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
