//! Merchant-level sequence folding.
//!
//! Each user's flat behavior sequence is reorganized into `M` per-merchant
//! sub-sequences, chronological within each merchant. Merchants beyond the
//! top `M` are dropped; groups longer than `L_max` keep their most recent
//! behaviors. Unused slots are NULL slots with a false merchant mask.

use serde::{Deserialize, Serialize};

use crate::data::{PaymentBehavior, UserRecord};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FoldConfig {
    /// Merchant slots per user.
    #[serde(rename = "M")]
    pub m: usize,
    /// Per-merchant behavior cap; longer groups keep the most recent.
    #[serde(rename = "L_max")]
    pub l_max: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig { m: 74, l_max: 128 }
    }
}

impl FoldConfig {
    pub fn validate(&self) -> Result<(), FoldError> {
        if self.m == 0 || self.l_max == 0 {
            return Err(FoldError::InvalidConfig("M and L_max must be >= 1"));
        }
        Ok(())
    }
}

/// One of the `M` merchant slots of a folded user.
#[derive(Debug, Clone, PartialEq)]
pub struct MerchantSlot {
    /// `None` marks a NULL slot.
    pub merchant: Option<String>,
    /// Chronological behaviors at this merchant, at most `L_max`.
    pub behaviors: Vec<PaymentBehavior>,
}

impl MerchantSlot {
    pub fn active_len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_active(&self) -> bool {
        self.merchant.is_some()
    }
}

/// A user's behaviors regrouped into `M` per-merchant sub-sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedUser {
    pub user_id: String,
    pub slots: Vec<MerchantSlot>,
}

impl FoldedUser {
    pub fn merchant_mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| s.is_active()).collect()
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_active()).count()
    }

    /// Total behaviors retained across all slots.
    pub fn retained(&self) -> usize {
        self.slots.iter().map(|s| s.behaviors.len()).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FoldError {
    #[error("invalid fold config: {0}")]
    InvalidConfig(&'static str),
    #[error("batch_L {batch_l} is smaller than an active sub-sequence of length {active_len}")]
    BatchTooShort { batch_l: usize, active_len: usize },
}

/// Rank merchants by transaction count, breaking ties by most recent
/// transaction and then by name; returns at most `M` names in that order.
pub fn select_merchants(r: &UserRecord, cfg: &FoldConfig) -> Vec<String> {
    // (count, latest ts) per merchant, first-seen order irrelevant after sort.
    let mut stats: Vec<(String, usize, i64)> = Vec::new();
    for b in &r.behaviors {
        match stats.iter_mut().find(|(name, _, _)| name == &b.merchant_name) {
            Some((_, count, latest)) => {
                *count += 1;
                *latest = (*latest).max(b.ts);
            }
            None => stats.push((b.merchant_name.clone(), 1, b.ts)),
        }
    }
    stats.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.cmp(&a.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    stats.truncate(cfg.m);
    stats.into_iter().map(|(name, _, _)| name).collect()
}

/// Fold a user's behaviors into `M` per-merchant chronological slots.
pub fn fold_sequence(r: &UserRecord, cfg: &FoldConfig) -> FoldedUser {
    let selected = select_merchants(r, cfg);
    let mut slots: Vec<MerchantSlot> = selected
        .iter()
        .map(|name| MerchantSlot { merchant: Some(name.clone()), behaviors: Vec::new() })
        .collect();
    for b in &r.behaviors {
        if let Some(pos) = selected.iter().position(|name| name == &b.merchant_name) {
            slots[pos].behaviors.push(b.clone());
        }
    }
    for slot in slots.iter_mut() {
        if slot.behaviors.len() > cfg.l_max {
            // Keep the most recent L_max, order preserved.
            let cut = slot.behaviors.len() - cfg.l_max;
            slot.behaviors.drain(..cut);
        }
    }
    while slots.len() < cfg.m {
        slots.push(MerchantSlot { merchant: None, behaviors: Vec::new() });
    }
    FoldedUser { user_id: r.user_id.clone(), slots }
}

/// Padded mask view of a folded user for fixed-length batching.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedFold {
    pub merchant_mask: Vec<bool>,
    /// `M x batch_L`; true marks a real behavior, false marks padding.
    pub behavior_masks: Vec<Vec<bool>>,
    pub batch_l: usize,
}

/// Right-pad every sub-sequence to `batch_L` and mark padding in the masks.
/// Padding rows must be all-zero features downstream.
pub fn pad_and_mask(f: &FoldedUser, cfg: &FoldConfig, batch_l: usize) -> Result<PaddedFold, FoldError> {
    cfg.validate()?;
    let mut behavior_masks = Vec::with_capacity(f.slots.len());
    for slot in &f.slots {
        let active = slot.active_len();
        if active > batch_l {
            return Err(FoldError::BatchTooShort { batch_l, active_len: active });
        }
        let mut mask = vec![false; batch_l];
        for m in mask.iter_mut().take(active) {
            *m = true;
        }
        behavior_masks.push(mask);
    }
    Ok(PaddedFold { merchant_mask: f.merchant_mask(), behavior_masks, batch_l })
}
