//! Metrics, attention-based attribution export, and the folded-vs-flat
//! attention-cost benchmark.

pub mod bench;

pub use bench::{bench_fold_vs_flat, BenchConfig, BenchRow};

use serde::Serialize;

use crate::data::Dataset;
use crate::folding::fold_sequence;
use crate::model::{LbsfModel, ModelError, ScoreOutcome};
use crate::nn::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("metric undefined: only one class present")]
    SingleClass,
    #[error("metric undefined: no positive labels")]
    NoPositives,
    #[error("empty input")]
    Empty,
    #[error("user `{user_id}` has no label")]
    Unlabeled { user_id: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Pairs are counted in integers, so the
/// result is exact.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Walk ascending score groups: every positive beats all negatives with
    // strictly lower score and half-ties the negatives in its own group.
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut pos_in_group = 0u64;
        let mut neg_in_group = 0u64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos_in_group += 1;
            } else {
                neg_in_group += 1;
            }
            j += 1;
        }
        wins += pos_in_group * negatives_below;
        ties += pos_in_group * neg_in_group;
        negatives_below += neg_in_group;
        i = j;
    }
    Ok((2 * wins + ties) as f64 / (2 * n_pos * n_neg) as f64)
}

/// Recall among the top `ceil(frac * N)` scores, ties broken by score
/// descending then input index ascending.
pub fn recall_at_fraction(scores: &[f64], labels: &[u8], frac: f64) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let n = scores.len();
    let k = ((frac * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let k = k.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..k].iter().filter(|&&i| labels[i] == 1).count();
    Ok(hits as f64 / total_pos as f64)
}

/// Metrics of one scored dataset.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub recall_at_10pct: f64,
    pub n_scored: usize,
    pub n_unscorable: usize,
}

/// Score every labeled record and compute AUC and Recall@10%. Unscorable
/// users are counted and excluded from the metrics.
pub fn evaluate<S: Scalar>(model: &LbsfModel<S>, dataset: &Dataset) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut scores = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    let mut n_unscorable = 0;
    for r in &dataset.records {
        let label = r.label.ok_or_else(|| EvalError::Unlabeled { user_id: r.user_id.clone() })?;
        match model.score_record(r)? {
            ScoreOutcome::Scored(trace) => {
                scores.push(trace.probability);
                labels.push(label);
            }
            ScoreOutcome::Unscorable { .. } => n_unscorable += 1,
        }
    }
    Ok(EvalReport {
        auc: auc(&scores, &labels)?,
        recall_at_10pct: recall_at_fraction(&scores, &labels, 0.10)?,
        n_scored: scores.len(),
        n_unscorable,
    })
}

/// Per-user merchant attribution: CLS attention averaged over heads, plus
/// weekly transaction counts for the top-ranked merchants.
#[derive(Debug, Clone, Serialize)]
pub struct AttributionRecord {
    pub user_id: String,
    /// `(merchant, mean attention weight)`, highest first. Empty for
    /// unscorable users.
    pub ranking: Vec<(String, f64)>,
    /// Weekly counts of retained behaviors per top merchant; week 0 starts
    /// at the user's first retained behavior.
    pub weekly_counts: Vec<(String, Vec<u32>)>,
}

pub fn export_attributions<S: Scalar>(
    model: &LbsfModel<S>,
    dataset: &Dataset,
    top_k_merchants: usize,
) -> Result<Vec<AttributionRecord>, EvalError> {
    const WEEK: i64 = 7 * 86_400;
    let mut out = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let folded = fold_sequence(r, &model.spec().fold);
        let outcome = model.predict(&folded)?;
        let trace = match outcome {
            ScoreOutcome::Unscorable { user_id } => {
                out.push(AttributionRecord { user_id, ranking: Vec::new(), weekly_counts: Vec::new() });
                continue;
            }
            ScoreOutcome::Scored(t) => t,
        };
        let mean = trace.mean_attention();
        let mut ranking: Vec<(String, f64)> = folded
            .slots
            .iter()
            .zip(&mean)
            .filter_map(|(slot, &w)| slot.merchant.clone().map(|m| (m, w)))
            .collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let first_ts = folded
            .slots
            .iter()
            .flat_map(|s| s.behaviors.first().map(|b| b.ts))
            .min();
        let mut weekly_counts = Vec::new();
        if let Some(first_ts) = first_ts {
            for (merchant, _) in ranking.iter().take(top_k_merchants) {
                let slot = folded
                    .slots
                    .iter()
                    .find(|s| s.merchant.as_deref() == Some(merchant))
                    .expect("ranked merchant has a slot");
                let last = slot.behaviors.last().map(|b| b.ts).unwrap_or(first_ts);
                let n_weeks = ((last - first_ts) / WEEK + 1).max(1) as usize;
                let mut counts = vec![0u32; n_weeks];
                for b in &slot.behaviors {
                    counts[((b.ts - first_ts) / WEEK) as usize] += 1;
                }
                weekly_counts.push((merchant.clone(), counts));
            }
        }
        out.push(AttributionRecord { user_id: trace.user_id, ranking, weekly_counts });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert!(matches!(auc(&[0.5, 0.6], &[1, 1]), Err(EvalError::SingleClass)));
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let scores = [0.3, 0.3, 0.9, 0.1, 0.3, 0.9];
        let labels = [1, 0, 1, 0, 1, 0];
        let fast = auc(&scores, &labels).unwrap();
        let mut wins = 0u64;
        let mut ties = 0u64;
        let mut pairs = 0u64;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        wins += 1;
                    } else if scores[i] == scores[j] {
                        ties += 1;
                    }
                }
            }
        }
        let brute = (2 * wins + ties) as f64 / (2 * pairs) as f64;
        assert_eq!(fast, brute);
    }

    #[test]
    fn auc_invariant_under_increasing_transforms() {
        let scores = [0.1, 0.7, 0.4, 0.9, 0.4, 0.2];
        let labels = [0, 1, 0, 1, 1, 0];
        let base = auc(&scores, &labels).unwrap();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s + 11.0).collect();
        assert_eq!(auc(&exp, &labels).unwrap(), base);
        assert_eq!(auc(&affine, &labels).unwrap(), base);
    }

    #[test]
    fn recall_examples() {
        // N=20, 3 positives, top-2 holds one positive.
        let mut scores = vec![0.0; 20];
        let mut labels = vec![0u8; 20];
        scores[0] = 0.99;
        labels[0] = 1;
        scores[1] = 0.98; // negative in top-2
        scores[2] = 0.5;
        labels[2] = 1;
        scores[3] = 0.4;
        labels[3] = 1;
        let r = recall_at_fraction(&scores, &labels, 0.10).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12);

        // All positives ranked first.
        let scores = [0.9, 0.8, 0.1, 0.2, 0.3, 0.15, 0.12, 0.11, 0.05, 0.04];
        let labels = [1, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(recall_at_fraction(&scores, &labels, 0.10).unwrap(), 1.0);
    }

    #[test]
    fn recall_k_uses_ceiling() {
        // N=10, frac=0.10 -> k=1.
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0];
        let labels = [0, 1, 0, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(recall_at_fraction(&scores, &labels, 0.10).unwrap(), 0.0);
        // N=15, frac=0.10 -> k=2.
        let scores2 = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.04, 0.03, 0.02, 0.01, 0.0];
        let labels2 = [0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(recall_at_fraction(&scores2, &labels2, 0.10).unwrap(), 1.0);
    }

    #[test]
    fn recall_without_positives_is_undefined() {
        assert!(matches!(
            recall_at_fraction(&[0.5, 0.4], &[0, 0], 0.1),
            Err(EvalError::NoPositives)
        ));
    }

    #[test]
    fn recall_tie_break_is_stable() {
        let scores = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        let mut labels = [0u8; 10];
        labels[0] = 1; // earliest index wins the tie
        assert_eq!(recall_at_fraction(&scores, &labels, 0.10).unwrap(), 1.0);
        let mut labels2 = [0u8; 10];
        labels2[9] = 1;
        assert_eq!(recall_at_fraction(&scores, &labels2, 0.10).unwrap(), 0.0);
    }
}
