//! Supervised training: BCE loss, AdamW, deterministic mini-batch loop, and
//! checkpoint persistence.

mod adamw;
mod checkpoint;

pub use adamw::{adamw_step, clip_grad_norm, AdamWState};
pub use checkpoint::{load_checkpoint, save_checkpoint, TrainMeta, CHECKPOINT_VERSION};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eval;
use crate::folding::{fold_sequence, FoldedUser};
use crate::model::{forward_on_tape, FwdCtx, LbsfModel, ModelError};
use crate::nn::{Grads, KernelError, Scalar, Tape};

/// Probability clamp keeping the BCE finite.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub grad_clip_norm: Option<f64>,
    /// Loss weight of positive samples; 1 reproduces the plain mean BCE.
    pub pos_weight: f64,
    /// Hold out this trailing fraction of the training set for per-epoch
    /// validation AUC when no explicit validation set is given.
    pub val_fraction: f64,
    /// Stop when validation AUC has not improved for this many epochs.
    pub early_stop_patience: Option<usize>,
    /// Data-parallel workers for the per-batch forward/backward. Results are
    /// reduced in a fixed chunk order, so any fixed worker count is
    /// bit-reproducible; 1 is the sequential reference schedule.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            batch_size: 256,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            seed: 7,
            grad_clip_norm: None,
            pos_weight: 1.0,
            val_fraction: 0.0,
            early_stop_patience: None,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning_rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1"));
        }
        if self.workers == 0 {
            return Err(TrainError::InvalidConfig("workers must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(TrainError::InvalidConfig("val_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(&'static str),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("user `{user_id}` has no label")]
    Unlabeled { user_id: String },
    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {reason}")]
    CorruptCheckpoint { reason: String },
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// Mean binary cross-entropy over probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(probabilities: &[f64], labels: &[u8]) -> Result<f64, TrainError> {
    assert_eq!(probabilities.len(), labels.len(), "probabilities/labels length mismatch");
    if probabilities.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = 0.0;
    for (&p, &y) in probabilities.iter().zip(labels) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let y = y as f64;
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / probabilities.len() as f64)
}

/// Per-epoch record of one training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub val_aucs: Vec<Option<f64>>,
    pub n_unscorable: usize,
    pub epochs_run: usize,
}

struct UserResult<S> {
    grads: Grads<S>,
    scored: Vec<(f64, u8)>,
    unscorable: usize,
}

fn run_chunk<S: Scalar>(
    model: &LbsfModel<S>,
    folded: &[FoldedUser],
    labels: &[u8],
    ids: &[usize],
    epoch: usize,
    cfg: &TrainConfig,
    dropout: f64,
) -> Result<UserResult<S>, TrainError> {
    let mut grads = Grads::zeros_like(model.params());
    let mut scored = Vec::with_capacity(ids.len());
    let mut unscorable = 0;
    for &idx in ids {
        let mut tape = Tape::new(model.params());
        let mut dropout_rng;
        let mut ctx = if dropout > 0.0 {
            dropout_rng = ChaCha8Rng::seed_from_u64(
                cfg.seed
                    ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    ^ (idx as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
            );
            FwdCtx { pad_sub_to: None, dropout: Some((dropout, &mut dropout_rng)) }
        } else {
            FwdCtx::default()
        };
        let nodes = match forward_on_tape(model, &mut tape, &folded[idx], &mut ctx)? {
            Some(nodes) => nodes,
            None => {
                unscorable += 1;
                continue;
            }
        };
        let y = labels[idx];
        let loss = tape.bce_scalar(nodes.probability, S::from_f64(y as f64), S::from_f64(BCE_EPS));
        let weight = if y == 1 { cfg.pos_weight } else { 1.0 };
        tape.backward(loss, S::from_f64(weight), &mut grads)?;
        scored.push((weight * tape.value(loss).item().into_f64(), y));
    }
    Ok(UserResult { grads, scored, unscorable })
}

/// Train `model` on `train_set`, reporting per-epoch mean loss and, when a
/// validation set is available, per-epoch validation AUC. Deterministic for
/// a fixed `(seed, workers)`; unscorable users are skipped.
pub fn train<S: Scalar>(
    model: &mut LbsfModel<S>,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for r in &train_set.records {
        if r.label.is_none() {
            return Err(TrainError::Unlabeled { user_id: r.user_id.clone() });
        }
    }

    // Optional held-out tail when the caller supplied no validation set.
    let (train_view, holdout);
    let (effective_train, effective_val): (&Dataset, Option<&Dataset>) =
        if val_set.is_none() && cfg.val_fraction > 0.0 {
            let (head, tail) = train_set.split_tail(cfg.val_fraction, crate::data::Split::Validation);
            train_view = head;
            holdout = tail;
            (&train_view, Some(&holdout))
        } else {
            (train_set, val_set)
        };

    let folded: Vec<FoldedUser> = effective_train
        .records
        .iter()
        .map(|r| fold_sequence(r, &model.spec().fold))
        .collect();
    let labels: Vec<u8> = effective_train.records.iter().map(|r| r.label.unwrap()).collect();
    let dropout = model.spec().model.dropout_rate;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamWState::new(model.params());
    let mut report = TrainReport {
        epoch_losses: Vec::new(),
        val_aucs: Vec::new(),
        n_unscorable: 0,
        epochs_run: 0,
    };
    let mut best_val = f64::NEG_INFINITY;
    let mut since_best = 0usize;

    let mut indices: Vec<usize> = (0..folded.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_scored = 0usize;
        for batch in indices.chunks(cfg.batch_size) {
            let mut grads = Grads::zeros_like(model.params());
            let mut scored: Vec<(f64, u8)> = Vec::with_capacity(batch.len());
            if cfg.workers == 1 {
                let result = run_chunk(model, &folded, &labels, batch, epoch, cfg, dropout)?;
                grads = result.grads;
                scored = result.scored;
                report.n_unscorable += result.unscorable;
            } else {
                let chunk_len = batch.len().div_ceil(cfg.workers);
                let chunks: Vec<&[usize]> = batch.chunks(chunk_len.max(1)).collect();
                let results: Vec<Result<UserResult<S>, TrainError>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = chunks
                        .iter()
                        .map(|ids| {
                            let model = &*model;
                            let folded = &folded;
                            let labels = &labels;
                            scope.spawn(move || {
                                run_chunk(model, folded, labels, ids, epoch, cfg, dropout)
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
                });
                for result in results {
                    let result = result?;
                    grads.merge(&result.grads);
                    scored.extend(result.scored);
                    report.n_unscorable += result.unscorable;
                }
            }
            let n_scored = scored.len();
            if n_scored == 0 {
                continue;
            }
            grads.scale_all(S::from_f64(1.0 / n_scored as f64));
            if let Some(max_norm) = cfg.grad_clip_norm {
                clip_grad_norm(model.params(), &mut grads, max_norm);
            }
            adamw_step(model.params_mut(), &grads, &mut state, cfg)?;
            epoch_loss += scored.iter().map(|(l, _)| l).sum::<f64>();
            epoch_scored += n_scored;
        }
        if epoch_scored == 0 {
            return Err(TrainError::EmptyDataset);
        }
        report.epoch_losses.push(epoch_loss / epoch_scored as f64);

        let val_auc = effective_val.and_then(|val| eval::evaluate(model, val).ok().map(|r| r.auc));
        report.val_aucs.push(val_auc);
        report.epochs_run = epoch + 1;

        if let (Some(patience), Some(auc)) = (cfg.early_stop_patience, val_auc) {
            if auc > best_val {
                best_val = auc;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PaymentBehavior, Split, UserRecord};
    use crate::encoding::{AmountStats, EncodeConfig};
    use crate::folding::FoldConfig;
    use crate::model::{AblationFlags, ModelConfig, ModelSpec};
    use crate::nn::param::init;
    use crate::nn::{ParamSet, Tensor};
    use rand::Rng;

    #[test]
    fn bce_examples() {
        let near_one = 1.0 - 1e-9;
        assert!(bce_loss(&[near_one], &[1]).unwrap() < 1e-6);
        let half = bce_loss(&[0.5], &[1]).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-12);
        let two = bce_loss(&[0.5, 0.5], &[1, 0]).unwrap();
        assert!((two - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_empty_errors() {
        assert!(matches!(bce_loss(&[], &[]), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn classifier_head_separates_linear_toy_problem() {
        // Two-feature separable data through an MLP head alone: BCE < 0.05
        // within 500 steps.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::<f64>::new();
        let w1 = ps.register("fc1.w", init::linear_weight(&mut rng, 4, 2));
        let b1 = ps.register("fc1.b", init::zeros_vector(4));
        let w2 = ps.register("fc2.w", init::linear_weight(&mut rng, 1, 4));
        let b2 = ps.register("fc2.b", init::zeros_vector(1));

        let samples: Vec<(Vec<f64>, u8)> = (0..64)
            .map(|_| {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let y = u8::from(x[0] + x[1] > 0.0);
                (x.to_vec(), y)
            })
            .collect();

        let cfg = TrainConfig { learning_rate: 0.05, ..Default::default() };
        let mut state = AdamWState::new(&ps);
        let mut last_loss = f64::INFINITY;
        for _ in 0..500 {
            let mut grads = Grads::zeros_like(&ps);
            let mut total = 0.0;
            for (x, y) in &samples {
                let mut tape = Tape::new(&ps);
                let input = tape.constant(Tensor::vector(x.clone()));
                let h = tape.linear(input, w1, Some(b1));
                let h = tape.gelu(h);
                let logit = tape.linear(h, w2, Some(b2));
                let p = tape.sigmoid(logit);
                let loss = tape.bce_scalar(p, *y as f64, BCE_EPS);
                tape.backward(loss, 1.0 / samples.len() as f64, &mut grads).unwrap();
                total += tape.value(loss).item() / samples.len() as f64;
            }
            adamw_step(&mut ps, &grads, &mut state, &cfg).unwrap();
            last_loss = total;
            if last_loss < 0.05 {
                break;
            }
        }
        assert!(last_loss < 0.05, "loss stuck at {last_loss}");
    }

    fn tiny_spec() -> ModelSpec {
        ModelSpec::new(
            FoldConfig { m: 3, l_max: 6 },
            EncodeConfig { hash_buckets: 64, token_dim: 8, d_model: 16, shared_token_table: true },
            ModelConfig { n_heads: 2, n_layers: 1, ffn_hidden: 32, ..Default::default() },
            AblationFlags::default(),
            AmountStats { mu: 2.0, sigma: 1.0 },
        )
        .unwrap()
    }

    fn tiny_dataset(n: usize) -> Dataset {
        let merchants = ["Corner Store", "Metro Card", "Game Arcade"];
        let records = (0..n)
            .map(|i| {
                let label = u8::from(i % 3 == 0);
                let behaviors = (0..6)
                    .map(|k| PaymentBehavior {
                        merchant_name: merchants[(i + k) % 3].to_string(),
                        description: if label == 1 { "tip for streamer" } else { "groceries" }
                            .to_string(),
                        ts: 1_609_718_400 + ((i * 7 + k) as i64) * 43_200,
                        amount: 5.0 + (k as f64),
                    })
                    .collect();
                UserRecord::new(format!("u{i}"), Some(label), behaviors)
            })
            .collect();
        Dataset::new(records, Split::Train)
    }

    #[test]
    fn two_epochs_give_two_losses() {
        let mut model = LbsfModel::<f32>::new(tiny_spec(), 1).unwrap();
        let data = tiny_dataset(10);
        let cfg = TrainConfig { epochs: 2, batch_size: 4, learning_rate: 1e-3, ..Default::default() };
        let report = train(&mut model, &data, None, &cfg).unwrap();
        assert_eq!(report.epoch_losses.len(), 2);
        assert_eq!(report.epochs_run, 2);
    }

    #[test]
    fn same_seed_gives_identical_loss_history() {
        let data = tiny_dataset(12);
        let cfg = TrainConfig { epochs: 3, batch_size: 4, learning_rate: 1e-3, ..Default::default() };
        let mut m1 = LbsfModel::<f32>::new(tiny_spec(), 2).unwrap();
        let mut m2 = LbsfModel::<f32>::new(tiny_spec(), 2).unwrap();
        let r1 = train(&mut m1, &data, None, &cfg).unwrap();
        let r2 = train(&mut m2, &data, None, &cfg).unwrap();
        assert_eq!(r1, r2);
        for (a, b) in m1.params().iter().zip(m2.params().iter()) {
            assert_eq!(a.1.value.data(), b.1.value.data(), "param {} diverged", a.1.name);
        }
    }

    #[test]
    fn training_reduces_loss_on_separable_toy_data() {
        let mut model = LbsfModel::<f32>::new(tiny_spec(), 3).unwrap();
        let data = tiny_dataset(30);
        let cfg = TrainConfig { epochs: 6, batch_size: 8, learning_rate: 3e-3, ..Default::default() };
        let report = train(&mut model, &data, None, &cfg).unwrap();
        let first = report.epoch_losses.first().unwrap();
        let last = report.epoch_losses.last().unwrap();
        assert!(last < first, "loss did not drop: {report:?}");
    }

    #[test]
    fn unlabeled_data_is_rejected() {
        let mut model = LbsfModel::<f32>::new(tiny_spec(), 1).unwrap();
        let mut data = tiny_dataset(4);
        data.records[2].label = None;
        let err = train(&mut model, &data, None, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, TrainError::Unlabeled { .. }));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut model = LbsfModel::<f32>::new(tiny_spec(), 1).unwrap();
        let data = Dataset::new(vec![], Split::Train);
        assert!(matches!(train(&mut model, &data, None, &TrainConfig::default()), Err(TrainError::EmptyDataset)));
    }
}
