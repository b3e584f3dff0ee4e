//! Generate -> train -> checkpoint -> reload -> evaluate, end to end at
//! desk scale.

mod common;

use lbsf_core::data::{generate_synthetic, Split, SynthesisConfig};
use lbsf_core::encoding::{AmountStats, EncodeConfig};
use lbsf_core::eval::{evaluate, export_attributions};
use lbsf_core::folding::FoldConfig;
use lbsf_core::model::{AblationFlags, LbsfModel, ModelConfig, ModelSpec};
use lbsf_core::train::{load_checkpoint, save_checkpoint, train, TrainConfig, TrainMeta};

#[test]
fn full_pipeline_smoke() {
    let synth = SynthesisConfig {
        n_users: 120,
        positive_rate: 0.20,
        t_span_days: 45,
        mean_behaviors_per_day: 0.8,
        seed: 9,
        ..Default::default()
    };
    let dataset = generate_synthetic(&synth).unwrap();
    let (train_set, test_set) = dataset.split_tail(0.25, Split::Test);

    let stats = AmountStats::fit(
        train_set.records.iter().flat_map(|r| r.behaviors.iter()).map(|b| b.amount),
    )
    .unwrap();
    let spec = ModelSpec::new(
        FoldConfig { m: 8, l_max: 24 },
        EncodeConfig { hash_buckets: 512, token_dim: 16, d_model: 32, shared_token_table: true },
        ModelConfig { n_heads: 2, n_layers: 1, ffn_hidden: 64, ..Default::default() },
        AblationFlags::default(),
        stats,
    )
    .unwrap();

    let mut model = LbsfModel::<f32>::new(spec, 9).unwrap();
    let cfg = TrainConfig {
        learning_rate: 2e-3,
        batch_size: 16,
        epochs: 4,
        seed: 9,
        ..Default::default()
    };
    let report = train(&mut model, &train_set, Some(&test_set), &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 4);
    assert!(
        report.epoch_losses.last().unwrap() < report.epoch_losses.first().unwrap(),
        "loss failed to drop: {:?}",
        report.epoch_losses
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pipeline.ckpt");
    let meta = TrainMeta {
        epochs_trained: report.epochs_run,
        seed: cfg.seed,
        loss_history: report.epoch_losses.clone(),
        val_auc_history: report.val_aucs.clone(),
    };
    save_checkpoint(&model, &meta, &path).unwrap();
    let (reloaded, meta2) = load_checkpoint(&path).unwrap();
    assert_eq!(meta, meta2);

    let fresh = evaluate(&model, &test_set).unwrap();
    let loaded = evaluate(&reloaded, &test_set).unwrap();
    assert_eq!(fresh.auc.to_bits(), loaded.auc.to_bits());
    assert!(fresh.auc > 0.5, "model learned nothing: AUC {}", fresh.auc);
    assert_eq!(fresh.n_scored, test_set.len());

    let attributions = export_attributions(&reloaded, &test_set, 3).unwrap();
    assert_eq!(attributions.len(), test_set.len());
    for a in &attributions {
        if a.ranking.is_empty() {
            continue;
        }
        // Mean attention over active merchants sums to one.
        let total: f64 = a.ranking.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-6, "{}: ranking sums to {total}", a.user_id);
        // Weekly counts partition the retained behaviors of each merchant.
        for (merchant, counts) in &a.weekly_counts {
            let weekly_total: u32 = counts.iter().sum();
            assert!(weekly_total > 0, "{merchant} has no retained behaviors");
        }
        // Ranking is sorted by weight descending.
        for pair in a.ranking.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }
}

#[test]
fn weekly_counts_partition_retained_behaviors() {
    let synth = SynthesisConfig {
        n_users: 30,
        positive_rate: 0.2,
        t_span_days: 45,
        mean_behaviors_per_day: 1.0,
        seed: 77,
        ..Default::default()
    };
    let dataset = generate_synthetic(&synth).unwrap();
    let spec = common::micro_spec();
    let model = LbsfModel::<f32>::new(spec.clone(), 3).unwrap();
    // Rank every merchant so the counts cover all slots.
    let attributions = export_attributions(&model, &dataset, usize::MAX).unwrap();
    for (record, attribution) in dataset.records.iter().zip(&attributions) {
        let folded = lbsf_core::fold_sequence(record, &spec.fold);
        for (merchant, counts) in &attribution.weekly_counts {
            let slot = folded
                .slots
                .iter()
                .find(|s| s.merchant.as_deref() == Some(merchant))
                .expect("ranked merchant is a slot");
            assert_eq!(
                counts.iter().sum::<u32>() as usize,
                slot.behaviors.len(),
                "weekly counts must partition retained behaviors at {merchant}"
            );
        }
    }
}
