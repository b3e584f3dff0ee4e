//! Acceptance suite: every release criterion, one pass/fail line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::time::Instant;

use lbsf_core::data::{
    generate_synthetic_with_truth, Dataset, PlantedPattern, Split, SynthesisConfig,
};
use lbsf_core::encoding::{AmountStats, EncodeConfig};
use lbsf_core::eval::bench::{bench_fold_vs_flat, BenchConfig};
use lbsf_core::eval::{auc, evaluate, export_attributions, recall_at_fraction};
use lbsf_core::folding::{fold_sequence, FoldConfig, FoldedUser};
use lbsf_core::model::{
    forward_on_tape, AblationFlags, FwdCtx, LbsfModel, ModelConfig, ModelSpec, ScoreOutcome,
};
use lbsf_core::nn::layers::MhaParams;
use lbsf_core::nn::{
    finite_diff_check, multi_head_attention, transformer_encoder_layer, FdConfig, ParamSet, Tape,
    Tensor,
};
use lbsf_core::train::{
    load_checkpoint, save_checkpoint, train, TrainConfig, TrainMeta, BCE_EPS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_gradient_fidelity() {
    let started = Instant::now();
    let spec = common::micro_spec();
    let model = LbsfModel::<f64>::new(spec.clone(), 99).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(4);
    let folded: Vec<(FoldedUser, u8)> = (0..3)
        .map(|i| {
            let r = common::random_record(&mut data_rng, &format!("u{i}"), 10);
            let label = r.label.unwrap();
            (fold_sequence(&r, &spec.fold), label)
        })
        .collect();

    let spec_ref = &spec;
    let folded_ref = &folded;
    let mut params = model.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let report = finite_diff_check(
        move |ps, mut grads| {
            let mut probe = LbsfModel::<f64>::new(spec_ref.clone(), 0).expect("spec");
            let values: Vec<_> =
                ps.iter().map(|(_, p)| (p.name.clone(), p.value.clone())).collect();
            probe.load_params(values).expect("layout");
            let n = folded_ref.len() as f64;
            let mut total = 0.0;
            for (fold, label) in folded_ref {
                let mut tape = Tape::new(probe.params());
                let nodes = forward_on_tape(&probe, &mut tape, fold, &mut FwdCtx::default())
                    .expect("forward")
                    .expect("scorable");
                let loss = tape.bce_scalar(nodes.probability, *label as f64, BCE_EPS);
                if let Some(g) = grads.as_deref_mut() {
                    tape.backward(loss, 1.0 / n, g)?;
                }
                total += tape.value(loss).item() / n;
            }
            Ok(total)
        },
        &mut params,
        FdConfig { eps: 1e-4, sample: 220 },
        &mut rng,
    )
    .unwrap();
    let elapsed = started.elapsed();
    assert!(
        report.max_rel_err < 1e-4,
        "criterion 1 FAILED: max rel err {} at {:?}",
        report.max_rel_err,
        report.worst
    );
    assert!(elapsed.as_secs() < 60, "criterion 1 FAILED: took {elapsed:?}");
    pass(
        "criterion 1 (gradient fidelity)",
        format!(
            "max rel err {:.2e} over {} coords in {:.1}s",
            report.max_rel_err,
            report.checked,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Attention forward oracle
// ---------------------------------------------------------------------------

fn reference_mha(
    params: &ParamSet<f64>,
    p: &MhaParams,
    x: &Tensor<f64>,
    mask: &[bool],
    n_heads: usize,
) -> Tensor<f64> {
    let l = x.rows();
    let d = x.cols();
    let dh = d / n_heads;
    let affine = |w: &Tensor<f64>, b: &Tensor<f64>, input: &Tensor<f64>| -> Vec<Vec<f64>> {
        (0..l)
            .map(|i| {
                (0..d)
                    .map(|o| {
                        let mut acc = b.data()[o];
                        for k in 0..d {
                            acc += input.row(i)[k] * w.row(o)[k];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    };
    let q = affine(params.value(p.wq), params.value(p.bq), x);
    let k = affine(params.value(p.wk), params.value(p.bk), x);
    let v = affine(params.value(p.wv), params.value(p.bv), x);

    let mut ctx = vec![vec![0.0f64; d]; l];
    for h in 0..n_heads {
        let off = h * dh;
        for qi in 0..l {
            // Scores over keys, masked keys at minus infinity.
            let mut scores = vec![f64::NEG_INFINITY; l];
            for kj in 0..l {
                if mask[kj] {
                    let mut dot = 0.0;
                    for c in 0..dh {
                        dot += q[qi][off + c] * k[kj][off + c];
                    }
                    scores[kj] = dot / (dh as f64).sqrt();
                }
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut weights = vec![0.0; l];
            let mut total = 0.0;
            for kj in 0..l {
                if mask[kj] {
                    weights[kj] = (scores[kj] - max).exp();
                    total += weights[kj];
                }
            }
            for kj in 0..l {
                weights[kj] /= total;
            }
            for c in 0..dh {
                let mut acc = 0.0;
                for kj in 0..l {
                    acc += weights[kj] * v[kj][off + c];
                }
                ctx[qi][off + c] = acc;
            }
        }
    }

    let wo = params.value(p.wo);
    let bo = params.value(p.bo);
    let mut out = Tensor::zeros(vec![l, d]);
    for i in 0..l {
        for o in 0..d {
            let mut acc = bo.data()[o];
            for c in 0..d {
                acc += ctx[i][c] * wo.row(o)[c];
            }
            out.row_mut(i)[o] = acc;
        }
    }
    out
}

#[test]
fn criterion_02_attention_forward_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut max_abs = 0.0f64;
    for case in 0..50 {
        let n_heads = *[1usize, 2, 4].iter().filter(|&&h| h <= 4).nth(rng.gen_range(0..3)).unwrap();
        let dh = rng.gen_range(1..=4usize);
        let d = (n_heads * dh).min(16);
        let l = rng.gen_range(1..=8usize);
        let mut params = ParamSet::<f64>::new();
        let p = MhaParams::register(&mut params, &mut rng, "t", d);
        let x = Tensor::matrix(l, d, (0..l * d).map(|_| rng.gen_range(-1.5..1.5)).collect());
        let mut mask = vec![false; l];
        for m in mask.iter_mut() {
            *m = rng.gen_bool(0.8);
        }
        mask[rng.gen_range(0..l)] = true;

        let mut tape = Tape::new(&params);
        let node = tape.constant(x.clone());
        let got = multi_head_attention(&mut tape, node, &mask, &p, n_heads).unwrap();
        let want = reference_mha(&params, &p, &x, &mask, n_heads);
        for (a, b) in tape.value(got.out).data().iter().zip(want.data()) {
            let err = (a - b).abs();
            max_abs = max_abs.max(err);
            assert!(err < 1e-6, "criterion 2 FAILED: case {case}, |Δ| = {err}");
        }
    }
    pass("criterion 2 (attention oracle)", format!("50 instances, max |Δ| {max_abs:.2e}"));
}

// ---------------------------------------------------------------------------
// 3. Metric oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let n = rng.gen_range(2..=500usize);
        // Coarse score grid injects plenty of ties.
        let grid: f64 = [4.0, 16.0, 64.0][rng.gen_range(0..3)];
        let scores: Vec<f64> =
            (0..n).map(|_| (rng.gen_range(0..=grid as u32) as f64) / grid).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        labels[0] = 1;
        labels[n - 1] = 0;

        // Brute force over all (pos, neg) pairs with integer counting.
        let mut wins = 0u64;
        let mut ties = 0u64;
        let mut pairs = 0u64;
        for i in 0..n {
            if labels[i] != 1 {
                continue;
            }
            for j in 0..n {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1;
                } else if scores[i] == scores[j] {
                    ties += 1;
                }
            }
        }
        let brute = (2 * wins + ties) as f64 / (2 * pairs) as f64;
        let fast = auc(&scores, &labels).unwrap();
        assert_eq!(fast, brute, "criterion 3 FAILED: AUC mismatch in case {case}");

        // Recall@10% against direct counting.
        let frac = 0.10;
        let k = ((frac * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let hits = order[..k.min(n)].iter().filter(|&&i| labels[i] == 1).count();
        let total_pos = labels.iter().filter(|&&l| l == 1).count();
        let want = hits as f64 / total_pos as f64;
        let got = recall_at_fraction(&scores, &labels, frac).unwrap();
        assert_eq!(got, want, "criterion 3 FAILED: recall mismatch in case {case}");
    }
    pass("criterion 3 (metric oracles)", "100 random sets, AUC and Recall@10% exact".into());
}

// ---------------------------------------------------------------------------
// 4. Structural invariants
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_structural_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    // (a) softmax row sums.
    for _ in 0..200 {
        let rows = rng.gen_range(1..=6usize);
        let cols = rng.gen_range(1..=9usize);
        let x = Tensor::<f64>::matrix(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-30.0..30.0)).collect(),
        );
        let y = lbsf_core::nn::softmax(&x, 1).unwrap();
        for r in 0..rows {
            let s: f64 = y.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "criterion 4 FAILED: softmax row sum {s}");
        }
    }

    // (b) masked keys receive exactly zero attention.
    for _ in 0..200 {
        let d = 8;
        let l = rng.gen_range(2..=7usize);
        let mut params = ParamSet::<f64>::new();
        let p = MhaParams::register(&mut params, &mut rng, "t", d);
        let mut mask = vec![true; l];
        mask[rng.gen_range(0..l)] = false;
        let x =
            Tensor::matrix(l, d, (0..l * d).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let mut tape = Tape::new(&params);
        let node = tape.constant(x);
        let out = multi_head_attention(&mut tape, node, &mask, &p, 2).unwrap();
        for a in &out.attn {
            let av = tape.value(*a);
            for q in 0..l {
                for (k, &m) in mask.iter().enumerate() {
                    if !m {
                        assert_eq!(
                            av.row(q)[k],
                            0.0,
                            "criterion 4 FAILED: masked key carries weight"
                        );
                    }
                }
            }
        }
    }

    // (c) residual identity with all-zero weights, exact.
    for _ in 0..200 {
        let d = 6;
        let l = rng.gen_range(1..=5usize);
        let mut params = ParamSet::<f64>::new();
        let layer =
            lbsf_core::nn::EncoderLayerParams::register(&mut params, &mut rng, "e", d, 2 * d);
        params.zero_all();
        let xs: Vec<f64> = (0..l * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut tape = Tape::new(&params);
        let x = tape.constant(Tensor::matrix(l, d, xs.clone()));
        let out = transformer_encoder_layer(&mut tape, x, &vec![true; l], &layer, 2, None).unwrap();
        assert_eq!(
            tape.value(out.out).data(),
            xs.as_slice(),
            "criterion 4 FAILED: zero-weight layer is not the identity"
        );
    }

    // (d) padding invariance, exact; (e) slot permutation within 1e-5.
    let spec = common::micro_spec();
    let model = LbsfModel::<f32>::new(spec.clone(), 4242).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(43);
    for case in 0..200 {
        let record = common::random_record(&mut data_rng, &format!("u{case}"), 9);
        let folded = fold_sequence(&record, &spec.fold);
        if folded.active_count() == 0 {
            continue;
        }
        let base = model.predict(&folded).unwrap();
        let base = base.trace().unwrap();

        let mut ctx = FwdCtx { pad_sub_to: Some(6), ..Default::default() };
        let padded = model.predict_with_options(&folded, &mut ctx).unwrap();
        assert_eq!(
            base.probability.to_bits(),
            padded.trace().unwrap().probability.to_bits(),
            "criterion 4 FAILED: padding changed the probability"
        );

        let mut permuted = folded.clone();
        let i = data_rng.gen_range(0..permuted.slots.len());
        let j = data_rng.gen_range(0..permuted.slots.len());
        permuted.slots.swap(i, j);
        let perm = model.predict(&permuted).unwrap();
        let perm = perm.trace().unwrap();
        assert!(
            (base.probability - perm.probability).abs() < 1e-5,
            "criterion 4 FAILED: permutation moved probability by {}",
            (base.probability - perm.probability).abs()
        );
        let base_mean = base.mean_attention();
        let perm_mean = perm.mean_attention();
        let mut expected = base_mean.clone();
        expected.swap(i, j);
        for (a, b) in expected.iter().zip(&perm_mean) {
            assert!((a - b).abs() < 1e-5, "criterion 4 FAILED: attention did not permute");
        }
    }
    pass(
        "criterion 4 (structural invariants)",
        "softmax sums, masked keys, residual identity, padding, permutation x200".into(),
    );
}

// ---------------------------------------------------------------------------
// 5/6/7/10. Synthetic learnability, ablation direction, span trend,
// explainability. One experiment matrix shared by all four.
// ---------------------------------------------------------------------------

fn accept_synth(seed: u64, span: u32) -> SynthesisConfig {
    SynthesisConfig {
        n_users: 2000,
        positive_rate: 0.10,
        t_span_days: span,
        mean_behaviors_per_day: 1.5,
        seed,
        ..Default::default()
    }
}

fn accept_spec(train_head: &Dataset, folding: bool) -> ModelSpec {
    let stats = AmountStats::fit(
        train_head.records.iter().flat_map(|r| r.behaviors.iter()).map(|b| b.amount),
    )
    .unwrap();
    ModelSpec::new(
        FoldConfig { m: 16, l_max: 64 },
        EncodeConfig { hash_buckets: 2048, token_dim: 32, d_model: 64, shared_token_table: true },
        ModelConfig { n_heads: 4, n_layers: 1, ffn_hidden: 256, ..Default::default() },
        AblationFlags { use_merchant_folding: folding, ..Default::default() },
        stats,
    )
    .unwrap()
}

fn accept_train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 64,
        epochs: 8,
        seed,
        ..Default::default()
    }
}

struct RunResult {
    held_out_auc: f64,
    model: LbsfModel<f32>,
    dataset: Dataset,
    truths: Vec<lbsf_core::data::UserTruth>,
}

fn train_and_eval(seed: u64, span: u32, folding: bool) -> RunResult {
    let (dataset, truths) = generate_synthetic_with_truth(&accept_synth(seed, span)).unwrap();
    let (head, tail) = dataset.split_tail(0.2, Split::Test);
    let spec = accept_spec(&head, folding);
    let mut model = LbsfModel::<f32>::new(spec, seed).unwrap();
    train(&mut model, &head, None, &accept_train_cfg(seed)).unwrap();
    let report = evaluate(&model, &tail).unwrap();
    RunResult { held_out_auc: report.auc, model, dataset, truths }
}

#[test]
fn criteria_05_06_07_10_synthetic_learning() {
    let seeds = [1u64, 2, 3];
    let spans = [45u32, 90, 180];

    // Criterion 5 run (seed 1, 90 days) is part of the matrix; time it.
    let started = Instant::now();
    let primary = train_and_eval(seeds[0], 90, true);
    let primary_elapsed = started.elapsed();

    let mut full_auc = vec![vec![0.0f64; spans.len()]; seeds.len()];
    full_auc[0][1] = primary.held_out_auc;
    for (si, &seed) in seeds.iter().enumerate() {
        for (pi, &span) in spans.iter().enumerate() {
            if si == 0 && pi == 1 {
                continue;
            }
            full_auc[si][pi] = train_and_eval(seed, span, true).held_out_auc;
        }
    }
    let flat_auc: Vec<f64> =
        seeds.iter().map(|&seed| train_and_eval(seed, 90, false).held_out_auc).collect();

    // Criterion 5: synthetic learnability.
    assert!(
        primary.held_out_auc >= 0.90,
        "criterion 5 FAILED: held-out AUC {} < 0.90",
        primary.held_out_auc
    );
    assert!(
        primary_elapsed.as_secs() < 600,
        "criterion 5 FAILED: run took {primary_elapsed:?}"
    );
    pass(
        "criterion 5 (synthetic learnability)",
        format!(
            "held-out AUC {:.4} in {:.0}s (2000 users, 90 days)",
            primary.held_out_auc,
            primary_elapsed.as_secs_f64()
        ),
    );

    // Criterion 6: folding beats the flat baseline by >= 0.03 mean AUC.
    let mean_full_90: f64 = (0..seeds.len()).map(|si| full_auc[si][1]).sum::<f64>() / 3.0;
    let mean_flat_90: f64 = flat_auc.iter().sum::<f64>() / 3.0;
    let gap = mean_full_90 - mean_flat_90;
    assert!(
        gap >= 0.03,
        "criterion 6 FAILED: mean gap {gap:.4} (full {mean_full_90:.4}, flat {mean_flat_90:.4})"
    );
    pass(
        "criterion 6 (ablation direction)",
        format!("full {mean_full_90:.4} vs flat {mean_flat_90:.4}, gap {gap:.4} over 3 seeds"),
    );

    // Criterion 7: non-decreasing mean held-out AUC across spans.
    let mean_by_span: Vec<f64> = (0..spans.len())
        .map(|pi| (0..seeds.len()).map(|si| full_auc[si][pi]).sum::<f64>() / 3.0)
        .collect();
    assert!(
        mean_by_span[0] <= mean_by_span[1] && mean_by_span[1] <= mean_by_span[2],
        "criterion 7 FAILED: mean AUC by span {mean_by_span:?}"
    );
    pass(
        "criterion 7 (sequence-length trend)",
        format!(
            "mean AUC 45d {:.4} <= 90d {:.4} <= 180d {:.4} over 3 seeds",
            mean_by_span[0], mean_by_span[1], mean_by_span[2]
        ),
    );

    // Criterion 10: the planted surge merchant ranks in the CLS top 3 for
    // at least 70% of pattern-B users.
    let surge_users: Vec<&lbsf_core::data::UserTruth> = primary
        .truths
        .iter()
        .filter(|t| t.pattern == Some(PlantedPattern::ImpulsiveSurge))
        .collect();
    assert!(surge_users.len() >= 100, "need >= 100 pattern-B users, got {}", surge_users.len());
    let surge_set: std::collections::HashMap<&str, &str> = surge_users
        .iter()
        .map(|t| (t.user_id.as_str(), t.surge_merchant.as_deref().unwrap()))
        .collect();
    let subset = Dataset::new(
        primary
            .dataset
            .records
            .iter()
            .filter(|r| surge_set.contains_key(r.user_id.as_str()))
            .cloned()
            .collect(),
        Split::Test,
    );
    let attributions = export_attributions(&primary.model, &subset, 3).unwrap();
    let mut hits = 0;
    for a in &attributions {
        let surge = surge_set[a.user_id.as_str()];
        if a.ranking.iter().take(3).any(|(m, _)| m == surge) {
            hits += 1;
        }
    }
    let rate = hits as f64 / attributions.len() as f64;
    assert!(
        rate >= 0.70,
        "criterion 10 FAILED: surge merchant in top-3 for only {:.1}% of {} users",
        100.0 * rate,
        attributions.len()
    );
    pass(
        "criterion 10 (explainability)",
        format!(
            "surge merchant in CLS top-3 for {:.1}% of {} pattern-B users",
            100.0 * rate,
            attributions.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Complexity claim
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_complexity() {
    let cfg = BenchConfig { d_model: 64, n_heads: 4, trials: 3, seed: 7 };
    let rows = bench_fold_vs_flat(&[1024, 2048], 64, &cfg).unwrap();

    let row_1024 = &rows[0];
    assert_eq!(row_1024.flat_cells, 1_048_576);
    assert_eq!(row_1024.folded_cells, 20_609);
    assert_eq!(row_1024.flat_cells, row_1024.flat_cells_measured);
    assert_eq!(row_1024.folded_cells, row_1024.folded_cells_measured);
    let ratio = row_1024.folded_cells as f64 / row_1024.flat_cells as f64;
    assert!(ratio <= 0.025, "criterion 8 FAILED: cell ratio {ratio:.4} > 2.5%");
    for row in &rows {
        assert!(
            row.folded_ms < row.flat_ms,
            "criterion 8 FAILED: folded {}ms >= flat {}ms at T={}",
            row.folded_ms,
            row.flat_ms,
            row.t
        );
    }
    pass(
        "criterion 8 (complexity)",
        format!(
            "T=1024: 20,609 / 1,048,576 cells ({:.2}%), {:.1}ms vs {:.1}ms median",
            100.0 * ratio,
            row_1024.folded_ms,
            row_1024.flat_ms
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Persistence
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_persistence() {
    let dir = tempfile::tempdir().unwrap();

    // Round trip: bit-identical predictions on 100 random users.
    let spec = common::micro_spec();
    let model = LbsfModel::<f32>::new(spec.clone(), 77).unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &TrainMeta::default(), &path).unwrap();
    let (loaded, _) = load_checkpoint(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut compared = 0;
    for i in 0..100 {
        let record = common::random_record(&mut rng, &format!("u{i}"), 8);
        let folded = fold_sequence(&record, &spec.fold);
        match (model.predict(&folded).unwrap(), loaded.predict(&folded).unwrap()) {
            (ScoreOutcome::Scored(a), ScoreOutcome::Scored(b)) => {
                assert_eq!(
                    a.probability.to_bits(),
                    b.probability.to_bits(),
                    "criterion 9 FAILED: round-trip prediction differs for user {i}"
                );
                compared += 1;
            }
            _ => panic!("criterion 9 FAILED: unscorable random user"),
        }
    }
    assert_eq!(compared, 100);

    // Deterministic retrain: byte-identical checkpoints.
    let data = common::random_dataset(5, 40, 8);
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        learning_rate: 1e-3,
        seed: 13,
        workers: 1,
        ..Default::default()
    };
    let (p1, p2) = (dir.path().join("r1.ckpt"), dir.path().join("r2.ckpt"));
    for path in [&p1, &p2] {
        let mut m = LbsfModel::<f32>::new(spec.clone(), 13).unwrap();
        let report = train(&mut m, &data, None, &cfg).unwrap();
        let meta = TrainMeta {
            epochs_trained: report.epochs_run,
            seed: 13,
            loss_history: report.epoch_losses.clone(),
            val_auc_history: report.val_aucs.clone(),
        };
        save_checkpoint(&m, &meta, path).unwrap();
    }
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(b1, b2, "criterion 9 FAILED: retrained checkpoints differ");
    pass(
        "criterion 9 (persistence)",
        format!("100 bit-identical round-trip predictions; retrain bytes match ({} bytes)", b1.len()),
    );
}
