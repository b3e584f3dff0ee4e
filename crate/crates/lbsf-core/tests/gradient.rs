//! End-to-end gradient verification of the full model in 64-bit mode.

mod common;

use lbsf_core::folding::fold_sequence;
use lbsf_core::model::{forward_on_tape, FwdCtx, LbsfModel};
use lbsf_core::nn::{finite_diff_check, FdConfig, Grads, KernelError, ParamSet, Tape};
use lbsf_core::train::BCE_EPS;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn batch_bce_loss(
    model_spec: &lbsf_core::model::ModelSpec,
    params: &ParamSet<f64>,
    folded: &[(lbsf_core::folding::FoldedUser, u8)],
    mut grads: Option<&mut Grads<f64>>,
) -> Result<f64, KernelError> {
    // Rebuild a model view around the probe's parameter values.
    let mut model = LbsfModel::<f64>::new(model_spec.clone(), 0).expect("valid spec");
    let values: Vec<(String, lbsf_core::Tensor<f64>)> =
        params.iter().map(|(_, p)| (p.name.clone(), p.value.clone())).collect();
    model.load_params(values).expect("matching layout");

    let n = folded.len() as f64;
    let mut total = 0.0;
    for (fold, label) in folded {
        let mut tape = Tape::new(model.params());
        let nodes = forward_on_tape(&model, &mut tape, fold, &mut FwdCtx::default())
            .expect("forward")
            .expect("scorable");
        let loss = tape.bce_scalar(nodes.probability, *label as f64, BCE_EPS);
        if let Some(grads) = grads.as_deref_mut() {
            tape.backward(loss, 1.0 / n, grads)?;
        }
        total += tape.value(loss).item() / n;
    }
    Ok(total)
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let spec = common::micro_spec();
    let model = LbsfModel::<f64>::new(spec.clone(), 99).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(4);
    let folded: Vec<_> = (0..3)
        .map(|i| {
            let r = common::random_record(&mut data_rng, &format!("u{i}"), 10);
            let label = r.label.unwrap();
            (fold_sequence(&r, &spec.fold), label)
        })
        .collect();

    let mut params = model.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let report = finite_diff_check(
        |ps, grads| batch_bce_loss(&spec, ps, &folded, grads),
        &mut params,
        FdConfig { eps: 1e-4, sample: 220 },
        &mut rng,
    )
    .unwrap();
    assert!(
        report.max_rel_err < 1e-4,
        "max relative error {} at {:?}",
        report.max_rel_err,
        report.worst
    );
}

#[test]
fn flat_variant_gradients_match_finite_differences() {
    let mut spec = common::micro_spec();
    spec.ablation.use_merchant_folding = false;
    let model = LbsfModel::<f64>::new(spec.clone(), 7).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(8);
    let folded: Vec<_> = (0..2)
        .map(|i| {
            let r = common::random_record(&mut data_rng, &format!("u{i}"), 8);
            let label = r.label.unwrap();
            (fold_sequence(&r, &spec.fold), label)
        })
        .collect();

    let mut params = model.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let report = finite_diff_check(
        |ps, grads| batch_bce_loss(&spec, ps, &folded, grads),
        &mut params,
        FdConfig { eps: 1e-4, sample: 150 },
        &mut rng,
    )
    .unwrap();
    assert!(report.max_rel_err < 1e-4, "max rel err {}", report.max_rel_err);
}
