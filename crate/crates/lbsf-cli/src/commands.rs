//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use lbsf_core::data::{generate_synthetic, parse_jsonl, write_jsonl, Dataset, Split};
use lbsf_core::encoding::AmountStats;
use lbsf_core::eval::bench::{self, BenchConfig};
use lbsf_core::eval::{evaluate, export_attributions};
use lbsf_core::model::{LbsfModel, ModelSpec};
use lbsf_core::train::{load_checkpoint, save_checkpoint, train as run_train, TrainMeta};

use crate::config::RunConfig;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
}

impl<'a> Provenance<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Provenance { tool: "lbsf", version: TOOL_VERSION, config }
    }
}

/// JSONL and CSV artifacts keep their line-oriented schema; provenance goes
/// into a `<path>.meta.json` sidecar instead.
fn write_sidecar(path: &Path, config: &RunConfig) -> anyhow::Result<()> {
    let meta_path = path.with_file_name(format!(
        "{}.meta.json",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    let f = BufWriter::new(File::create(&meta_path)?);
    serde_json::to_writer_pretty(f, &Provenance::new(config))?;
    Ok(())
}

fn load_dataset(path: &Path, split: Split) -> anyhow::Result<Dataset> {
    let f = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let ds = parse_jsonl(f, split).with_context(|| format!("parsing {}", path.display()))?;
    Ok(ds)
}

pub fn generate(
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    days: Option<&str>,
) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.synth.seed = seed;
    }
    if let Some(days) = days {
        cfg.synth.t_span_days = days.parse().expect("validated by clap");
    }
    let dataset = generate_synthetic(&cfg.synth)?;
    let f = BufWriter::new(File::create(out)?);
    write_jsonl(&dataset, f)?;
    write_sidecar(out, &cfg)?;
    eprintln!(
        "generated {} users ({} positives) over {} days -> {}",
        dataset.len(),
        dataset.records.iter().filter(|r| r.label == Some(1)).count(),
        cfg.synth.t_span_days,
        out.display()
    );
    Ok(())
}

/// With `LBSF_CHECK_MODE=1`, verify reverse-mode gradients against central
/// finite differences in 64-bit mode before any training step runs.
fn check_mode_self_test() -> anyhow::Result<()> {
    use lbsf_core::folding::fold_sequence;
    use lbsf_core::model::{forward_on_tape, FwdCtx};
    use lbsf_core::nn::{finite_diff_check, FdConfig, Tape};
    use rand::SeedableRng;

    let cfg = lbsf_core::data::SynthesisConfig {
        n_users: 3,
        positive_rate: 0.34,
        t_span_days: 45,
        mean_behaviors_per_day: 0.5,
        seed: 17,
        ..Default::default()
    };
    let data = generate_synthetic(&cfg)?;
    let spec = ModelSpec::new(
        lbsf_core::folding::FoldConfig { m: 4, l_max: 4 },
        lbsf_core::encoding::EncodeConfig {
            hash_buckets: 32,
            token_dim: 8,
            d_model: 16,
            shared_token_table: true,
        },
        lbsf_core::model::ModelConfig { n_heads: 1, n_layers: 1, ffn_hidden: 32, ..Default::default() },
        lbsf_core::model::AblationFlags::default(),
        AmountStats { mu: 2.0, sigma: 1.2 },
    )?;
    let folded: Vec<_> = data
        .records
        .iter()
        .map(|r| (fold_sequence(r, &spec.fold), r.label.unwrap()))
        .collect();

    let model = LbsfModel::<f64>::new(spec.clone(), 5)?;
    let mut params = model.params().clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let spec_ref = &spec;
    let folded_ref = &folded;
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
                let loss =
                    tape.bce_scalar(nodes.probability, *label as f64, lbsf_core::train::BCE_EPS);
                if let Some(g) = grads.as_deref_mut() {
                    tape.backward(loss, 1.0 / n, g)?;
                }
                total += tape.value(loss).item() / n;
            }
            Ok(total)
        },
        &mut params,
        FdConfig { eps: 1e-4, sample: 120 },
        &mut rng,
    )?;
    if report.max_rel_err >= 1e-4 {
        bail!("check mode: gradient verification failed (max rel err {:.3e})", report.max_rel_err);
    }
    eprintln!("check mode: gradients verified (max rel err {:.3e})", report.max_rel_err);
    Ok(())
}

pub fn train(
    config: Option<&Path>,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    if let Some(workers) = workers {
        cfg.train.workers = workers;
    }
    if std::env::var("LBSF_CHECK_MODE").as_deref() == Ok("1") {
        check_mode_self_test()?;
    }

    let dataset = load_dataset(data, Split::Train)?;
    if dataset.is_empty() {
        bail!("empty dataset");
    }
    let (train_set, val_set) = if cfg.train.val_fraction > 0.0 {
        let (head, tail) = dataset.split_tail(cfg.train.val_fraction, Split::Validation);
        (head, Some(tail))
    } else {
        (dataset, None)
    };

    let ablation = cfg.model.ablation();
    let amount_stats = if ablation.use_amount {
        AmountStats::fit(
            train_set.records.iter().flat_map(|r| r.behaviors.iter()).map(|b| b.amount),
        )?
    } else {
        AmountStats { mu: 0.0, sigma: 1.0 }
    };
    let spec = ModelSpec::new(
        cfg.fold.clone(),
        cfg.encode.clone(),
        cfg.model.arch(),
        ablation,
        amount_stats,
    )?;
    let mut model = LbsfModel::<f32>::new(spec, cfg.train.seed)?;

    let mut train_cfg = cfg.train.clone();
    train_cfg.val_fraction = 0.0; // the split above already happened
    let report = run_train(&mut model, &train_set, val_set.as_ref(), &train_cfg)?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        match report.val_aucs[i] {
            Some(auc) => eprintln!("epoch {}/{}: loss {loss:.4} val_auc {auc:.4}", i + 1, train_cfg.epochs),
            None => eprintln!("epoch {}/{}: loss {loss:.4}", i + 1, train_cfg.epochs),
        }
    }

    let meta = TrainMeta {
        epochs_trained: report.epochs_run,
        seed: train_cfg.seed,
        loss_history: report.epoch_losses.clone(),
        val_auc_history: report.val_aucs.clone(),
    };
    save_checkpoint(&model, &meta, out)?;

    #[derive(Serialize)]
    struct TrainLog<'a> {
        report: &'a lbsf_core::train::TrainReport,
        provenance: Provenance<'a>,
    }
    let log_path = out.with_file_name(format!(
        "{}.train.json",
        out.file_name().and_then(|n| n.to_str()).unwrap_or("model")
    ));
    let f = BufWriter::new(File::create(&log_path)?);
    serde_json::to_writer_pretty(f, &TrainLog { report: &report, provenance: Provenance::new(&cfg) })?;
    eprintln!("saved checkpoint to {} (loss log: {})", out.display(), log_path.display());
    Ok(())
}

pub fn eval(data: &Path, model_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let (model, _meta) = load_checkpoint(model_path)?;
    let dataset = load_dataset(data, Split::Test)?;
    if dataset.is_empty() {
        bail!("empty dataset");
    }
    let report = evaluate(&model, &dataset)?;

    #[derive(Serialize)]
    struct EvalOut<'a> {
        auc: f64,
        recall_at_10pct: f64,
        n_scored: usize,
        n_unscorable: usize,
        model_spec: &'a ModelSpec,
        tool: &'static str,
        version: &'static str,
    }
    let payload = EvalOut {
        auc: report.auc,
        recall_at_10pct: report.recall_at_10pct,
        n_scored: report.n_scored,
        n_unscorable: report.n_unscorable,
        model_spec: model.spec(),
        tool: "lbsf",
        version: TOOL_VERSION,
    };
    match out {
        Some(path) => {
            let f = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(f, &payload)?;
            eprintln!("auc {:.4} recall@10% {:.4} -> {}", report.auc, report.recall_at_10pct, path.display());
        }
        None => {
            serde_json::to_writer_pretty(std::io::stdout().lock(), &payload)?;
            println!();
        }
    }
    Ok(())
}

pub fn score(data: &Path, model_path: &Path, out: &Path) -> anyhow::Result<()> {
    let (model, _meta) = load_checkpoint(model_path)?;
    let dataset = load_dataset(data, Split::Test)?;
    if dataset.is_empty() {
        bail!("empty dataset");
    }
    #[derive(Serialize)]
    struct ScoreLine<'a> {
        user_id: &'a str,
        probability: Option<f64>,
        scorable: bool,
    }
    let mut f = BufWriter::new(File::create(out)?);
    for r in &dataset.records {
        let outcome = model.score_record(r)?;
        let line = ScoreLine {
            user_id: &r.user_id,
            probability: outcome.probability(),
            scorable: outcome.probability().is_some(),
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;

    #[derive(Serialize)]
    struct ScoreMeta<'a> {
        tool: &'static str,
        version: &'static str,
        model_spec: &'a ModelSpec,
    }
    let meta_path = out.with_file_name(format!(
        "{}.meta.json",
        out.file_name().and_then(|n| n.to_str()).unwrap_or("scores")
    ));
    let mf = BufWriter::new(File::create(meta_path)?);
    serde_json::to_writer_pretty(
        mf,
        &ScoreMeta { tool: "lbsf", version: TOOL_VERSION, model_spec: model.spec() },
    )?;
    eprintln!("scored {} users -> {}", dataset.len(), out.display());
    Ok(())
}

pub fn explain(
    config: Option<&Path>,
    data: &Path,
    model_path: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let (model, _meta) = load_checkpoint(model_path)?;
    let dataset = load_dataset(data, Split::Test)?;
    if dataset.is_empty() {
        bail!("empty dataset");
    }
    let records = export_attributions(&model, &dataset, cfg.eval.top_k_merchants)?;

    #[derive(Serialize)]
    struct ExplainOut<'a> {
        records: Vec<lbsf_core::eval::AttributionRecord>,
        model_spec: &'a ModelSpec,
        provenance: Provenance<'a>,
    }
    let f = BufWriter::new(File::create(out)?);
    serde_json::to_writer_pretty(
        f,
        &ExplainOut { records, model_spec: model.spec(), provenance: Provenance::new(&cfg) },
    )?;
    eprintln!("wrote attributions for {} users -> {}", dataset.len(), out.display());
    Ok(())
}

pub fn bench(config: Option<&Path>, out: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let bench_cfg = BenchConfig {
        d_model: cfg.encode.d_model,
        n_heads: cfg.model.n_heads,
        trials: cfg.eval.bench_trials,
        seed: seed.unwrap_or(7),
    };
    let rows = bench::bench_fold_vs_flat(&cfg.eval.bench_t_values, cfg.eval.bench_m, &bench_cfg)?;
    let f = BufWriter::new(File::create(out)?);
    bench::write_csv(&rows, f)?;
    write_sidecar(out, &cfg)?;
    for row in &rows {
        eprintln!(
            "T={}: cells {} vs {} ({:.2}%), time {:.2}ms vs {:.2}ms",
            row.t,
            row.flat_cells,
            row.folded_cells,
            100.0 * row.folded_cells as f64 / row.flat_cells as f64,
            row.flat_ms,
            row.folded_ms
        );
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}
