//! Attention-cost benchmark: one flat transformer pass over a length-`T`
//! sequence versus the folded hierarchy (`M` within-merchant melds plus one
//! CLS-relational pass over the merchant slots).
//!
//! Cell counts use one unit per attention application — a query-key score
//! matrix of `L_q * L_k` entries — so a flat pass costs `T^2` and the folded
//! pipeline costs `sum_j L_j^2 + (M+1)^2`. Heads share the score structure
//! and are not multiplied in.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::nn::param::init;
use crate::nn::{
    average_pool_masked, transformer_encoder_layer, EncoderLayerParams, KernelError, ParamSet,
    Tape, Tensor,
};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub d_model: usize,
    pub n_heads: usize,
    /// Wall-clock trials per variant; the median is reported.
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { d_model: 64, n_heads: 4, trials: 5, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub t: usize,
    pub flat_cells: u64,
    pub folded_cells: u64,
    pub flat_ms: f64,
    pub folded_ms: f64,
    /// Instrumented counters from the actual forward passes; equal to the
    /// closed-form columns by construction.
    pub flat_cells_measured: u64,
    pub folded_cells_measured: u64,
}

/// Uniform partition of `t` positions into `m` groups (remainder spread over
/// the first groups).
fn partition(t: usize, m: usize) -> Vec<usize> {
    let base = t / m;
    let rem = t % m;
    (0..m).map(|j| base + usize::from(j < rem)).filter(|&l| l > 0).collect()
}

/// Closed-form flat cell count: `T^2`.
pub fn flat_cell_count(t: usize) -> u64 {
    (t as u64) * (t as u64)
}

/// Closed-form folded cell count: `sum_j L_j^2 + (M+1)^2`.
pub fn folded_cell_count(lengths: &[usize], m: usize) -> u64 {
    let within: u64 = lengths.iter().map(|&l| (l as u64) * (l as u64)).sum();
    within + ((m as u64) + 1) * ((m as u64) + 1)
}

struct BenchParams {
    params: ParamSet<f32>,
    flat_layer: EncoderLayerParams,
    within_layer: EncoderLayerParams,
    rel_layer: EncoderLayerParams,
    cls: crate::nn::ParamId,
}

fn build_params(cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> BenchParams {
    let d = cfg.d_model;
    let mut params = ParamSet::<f32>::new();
    let flat_layer = EncoderLayerParams::register(&mut params, rng, "flat", d, 4 * d);
    let within_layer = EncoderLayerParams::register(&mut params, rng, "within", d, 4 * d);
    let rel_layer = EncoderLayerParams::register(&mut params, rng, "rel", d, 4 * d);
    let cls = params.register("cls", init::normal_vector(rng, d));
    BenchParams { params, flat_layer, within_layer, rel_layer, cls }
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Tensor<f32> {
    Tensor::matrix(rows, d, (0..rows * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// One prepared (flat, folded) workload pair for a fixed `T` and `M`;
/// both pipelines share parameters and input rows.
pub struct BenchHarness {
    bp: BenchParams,
    x: Tensor<f32>,
    subs: Vec<Tensor<f32>>,
    n_heads: usize,
    m: usize,
}

impl BenchHarness {
    pub fn new(t: usize, m: usize, cfg: &BenchConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bp = build_params(cfg, &mut rng);
        let x = random_rows(&mut rng, t, cfg.d_model);
        let lengths = partition(t, m);
        let mut subs = Vec::with_capacity(lengths.len());
        let mut offset = 0;
        for &l in &lengths {
            let mut data = Vec::with_capacity(l * cfg.d_model);
            for r in offset..offset + l {
                data.extend_from_slice(x.row(r));
            }
            subs.push(Tensor::matrix(l, cfg.d_model, data));
            offset += l;
        }
        BenchHarness { bp, x, subs, n_heads: cfg.n_heads, m }
    }

    pub fn group_lengths(&self) -> Vec<usize> {
        self.subs.iter().map(|s| s.rows()).collect()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// One full-sequence pass; returns the attention cells computed.
    pub fn flat_pass(&self) -> Result<u64, KernelError> {
        let mask = vec![true; self.x.rows()];
        let mut tape = Tape::new(&self.bp.params);
        let node = tape.constant(self.x.clone());
        let out =
            transformer_encoder_layer(&mut tape, node, &mask, &self.bp.flat_layer, self.n_heads, None)?;
        let pooled = average_pool_masked(&mut tape, out.out, &mask)?;
        std::hint::black_box(tape.value(pooled).data()[0]);
        Ok(tape.attn_cells())
    }

    /// The folded pipeline: per-group melds plus one CLS-relational pass.
    pub fn folded_pass(&self) -> Result<u64, KernelError> {
        let mut tape = Tape::new(&self.bp.params);
        let mut pooled_rows = Vec::with_capacity(self.subs.len());
        for sub in &self.subs {
            let mask = vec![true; sub.rows()];
            let node = tape.constant(sub.clone());
            let out = transformer_encoder_layer(
                &mut tape,
                node,
                &mask,
                &self.bp.within_layer,
                self.n_heads,
                None,
            )?;
            pooled_rows.push(average_pool_masked(&mut tape, out.out, &mask)?);
        }
        let cls = tape.param(self.bp.cls);
        let mut rows = vec![cls];
        rows.extend(pooled_rows);
        // NULL slots for groups the partition left empty, so the relational
        // stage always spans M+1 positions.
        let d = self.x.cols();
        let mut mask = vec![true; rows.len()];
        for _ in rows.len()..=self.m {
            rows.push(tape.constant(Tensor::zeros(vec![d])));
            mask.push(false);
        }
        let seq = tape.concat_rows(&rows);
        let out =
            transformer_encoder_layer(&mut tape, seq, &mask, &self.bp.rel_layer, self.n_heads, None)?;
        let user = tape.slice_row(out.out, 0);
        std::hint::black_box(tape.value(user).data()[0]);
        Ok(tape.attn_cells())
    }
}

fn median_ms(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Compare exact attention-cell counts and median wall time of the flat and
/// folded pipelines for each sequence length in `t_values`.
pub fn bench_fold_vs_flat(
    t_values: &[usize],
    m: usize,
    cfg: &BenchConfig,
) -> Result<Vec<BenchRow>, KernelError> {
    assert!(m >= 1, "M must be >= 1");
    assert!(cfg.trials >= 1, "trials must be >= 1");
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let harness = BenchHarness::new(t, m, cfg);
        let lengths = harness.group_lengths();

        let mut flat_times = Vec::with_capacity(cfg.trials);
        let mut flat_measured = 0;
        for _ in 0..cfg.trials {
            let start = Instant::now();
            flat_measured = harness.flat_pass()?;
            flat_times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mut folded_times = Vec::with_capacity(cfg.trials);
        let mut folded_measured = 0;
        for _ in 0..cfg.trials {
            let start = Instant::now();
            folded_measured = harness.folded_pass()?;
            folded_times.push(start.elapsed().as_secs_f64() * 1e3);
        }

        rows.push(BenchRow {
            t,
            flat_cells: flat_cell_count(t),
            folded_cells: folded_cell_count(&lengths, m),
            flat_ms: median_ms(&mut flat_times),
            folded_ms: median_ms(&mut folded_times),
            flat_cells_measured: flat_measured,
            folded_cells_measured: folded_measured,
        });
    }
    Ok(rows)
}

/// The CSV table emitted by the CLI.
pub fn write_csv(rows: &[BenchRow], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "T,flat_cells,folded_cells,flat_ms,folded_ms")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.3},{:.3}",
            r.t, r.flat_cells, r.folded_cells, r.flat_ms, r.folded_ms
        )?;
    }
    Ok(())
}
