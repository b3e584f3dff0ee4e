//! Attention and transformer building blocks on top of the tape.

use rand::Rng;

use super::param::{init, ParamId, ParamSet};
use super::scalar::Scalar;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::KernelError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Activation applied by fused projection layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct MhaParams {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
}

impl MhaParams {
    pub fn register<S: Scalar, R: Rng>(ps: &mut ParamSet<S>, rng: &mut R, prefix: &str, d: usize) -> Self {
        let mut lin = |name: &str| {
            let w = ps.register(format!("{prefix}.{name}.w"), init::linear_weight(rng, d, d));
            let b = ps.register(format!("{prefix}.{name}.b"), init::zeros_vector(d));
            (w, b)
        };
        let (wq, bq) = lin("q");
        let (wk, bk) = lin("k");
        let (wv, bv) = lin("v");
        let (wo, bo) = lin("o");
        MhaParams { wq, bq, wk, bk, wv, bv, wo, bo }
    }
}

#[derive(Debug)]
pub struct MhaOutput {
    pub out: NodeId,
    /// One `[L, L]` attention matrix per head. Entries in masked key columns
    /// are exactly zero.
    pub attn: Vec<NodeId>,
}

/// Scaled dot-product multi-head self-attention with key masking.
pub fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<'_, S>,
    x: NodeId,
    mask: &[bool],
    p: &MhaParams,
    n_heads: usize,
) -> Result<MhaOutput, KernelError> {
    let l = tape.value(x).rows();
    let d = tape.value(x).cols();
    assert_eq!(mask.len(), l, "mask length mismatch");
    assert_eq!(d % n_heads, 0, "d_model not divisible by heads");
    if !mask.iter().any(|&m| m) {
        return Err(KernelError::AllMasked { op: "multi_head_attention" });
    }
    let dh = d / n_heads;
    let scale = S::from_f64(1.0 / (dh as f64).sqrt());

    let q = tape.linear(x, p.wq, Some(p.bq));
    let k = tape.linear(x, p.wk, Some(p.bk));
    let v = tape.linear(x, p.wv, Some(p.bv));

    // Additive key mask, shared by every query row.
    let mut mask_m = Tensor::zeros(vec![l, l]);
    for c in 0..l {
        if !mask[c] {
            for r in 0..l {
                mask_m.row_mut(r)[c] = S::BIG_NEG;
            }
        }
    }

    tape.count_attn_cells((l * l) as u64);

    let mut ctxs = Vec::with_capacity(n_heads);
    let mut attn = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let scores = tape.matmul_nt(qh, kh);
        let scores = tape.scale(scores, scale);
        let masked = tape.add_const(scores, &mask_m);
        let a = tape.softmax_rows(masked);
        attn.push(a);
        ctxs.push(tape.matmul(a, vh));
    }
    let ctx = if n_heads == 1 { ctxs[0] } else { tape.concat_cols(&ctxs) };
    let out = tape.linear(ctx, p.wo, Some(p.bo));
    Ok(MhaOutput { out, attn })
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderLayerParams {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub mha: MhaParams,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub ffn_w1: ParamId,
    pub ffn_b1: ParamId,
    pub ffn_w2: ParamId,
    pub ffn_b2: ParamId,
}

impl EncoderLayerParams {
    pub fn register<S: Scalar, R: Rng>(
        ps: &mut ParamSet<S>,
        rng: &mut R,
        prefix: &str,
        d: usize,
        ffn_hidden: usize,
    ) -> Self {
        let ln1_g = ps.register(format!("{prefix}.ln1.g"), init::ones_vector(d));
        let ln1_b = ps.register(format!("{prefix}.ln1.b"), init::zeros_vector(d));
        let mha = MhaParams::register(ps, rng, &format!("{prefix}.attn"), d);
        let ln2_g = ps.register(format!("{prefix}.ln2.g"), init::ones_vector(d));
        let ln2_b = ps.register(format!("{prefix}.ln2.b"), init::zeros_vector(d));
        let ffn_w1 = ps.register(format!("{prefix}.ffn1.w"), init::linear_weight(rng, ffn_hidden, d));
        let ffn_b1 = ps.register(format!("{prefix}.ffn1.b"), init::zeros_vector(ffn_hidden));
        let ffn_w2 = ps.register(format!("{prefix}.ffn2.w"), init::linear_weight(rng, d, ffn_hidden));
        let ffn_b2 = ps.register(format!("{prefix}.ffn2.b"), init::zeros_vector(d));
        EncoderLayerParams { ln1_g, ln1_b, mha, ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2 }
    }
}

pub struct EncoderLayerOutput {
    pub out: NodeId,
    pub attn: Vec<NodeId>,
}

/// One pre-norm residual encoder layer: `x + MHA(LN(x))`, then `+ FFN(LN(.))`,
/// with padded rows zeroed on output. With all weights zero the layer is the
/// identity on unmasked rows.
pub fn transformer_encoder_layer<S: Scalar>(
    tape: &mut Tape<'_, S>,
    x: NodeId,
    mask: &[bool],
    p: &EncoderLayerParams,
    n_heads: usize,
    dropout: Option<(&Tensor<S>, &Tensor<S>)>,
) -> Result<EncoderLayerOutput, KernelError> {
    let eps = S::from_f64(LAYER_NORM_EPS);
    let normed = tape.layer_norm(x, p.ln1_g, p.ln1_b, eps);
    let mha = multi_head_attention(tape, normed, mask, &p.mha, n_heads)?;
    let mha_out = match dropout {
        Some((m, _)) => tape.mul_const(mha.out, m.clone()),
        None => mha.out,
    };
    let h = tape.add(x, mha_out);

    let normed2 = tape.layer_norm(h, p.ln2_g, p.ln2_b, eps);
    let f1 = tape.linear(normed2, p.ffn_w1, Some(p.ffn_b1));
    let f1 = tape.gelu(f1);
    let f2 = tape.linear(f1, p.ffn_w2, Some(p.ffn_b2));
    let f2 = match dropout {
        Some((_, m)) => tape.mul_const(f2, m.clone()),
        None => f2,
    };
    let out = tape.add(h, f2);
    let out = tape.zero_rows(out, mask.to_vec());
    tape.check_numerics().map_err(|e| match e {
        KernelError::NonFinite { op } => KernelError::NonFinite { op },
        e => e,
    })?;
    Ok(EncoderLayerOutput { out, attn: mha.attn })
}

/// Mean over unmasked rows (Eq.-style average pooling).
pub fn average_pool_masked<S: Scalar>(
    tape: &mut Tape<'_, S>,
    x: NodeId,
    mask: &[bool],
) -> Result<NodeId, KernelError> {
    if !mask.iter().any(|&m| m) {
        return Err(KernelError::AllMasked { op: "average_pool_masked" });
    }
    Ok(tape.mean_rows_masked(x, mask.to_vec()))
}

/// Fixed sinusoidal positional encodings for positions `0..len`.
pub fn sinusoidal_positions<S: Scalar>(len: usize, d: usize) -> Tensor<S> {
    let mut pe = Tensor::zeros(vec![len, d]);
    for pos in 0..len {
        let row = pe.row_mut(pos);
        for i in 0..d / 2 {
            let rate = (pos as f64) / 10000f64.powf(2.0 * i as f64 / d as f64);
            row[2 * i] = S::from_f64(rate.sin());
            if 2 * i + 1 < d {
                row[2 * i + 1] = S::from_f64(rate.cos());
            }
        }
    }
    pe
}

/// Inverted-dropout keep mask scaled by `1 / (1 - rate)`.
pub fn dropout_mask<S: Scalar, R: Rng>(rng: &mut R, shape: Vec<usize>, rate: f64) -> Tensor<S> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    let keep = 1.0 - rate;
    let scale = S::from_f64(1.0 / keep);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < keep { scale } else { S::zero() })
        .collect();
    Tensor::new(shape, data)
}
