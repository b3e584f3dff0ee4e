//! Tape construction for the LBSF forward pass and the flat baseline.

use rand_chacha::ChaCha8Rng;

use crate::data::PaymentBehavior;
use crate::encoding::{behavior_features, TokenVocab};
use crate::folding::FoldedUser;
use crate::nn::layers::{dropout_mask, Activation};
use crate::nn::{
    average_pool_masked, sinusoidal_positions, transformer_encoder_layer, NodeId, Scalar, Tape,
    Tensor,
};

use super::{ForwardTrace, LbsfModel, ModelError};

/// Per-call forward options. Defaults give the plain deterministic pass.
#[derive(Default)]
pub struct FwdCtx<'r> {
    /// Right-pad every sub-sequence to this length (test hook for the
    /// padding-invariance property).
    pub pad_sub_to: Option<usize>,
    /// Training-time dropout; `None` disables it.
    pub dropout: Option<(f64, &'r mut ChaCha8Rng)>,
}

impl<'r> FwdCtx<'r> {
    fn layer_masks<S: Scalar>(&mut self, rows: usize, d: usize) -> Option<(Tensor<S>, Tensor<S>)> {
        match &mut self.dropout {
            Some((rate, rng)) if *rate > 0.0 => Some((
                dropout_mask(rng, vec![rows, d], *rate),
                dropout_mask(rng, vec![rows, d], *rate),
            )),
            _ => None,
        }
    }
}

/// Node handles of one forward pass.
pub struct ForwardNodes {
    /// Post-fusion merchant embedding per slot; `None` for NULL slots.
    /// Empty for the flat baseline.
    pub fused_slots: Vec<Option<NodeId>>,
    /// Enhanced merchant embeddings `[M, d]` (hierarchical path only).
    pub enhanced: Option<NodeId>,
    /// Per-head CLS-stage attention matrices `[M+1, M+1]`.
    pub cls_attn: Vec<NodeId>,
    /// User representation fed to the classifier.
    pub user_repr: NodeId,
    pub logit: NodeId,
    pub probability: NodeId,
}

impl<S: Scalar> LbsfModel<S> {
    /// Encode one behavior list into `[L_pad, d]` embedding rows plus the
    /// validity mask. Padding rows are all-zero features.
    pub(crate) fn encode_behaviors<'p>(
        &'p self,
        tape: &mut Tape<'p, S>,
        behaviors: &[PaymentBehavior],
        pad_to: Option<usize>,
    ) -> (NodeId, Vec<bool>) {
        let spec = self.spec();
        let vocab = TokenVocab::from(&spec.encode);
        let flags = &spec.ablation;
        let l = behaviors.len();
        let l_pad = pad_to.map(|p| p.max(l)).unwrap_or(l);

        let mut lists: Vec<Vec<u32>> = Vec::with_capacity(l_pad);
        let tail_width = spec.feature_width()
            - if flags.use_description { spec.encode.token_dim } else { 0 };
        let mut tail = Tensor::zeros(vec![l_pad, tail_width.max(1)]);
        for (i, b) in behaviors.iter().enumerate() {
            let (tokens, tail_vals) = behavior_features(
                b,
                &vocab,
                &spec.amount_stats,
                flags.use_description,
                flags.use_timing,
                flags.use_amount,
            );
            lists.push(tokens);
            for (j, v) in tail_vals.iter().enumerate() {
                tail.row_mut(i)[j] = S::from_f64(*v);
            }
        }
        lists.resize(l_pad, Vec::new());

        let mut parts: Vec<NodeId> = Vec::new();
        if flags.use_description {
            parts.push(tape.bag_mean_rows(self.handles.desc_table, lists));
        }
        if tail_width > 0 {
            parts.push(tape.constant(tail));
        }
        let feat = if parts.len() == 1 { parts[0] } else { tape.concat_cols(&parts) };
        let emb = tape.linear(feat, self.handles.fuse_w, Some(self.handles.fuse_b));

        let pe = sinusoidal_positions::<S>(l_pad, spec.d_model());
        let emb = tape.add_const(emb, &pe);

        let mut mask = vec![true; l_pad];
        for m in mask.iter_mut().skip(l) {
            *m = false;
        }
        let emb = if l_pad > l { tape.zero_rows(emb, mask.clone()) } else { emb };
        (emb, mask)
    }

    /// Within-merchant melding: transformer stack then masked average
    /// pooling (the shared parameters serve every merchant slot).
    pub fn meld_within_merchant<'p>(
        &'p self,
        tape: &mut Tape<'p, S>,
        x: NodeId,
        mask: &[bool],
        ctx: &mut FwdCtx<'_>,
    ) -> Result<NodeId, ModelError> {
        let hier = self.handles.hier.as_ref().ok_or(ModelError::WrongVariant {
            wanted: "hierarchical (use_merchant_folding = true)",
        })?;
        let d = self.spec().d_model();
        let mut h = x;
        for layer in &hier.within {
            let masks = ctx.layer_masks(tape.value(h).rows(), d);
            h = transformer_encoder_layer(tape, h, mask, layer, self.spec().model.n_heads, masks.as_ref().map(|(a, b)| (a, b)))?
                .out;
        }
        Ok(average_pool_masked(tape, h, mask)?)
    }

    /// Merchant text fusion: `activation(FC(concat(h, m_text)))`.
    pub fn fuse_merchant_text<'p>(
        &'p self,
        tape: &mut Tape<'p, S>,
        h: NodeId,
        m_text: NodeId,
        activation: Activation,
    ) -> Result<NodeId, ModelError> {
        let hier = self.handles.hier.as_ref().ok_or(ModelError::WrongVariant {
            wanted: "hierarchical (use_merchant_folding = true)",
        })?;
        let cat = tape.concat_cols(&[h, m_text]);
        let fused = tape.linear(cat, hier.merchant_fuse_w, Some(hier.merchant_fuse_b));
        Ok(match activation {
            Activation::Gelu => tape.gelu(fused),
            Activation::Identity => fused,
        })
    }

    /// Across-merchant melding over the `M` slots; masked slots are excluded
    /// from attention and zeroed on output.
    pub fn meld_across_merchants<'p>(
        &'p self,
        tape: &mut Tape<'p, S>,
        h: NodeId,
        merchant_mask: &[bool],
        ctx: &mut FwdCtx<'_>,
    ) -> Result<NodeId, ModelError> {
        let hier = self.handles.hier.as_ref().ok_or(ModelError::WrongVariant {
            wanted: "hierarchical (use_merchant_folding = true)",
        })?;
        let d = self.spec().d_model();
        let mut x = h;
        if self.spec().model.merchant_pos_enc {
            let pe = sinusoidal_positions::<S>(merchant_mask.len(), d);
            x = tape.add_const(x, &pe);
        }
        for layer in &hier.across {
            let masks = ctx.layer_masks(merchant_mask.len(), d);
            x = transformer_encoder_layer(tape, x, merchant_mask, layer, self.spec().model.n_heads, masks.as_ref().map(|(a, b)| (a, b)))?
                .out;
        }
        Ok(x)
    }

    /// CLS relational learning: prepend the CLS token, run the relational
    /// stack, return the CLS output row and the per-head attention matrices
    /// of the last layer.
    pub fn relational_learning_cls<'p>(
        &'p self,
        tape: &mut Tape<'p, S>,
        enhanced: NodeId,
        merchant_mask: &[bool],
        ctx: &mut FwdCtx<'_>,
    ) -> Result<(NodeId, Vec<NodeId>), ModelError> {
        let hier = self.handles.hier.as_ref().ok_or(ModelError::WrongVariant {
            wanted: "hierarchical (use_merchant_folding = true)",
        })?;
        let d = self.spec().d_model();
        let cls = tape.param(hier.cls);
        let mut x = tape.concat_rows(&[cls, enhanced]);
        let mut mask = Vec::with_capacity(merchant_mask.len() + 1);
        mask.push(true);
        mask.extend_from_slice(merchant_mask);
        let mut attn = Vec::new();
        for layer in &hier.rel {
            let masks = ctx.layer_masks(mask.len(), d);
            let out = transformer_encoder_layer(tape, x, &mask, layer, self.spec().model.n_heads, masks.as_ref().map(|(a, b)| (a, b)))?;
            x = out.out;
            attn = out.attn;
        }
        let user_repr = tape.slice_row(x, 0);
        Ok((user_repr, attn))
    }

    fn classifier_head<'p>(&'p self, tape: &mut Tape<'p, S>, u: NodeId) -> (NodeId, NodeId) {
        let h = tape.linear(u, self.handles.clf1_w, Some(self.handles.clf1_b));
        let h = tape.gelu(h);
        let logit = tape.linear(h, self.handles.clf2_w, Some(self.handles.clf2_b));
        let prob = tape.sigmoid(logit);
        (logit, prob)
    }
}

/// Build the forward graph for one folded user. Returns `None` when the user
/// has no active merchant slot (structurally unscorable).
pub fn forward_on_tape<'p, S: Scalar>(
    model: &'p LbsfModel<S>,
    tape: &mut Tape<'p, S>,
    folded: &FoldedUser,
    ctx: &mut FwdCtx<'_>,
) -> Result<Option<ForwardNodes>, ModelError> {
    if folded.active_count() == 0 {
        return Ok(None);
    }
    if model.handles.hier.is_some() {
        forward_hierarchical(model, tape, folded, ctx)
    } else {
        forward_flat(model, tape, folded, ctx)
    }
}

fn forward_hierarchical<'p, S: Scalar>(
    model: &'p LbsfModel<S>,
    tape: &mut Tape<'p, S>,
    folded: &FoldedUser,
    ctx: &mut FwdCtx<'_>,
) -> Result<Option<ForwardNodes>, ModelError> {
    let spec = model.spec();
    let d = spec.d_model();
    let vocab = TokenVocab::from(&spec.encode);
    let hier = model.handles.hier.as_ref().expect("hierarchical variant");

    let mut fused_slots: Vec<Option<NodeId>> = Vec::with_capacity(folded.slots.len());
    let mut slot_rows: Vec<NodeId> = Vec::with_capacity(folded.slots.len());
    for slot in &folded.slots {
        match &slot.merchant {
            None => {
                fused_slots.push(None);
                slot_rows.push(tape.constant(Tensor::zeros(vec![d])));
            }
            Some(name) => {
                let (emb, mask) = model.encode_behaviors(tape, &slot.behaviors, ctx.pad_sub_to);
                let pooled = model.meld_within_merchant(tape, emb, &mask, ctx)?;
                let tokens = crate::encoding::tokenize_text(name, &vocab);
                let bag = tape.bag_mean_rows(model.handles.merchant_table, vec![tokens]);
                let bag = tape.slice_row(bag, 0);
                let m_text = tape.linear(bag, hier.merchant_proj_w, Some(hier.merchant_proj_b));
                let fused = model.fuse_merchant_text(tape, pooled, m_text, Activation::Gelu)?;
                fused_slots.push(Some(fused));
                slot_rows.push(fused);
            }
        }
    }

    let merchant_mask = folded.merchant_mask();
    let h = tape.concat_rows(&slot_rows);
    let enhanced = model.meld_across_merchants(tape, h, &merchant_mask, ctx)?;
    let (user_repr, cls_attn) = model.relational_learning_cls(tape, enhanced, &merchant_mask, ctx)?;
    let (logit, probability) = model.classifier_head(tape, user_repr);
    tape.check_numerics()?;
    Ok(Some(ForwardNodes {
        fused_slots,
        enhanced: Some(enhanced),
        cls_attn,
        user_repr,
        logit,
        probability,
    }))
}

fn forward_flat<'p, S: Scalar>(
    model: &'p LbsfModel<S>,
    tape: &mut Tape<'p, S>,
    folded: &FoldedUser,
    ctx: &mut FwdCtx<'_>,
) -> Result<Option<ForwardNodes>, ModelError> {
    let spec = model.spec();
    let d = spec.d_model();
    let flat = model.handles.flat.as_ref().expect("flat variant");

    // Groups stay chunked by merchant and are concatenated in slot order.
    let mut behaviors: Vec<PaymentBehavior> = Vec::new();
    for slot in folded.slots.iter().filter(|s| s.is_active()) {
        behaviors.extend(slot.behaviors.iter().cloned());
    }
    if behaviors.is_empty() {
        return Ok(None);
    }
    let (emb, mask) = model.encode_behaviors(tape, &behaviors, None);
    let mut h = emb;
    for layer in flat {
        let masks = ctx.layer_masks(mask.len(), d);
        h = transformer_encoder_layer(tape, h, &mask, layer, spec.model.n_heads, masks.as_ref().map(|(a, b)| (a, b)))?
            .out;
    }
    let pooled = average_pool_masked(tape, h, &mask)?;
    let (logit, probability) = model.classifier_head(tape, pooled);
    tape.check_numerics()?;
    Ok(Some(ForwardNodes {
        fused_slots: Vec::new(),
        enhanced: None,
        cls_attn: Vec::new(),
        user_repr: pooled,
        logit,
        probability,
    }))
}

/// CLS attention over merchant slots, renormalized over active slots with
/// the CLS self-weight dropped: `[heads][M]`.
pub(crate) fn cls_attention_report<S: Scalar>(
    tape: &Tape<'_, S>,
    cls_attn: &[NodeId],
    merchant_mask: &[bool],
) -> Vec<Vec<f64>> {
    let m = merchant_mask.len();
    let n_active = merchant_mask.iter().filter(|&&a| a).count().max(1);
    cls_attn
        .iter()
        .map(|&a| {
            let row = tape.value(a).row(0);
            let weights: Vec<f64> = row[1..=m].iter().map(|w| w.into_f64()).collect();
            let total: f64 = weights
                .iter()
                .zip(merchant_mask)
                .filter(|(_, &active)| active)
                .map(|(w, _)| w)
                .sum();
            if total > 0.0 {
                weights.iter().map(|w| w / total).collect()
            } else {
                // Degenerate underflow: fall back to uniform over active slots.
                merchant_mask
                    .iter()
                    .map(|&active| if active { 1.0 / n_active as f64 } else { 0.0 })
                    .collect()
            }
        })
        .collect()
}

pub(crate) fn extract_trace<S: Scalar>(
    tape: &Tape<'_, S>,
    folded: &FoldedUser,
    nodes: &ForwardNodes,
) -> ForwardTrace {
    let merchant_mask = folded.merchant_mask();
    let vec64 = |id: NodeId| tape.value(id).data().iter().map(|v| v.into_f64()).collect::<Vec<f64>>();

    let merchant_embeddings = nodes
        .fused_slots
        .iter()
        .map(|slot| slot.map(vec64))
        .collect();
    let enhanced_embeddings = match nodes.enhanced {
        None => Vec::new(),
        Some(id) => {
            let v = tape.value(id);
            merchant_mask
                .iter()
                .enumerate()
                .map(|(j, &active)| {
                    active.then(|| v.row(j).iter().map(|x| x.into_f64()).collect::<Vec<f64>>())
                })
                .collect()
        }
    };
    let cls_attention = if nodes.cls_attn.is_empty() {
        Vec::new()
    } else {
        cls_attention_report(tape, &nodes.cls_attn, &merchant_mask)
    };

    ForwardTrace {
        user_id: folded.user_id.clone(),
        slot_merchants: folded.slots.iter().map(|s| s.merchant.clone()).collect(),
        merchant_embeddings,
        enhanced_embeddings,
        cls_attention,
        logit: tape.value(nodes.logit).item().into_f64(),
        probability: tape.value(nodes.probability).item().into_f64(),
        attention_cells: tape.attn_cells(),
    }
}
