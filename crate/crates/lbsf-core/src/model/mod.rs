//! The LBSF model: multi-field behavior encoding, within-merchant melding,
//! merchant text fusion, across-merchant melding, CLS relational learning,
//! and the MLP classifier, plus the flat-sequence ablation baseline.

mod forward;

pub use forward::{forward_on_tape, ForwardNodes, FwdCtx};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::UserRecord;
use crate::encoding::{AmountStats, EncodeConfig, EncodeError, TIME_FEATURES};
use crate::folding::{fold_sequence, FoldConfig, FoldedUser};
use crate::nn::param::init;
use crate::nn::{EncoderLayerParams, KernelError, ParamId, ParamSet, Scalar, Tape};

/// Ablation switches mirroring the model variants of the ablation study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub use_merchant_folding: bool,
    pub use_amount: bool,
    pub use_timing: bool,
    pub use_description: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            use_merchant_folding: true,
            use_amount: true,
            use_timing: true,
            use_description: true,
        }
    }
}

impl AblationFlags {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.use_amount || self.use_timing || self.use_description) {
            return Err(ModelError::NoFeatures);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_heads: usize,
    pub n_layers: usize,
    /// Hidden width of the FFN; 0 means the default `4 * d_model`.
    pub ffn_hidden: usize,
    pub dropout_rate: f64,
    /// Sinusoidal positions over merchant slots before across-merchant
    /// melding. Off by default: slots are a set, which makes the CLS output
    /// invariant under permutations of active slots.
    pub merchant_pos_enc: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_heads: 4,
            n_layers: 1,
            ffn_hidden: 0,
            dropout_rate: 0.0,
            merchant_pos_enc: false,
        }
    }
}

/// Everything needed to rebuild a model: architecture, ablation flags, fold
/// and encoding configuration, and the frozen amount statistics. Serialized
/// into the checkpoint header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub fold: FoldConfig,
    pub encode: EncodeConfig,
    pub model: ModelConfig,
    pub ablation: AblationFlags,
    pub amount_stats: AmountStats,
    /// Fixed concatenation order of the behavior features.
    pub feature_order: String,
}

impl ModelSpec {
    pub fn new(
        fold: FoldConfig,
        encode: EncodeConfig,
        model: ModelConfig,
        ablation: AblationFlags,
        amount_stats: AmountStats,
    ) -> Result<Self, ModelError> {
        let spec = ModelSpec {
            fold,
            encode,
            model,
            ablation,
            amount_stats,
            feature_order: "text,time,amount".to_string(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.ablation.validate()?;
        self.fold.validate().map_err(|e| ModelError::Config(e.to_string()))?;
        if self.encode.d_model % self.model.n_heads != 0 {
            return Err(ModelError::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.encode.d_model, self.model.n_heads
            )));
        }
        if self.model.n_layers == 0 {
            return Err(ModelError::Config("n_layers must be >= 1".into()));
        }
        if self.ablation.use_amount {
            self.amount_stats.validate()?;
        }
        if self.feature_order != "text,time,amount" {
            return Err(ModelError::Config(format!(
                "unsupported feature order `{}`",
                self.feature_order
            )));
        }
        Ok(())
    }

    pub fn d_model(&self) -> usize {
        self.encode.d_model
    }

    pub fn ffn_hidden(&self) -> usize {
        if self.model.ffn_hidden == 0 {
            4 * self.encode.d_model
        } else {
            self.model.ffn_hidden
        }
    }

    /// Width of the concatenated behavior features under the ablation flags.
    pub fn feature_width(&self) -> usize {
        let mut w = 0;
        if self.ablation.use_description {
            w += self.encode.token_dim;
        }
        if self.ablation.use_timing {
            w += TIME_FEATURES;
        }
        if self.ablation.use_amount {
            w += 1;
        }
        w
    }
}

/// Typed handles into the parameter set.
#[derive(Debug, Clone)]
pub(crate) struct Handles {
    pub desc_table: ParamId,
    pub merchant_table: ParamId,
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
    pub hier: Option<HierHandles>,
    pub flat: Option<Vec<EncoderLayerParams>>,
    pub clf1_w: ParamId,
    pub clf1_b: ParamId,
    pub clf2_w: ParamId,
    pub clf2_b: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct HierHandles {
    pub within: Vec<EncoderLayerParams>,
    pub merchant_proj_w: ParamId,
    pub merchant_proj_b: ParamId,
    pub merchant_fuse_w: ParamId,
    pub merchant_fuse_b: ParamId,
    pub across: Vec<EncoderLayerParams>,
    pub cls: ParamId,
    pub rel: Vec<EncoderLayerParams>,
}

/// The full parameter set plus configuration.
#[derive(Debug, Clone)]
pub struct LbsfModel<S: Scalar> {
    spec: ModelSpec,
    params: ParamSet<S>,
    pub(crate) handles: Handles,
}

impl<S: Scalar> LbsfModel<S> {
    /// Fresh model with seeded initialization.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let handles = register_params(&spec, &mut params, &mut rng);
        Ok(LbsfModel { spec, params, handles })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    /// Replace all parameter values; names and shapes must match.
    pub fn load_params(&mut self, values: Vec<(String, crate::nn::Tensor<S>)>) -> Result<(), ModelError> {
        let mut seen = vec![false; self.params.len()];
        for (name, value) in values {
            let id = self
                .params
                .id_of(&name)
                .ok_or_else(|| ModelError::UnknownParameter { name: name.clone() })?;
            let expected = self.params.value(id).shape().to_vec();
            if expected != value.shape() {
                return Err(ModelError::ShapeMismatch {
                    name,
                    expected,
                    got: value.shape().to_vec(),
                });
            }
            *self.params.value_mut(id) = value;
            seen[id.index()] = true;
        }
        if let Some((_, p)) = self.params.iter().find(|(id, _)| !seen[id.index()]) {
            return Err(ModelError::MissingParameter { name: p.name.clone() });
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> LbsfModel<T> {
        LbsfModel { spec: self.spec.clone(), params: self.params.cast(), handles: self.handles.clone() }
    }

    /// Score a raw record: fold with the model's fold config, then predict.
    pub fn score_record(&self, r: &UserRecord) -> Result<ScoreOutcome, ModelError> {
        let folded = fold_sequence(r, &self.spec.fold);
        self.predict(&folded)
    }

    /// Deterministic forward pass returning the full trace, or the
    /// structured unscorable outcome for users with no active merchants.
    pub fn predict(&self, folded: &FoldedUser) -> Result<ScoreOutcome, ModelError> {
        self.predict_with_options(folded, &mut FwdCtx::default())
    }

    /// `predict` with explicit forward options (padding, dropout).
    pub fn predict_with_options(
        &self,
        folded: &FoldedUser,
        ctx: &mut FwdCtx<'_>,
    ) -> Result<ScoreOutcome, ModelError> {
        let mut tape = Tape::new(&self.params);
        match forward::forward_on_tape(self, &mut tape, folded, ctx)? {
            None => Ok(ScoreOutcome::Unscorable { user_id: folded.user_id.clone() }),
            Some(nodes) => {
                Ok(ScoreOutcome::Scored(forward::extract_trace(&tape, folded, &nodes)))
            }
        }
    }

    /// Flat-sequence baseline: groups concatenated as one sequence, a single
    /// transformer stack, masked average pooling, and the same classifier.
    /// Only valid on models built with `use_merchant_folding = false`.
    pub fn predict_flat_baseline(&self, r: &UserRecord) -> Result<ScoreOutcome, ModelError> {
        if self.handles.flat.is_none() {
            return Err(ModelError::WrongVariant {
                wanted: "flat baseline (use_merchant_folding = false)",
            });
        }
        self.score_record(r)
    }
}

fn register_params<S: Scalar>(
    spec: &ModelSpec,
    params: &mut ParamSet<S>,
    rng: &mut ChaCha8Rng,
) -> Handles {
    let d = spec.d_model();
    let td = spec.encode.token_dim;
    let ffn = spec.ffn_hidden();

    let desc_table =
        params.register("encode.tokens", init::embedding_table(rng, spec.encode.hash_buckets, td));
    let merchant_table = if spec.encode.shared_token_table {
        desc_table
    } else {
        params.register(
            "encode.merchant_tokens",
            init::embedding_table(rng, spec.encode.hash_buckets, td),
        )
    };
    let fuse_w = params.register("encode.fuse.w", init::linear_weight(rng, d, spec.feature_width()));
    let fuse_b = params.register("encode.fuse.b", init::zeros_vector(d));

    let (hier, flat) = if spec.ablation.use_merchant_folding {
        let within = (0..spec.model.n_layers)
            .map(|l| EncoderLayerParams::register(params, rng, &format!("within{l}"), d, ffn))
            .collect();
        let merchant_proj_w = params.register("merchant_proj.w", init::linear_weight(rng, d, td));
        let merchant_proj_b = params.register("merchant_proj.b", init::zeros_vector(d));
        let merchant_fuse_w = params.register("merchant_fuse.w", init::linear_weight(rng, d, 2 * d));
        let merchant_fuse_b = params.register("merchant_fuse.b", init::zeros_vector(d));
        let across = (0..spec.model.n_layers)
            .map(|l| EncoderLayerParams::register(params, rng, &format!("across{l}"), d, ffn))
            .collect();
        let cls = params.register("cls", init::normal_vector(rng, d));
        let rel = (0..spec.model.n_layers)
            .map(|l| EncoderLayerParams::register(params, rng, &format!("rel{l}"), d, ffn))
            .collect();
        (
            Some(HierHandles {
                within,
                merchant_proj_w,
                merchant_proj_b,
                merchant_fuse_w,
                merchant_fuse_b,
                across,
                cls,
                rel,
            }),
            None,
        )
    } else {
        let flat = (0..spec.model.n_layers)
            .map(|l| EncoderLayerParams::register(params, rng, &format!("seq{l}"), d, ffn))
            .collect();
        (None, Some(flat))
    };

    let clf1_w = params.register("clf.fc1.w", init::linear_weight(rng, d / 2, d));
    let clf1_b = params.register("clf.fc1.b", init::zeros_vector(d / 2));
    let clf2_w = params.register("clf.fc2.w", init::linear_weight(rng, 1, d / 2));
    let clf2_b = params.register("clf.fc2.b", init::zeros_vector(1));

    Handles {
        desc_table,
        merchant_table,
        fuse_w,
        fuse_b,
        hier,
        flat,
        clf1_w,
        clf1_b,
        clf2_w,
        clf2_b,
    }
}

/// Result of scoring one user.
#[derive(Debug, Clone)]
pub enum ScoreOutcome {
    Scored(ForwardTrace),
    /// The user has no behaviors at any selected merchant; excluded from
    /// loss and metrics instead of crashing the batch.
    Unscorable { user_id: String },
}

impl ScoreOutcome {
    pub fn probability(&self) -> Option<f64> {
        match self {
            ScoreOutcome::Scored(t) => Some(t.probability),
            ScoreOutcome::Unscorable { .. } => None,
        }
    }

    pub fn trace(&self) -> Option<&ForwardTrace> {
        match self {
            ScoreOutcome::Scored(t) => Some(t),
            ScoreOutcome::Unscorable { .. } => None,
        }
    }
}

/// Full forward trace of one scored user.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub user_id: String,
    /// Merchant name per slot; `None` for NULL slots.
    pub slot_merchants: Vec<Option<String>>,
    /// Post-fusion merchant embeddings per slot (`None` for NULL slots).
    pub merchant_embeddings: Vec<Option<Vec<f64>>>,
    /// Enhanced merchant embeddings after across-merchant melding.
    pub enhanced_embeddings: Vec<Option<Vec<f64>>>,
    /// CLS attention over merchant slots, `[heads][M]`, renormalized over
    /// active slots (the CLS self-weight is dropped for reporting). Empty for
    /// the flat baseline.
    pub cls_attention: Vec<Vec<f64>>,
    pub logit: f64,
    pub probability: f64,
    /// Query-key score entries computed during this forward pass (one count
    /// per attention application; heads share the score structure).
    pub attention_cells: u64,
}

impl ForwardTrace {
    /// Mean CLS attention over heads, per slot.
    pub fn mean_attention(&self) -> Vec<f64> {
        if self.cls_attention.is_empty() {
            return Vec::new();
        }
        let m = self.cls_attention[0].len();
        let mut out = vec![0.0; m];
        for head in &self.cls_attention {
            for (o, &w) in out.iter_mut().zip(head) {
                *o += w;
            }
        }
        let h = self.cls_attention.len() as f64;
        for o in out.iter_mut() {
            *o /= h;
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("at least one of amount/timing/description must be enabled")]
    NoFeatures,
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("operation requires the {wanted} variant")]
    WrongVariant { wanted: &'static str },
    #[error("unknown parameter `{name}` in checkpoint")]
    UnknownParameter { name: String },
    #[error("missing parameter `{name}`")]
    MissingParameter { name: String },
    #[error("parameter `{name}`: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, got: Vec<usize> },
}
