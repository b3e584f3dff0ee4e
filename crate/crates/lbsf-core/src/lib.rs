//! Long-term payment behavior sequence modeling for default prediction.
//!
//! The pipeline folds each user's transaction history into per-merchant
//! sub-sequences, encodes every payment from its description, timing, and
//! amount, melds the sub-sequences with a shared transformer layer, fuses
//! merchant text, runs across-merchant attention with a classification
//! token, and scores default probability with an MLP head. Training,
//! metrics, explainability export, and an attention-cost benchmark are
//! included; everything is deterministic under a fixed seed.

pub mod data;
pub mod encoding;
pub mod eval;
pub mod folding;
pub mod model;
pub mod nn;
pub mod train;

pub use data::{Dataset, PaymentBehavior, Split, UserRecord};
pub use eval::{auc, evaluate, recall_at_fraction, EvalReport};
pub use folding::{fold_sequence, FoldConfig, FoldedUser};
pub use model::{AblationFlags, ForwardTrace, LbsfModel, ModelConfig, ModelSpec, ScoreOutcome};
pub use nn::{Scalar, Tensor};
pub use train::{train, TrainConfig, TrainReport};
