//! The merged run configuration: one TOML file covering every module,
//! overridable by command-line flags. Unknown keys are rejected.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use lbsf_core::data::SynthesisConfig;
use lbsf_core::encoding::EncodeConfig;
use lbsf_core::folding::FoldConfig;
use lbsf_core::model::{AblationFlags, ModelConfig};
use lbsf_core::train::TrainConfig;

/// `[model]` section: architecture sizes plus ablation flags.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_hidden: usize,
    pub dropout_rate: f64,
    pub merchant_pos_enc: bool,
    pub use_merchant_folding: bool,
    pub use_amount: bool,
    pub use_timing: bool,
    pub use_description: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let arch = ModelConfig::default();
        let flags = AblationFlags::default();
        ModelSection {
            n_heads: arch.n_heads,
            n_layers: arch.n_layers,
            ffn_hidden: arch.ffn_hidden,
            dropout_rate: arch.dropout_rate,
            merchant_pos_enc: arch.merchant_pos_enc,
            use_merchant_folding: flags.use_merchant_folding,
            use_amount: flags.use_amount,
            use_timing: flags.use_timing,
            use_description: flags.use_description,
        }
    }
}

impl ModelSection {
    pub fn arch(&self) -> ModelConfig {
        ModelConfig {
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            ffn_hidden: self.ffn_hidden,
            dropout_rate: self.dropout_rate,
            merchant_pos_enc: self.merchant_pos_enc,
        }
    }

    pub fn ablation(&self) -> AblationFlags {
        AblationFlags {
            use_merchant_folding: self.use_merchant_folding,
            use_amount: self.use_amount,
            use_timing: self.use_timing,
            use_description: self.use_description,
        }
    }
}

/// `[eval]` section: attribution and benchmark knobs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Merchants per user in `explain` weekly-count series.
    pub top_k_merchants: usize,
    pub bench_t_values: Vec<usize>,
    pub bench_m: usize,
    pub bench_trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            top_k_merchants: 4,
            bench_t_values: vec![256, 512, 1024, 2048],
            bench_m: 64,
            bench_trials: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub fold: FoldConfig,
    pub encode: EncodeConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub synth: SynthesisConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}
