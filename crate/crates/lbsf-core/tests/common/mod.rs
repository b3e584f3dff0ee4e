//! Shared fixtures for integration tests.
#![allow(dead_code)]

use lbsf_core::data::{Dataset, PaymentBehavior, Split, UserRecord};
use lbsf_core::encoding::{AmountStats, EncodeConfig};
use lbsf_core::folding::FoldConfig;
use lbsf_core::model::{AblationFlags, ModelConfig, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Micro architecture used by gradient checks: M=4, L_max=4, d=16, 1 head.
pub fn micro_spec() -> ModelSpec {
    ModelSpec::new(
        FoldConfig { m: 4, l_max: 4 },
        EncodeConfig { hash_buckets: 32, token_dim: 8, d_model: 16, shared_token_table: true },
        ModelConfig { n_heads: 1, n_layers: 1, ffn_hidden: 32, ..Default::default() },
        AblationFlags::default(),
        AmountStats { mu: 2.0, sigma: 1.2 },
    )
    .unwrap()
}

pub fn random_record(rng: &mut ChaCha8Rng, user_id: &str, n_behaviors: usize) -> UserRecord {
    let merchants =
        ["Corner Store", "Game Arcade", "Metro Card", "Fine Dining", "Loan Express"];
    let descriptions = ["daily order", "tip for streamer", "fare", "groceries"];
    let behaviors = (0..n_behaviors)
        .map(|_| PaymentBehavior {
            merchant_name: merchants[rng.gen_range(0..merchants.len())].to_string(),
            description: descriptions[rng.gen_range(0..descriptions.len())].to_string(),
            ts: 1_609_718_400 + rng.gen_range(0..90 * 86_400),
            amount: rng.gen_range(1.0..500.0),
        })
        .collect();
    UserRecord::new(user_id, Some(rng.gen_range(0..2)), behaviors)
}

pub fn random_dataset(seed: u64, n_users: usize, behaviors_each: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n_users)
        .map(|i| random_record(&mut rng, &format!("u{i}"), behaviors_each))
        .collect();
    Dataset::new(records, Split::Train)
}
