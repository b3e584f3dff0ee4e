//! Benchmark helpers shared by the criterion targets.

pub use lbsf_core::eval::bench::{bench_fold_vs_flat, BenchConfig, BenchRow};

/// Sequence lengths exercised by the default benchmark grid.
pub const DEFAULT_T_VALUES: &[usize] = &[256, 512, 1024, 2048];

/// Merchant slot count used by the folded pipeline in the benchmarks.
pub const DEFAULT_M: usize = 64;
