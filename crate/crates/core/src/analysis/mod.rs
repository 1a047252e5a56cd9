//! Evaluation mathematics: error metrics, the block-context opcode split
//! and the two nonparametric tests used to compare estimators.

mod classify;
mod metrics;
mod special;
mod stats;

pub use classify::{classify_trace, Dataset, OpcodeClass, BLOCK_CONTEXT_OPCODES};
pub use metrics::{ape, r_squared, summary, MetricError, Percent, Summary};
pub use special::{chi_square_sf, gamma_q, ln_gamma};
pub use stats::{ks_two_sample, kruskal_wallis, KruskalWallis, KsResult, StatsError};
