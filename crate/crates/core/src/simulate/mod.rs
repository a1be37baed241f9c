//! Path sampling of finite chains and Monte Carlo checks.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by
//! `(seed, lane, replicate)`, and all aggregation is over integers, so
//! results do not depend on thread count or execution order.

mod mc;
mod path;

pub use mc::{
    mc_duality_check, mc_growth_bound, mc_survival, DualityMcReport, GrowthMcReport, MCEstimate, PairCheck,
    ESCAPE_THRESHOLD,
};
pub use path::{sample_path, sample_paths, JumpTable, PathSample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::generator::GeneratorError;
use crate::qmatrix::QMatrixError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("start state {x0} lies outside the window [{lo}, {hi}]")]
    StartOutsideWindow { x0: i64, lo: i64, hi: i64 },
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("at least one replicate is required")]
    NoReplicates,
    #[error("{fraction:.4} of the paths reached the window edge (threshold {threshold})")]
    WindowEscape { fraction: f64, threshold: f64 },
    #[error(transparent)]
    QMatrix(#[from] QMatrixError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

/// Random stream of replicate `rep` in lane `lane` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, lane: u64, rep: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&lane.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(rep);
    rng
}
