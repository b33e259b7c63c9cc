//! Rating predictors robust to hidden confounding in missing-not-at-random
//! feedback.
//!
//! The crate provides:
//! - dataset ingestion (triple files, Coat-style matrices) and a synthetic
//!   confounded-data generator with known ground truth (`data`, `synth`),
//! - pseudo-feature construction via matrix factorization + clustering
//!   (`features`),
//! - entropy-based personalized sensitivity scores and per-pair
//!   inverse-propensity uncertainty boxes (`entropy`, `bounds`),
//! - naive/IPS/DR baselines and the PUID / BPUID adversarial objectives with
//!   an exact closed-form inner maximization (`objectives`),
//! - alternating minimax training for all estimators (`train`),
//! - UAUC / NDCG@K evaluation and bias diagnostics (`metrics`),
//! - a seeded experiment-grid runner and report emission (`grid`).

pub mod bounds;
pub mod data;
pub mod entropy;
pub mod features;
pub mod grid;
pub mod math;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod synth;
pub mod train;

use thiserror::Error;

/// Crate-wide error type. Variants map onto CLI exit codes
/// (usage 2, data 3, numeric 4).
#[derive(Debug, Error)]
pub enum PuidError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, PuidError>;

impl PuidError {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PuidError::Usage(_) => 2,
            PuidError::Parse { .. } | PuidError::Io(_) | PuidError::Data(_) => 3,
            PuidError::Numeric(_) => 4,
        }
    }
}
