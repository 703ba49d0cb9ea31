//! Dynamic hierarchical codebook beam training for mmWave massive MIMO.
//!
//! The crate simulates link-level beam training over sparse multipath
//! channels. A binary-tree beam codebook is synthesized from weighted sums
//! of array steering vectors; after each detected path the codebook is
//! updated by removing the detected bottom-layer index, which places an
//! exact null toward that path for every later search. A subtraction-based
//! baseline and closed-form overhead calculators are included for
//! comparison, along with a Monte Carlo harness that sweeps SNR and
//! reports success detection rates.
//!
//! Modules:
//! * [`array`] — steering vectors, inner products, beam-gain evaluation.
//! * [`codebook`] — hierarchical codebook synthesis and index-removal updates.
//! * [`channel`] — multipath channel realizations and noisy measurements.
//! * [`training`] — hierarchical descent searches and multi-path training.
//! * [`experiment`] — Monte Carlo harness, success metric, overhead formulas.
//! * [`cli`] — command-line interface (`run`, `sweep`, `overhead`, `pattern`).

pub mod array;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod experiment;
pub mod training;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A layer, position, or steering index is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    /// Every candidate codeword at some search layer is zero.
    #[error("degenerate codebook: {0}")]
    DegenerateCodebook(String),
    /// Malformed config, descriptor, or fixture text.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A structurally valid config violates a cross-field invariant.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
