//! Finite-key secret-key rates for quantum key distribution.
//!
//! A run of key exchange processes `N` signals: `n` of them are kept as the
//! raw key and `m = N - n` are sacrificed to estimate the channel error rate.
//! After error correction and privacy amplification, at most `ell` secret bits
//! survive. This crate computes `ell` (and the secret-key fraction
//! `r_N = ell / N`) from the composable finite-key bound
//!
//! ```text
//! r_N = (n / N) * [ min over attacks at Q +/- dV of H(A|E)
//!                   - Delta(n) - leak_EC / n ]
//! ```
//!
//! where `Delta(n)` is the finite-sample privacy-amplification overhead, `dV`
//! the statistical uncertainty on the observed error rate, and `leak_EC` the
//! information disclosed during error correction. Every term is a closed form;
//! the interesting work is choosing the free parameters well.
//!
//! Module map:
//!
//! - [`entropy`]: binary entropy, per-protocol collective-attack bounds on
//!   Eve's uncertainty `H(A|E)`, and the asymptotic rate they imply.
//! - [`finite_key`]: the bound itself — `Delta(n)`, `dV`, the leak model, the
//!   failure-probability budget, and [`finite_key::key_length`] assembling
//!   them.
//! - [`optimizer`]: maximize `ell` over the raw-key/estimation split and the
//!   failure-probability allocation; locate the critical `N` where a positive
//!   key first appears.
//! - [`rapid`]: back-of-envelope estimates of both overhead terms and the two
//!   case studies they support.
//! - [`simulator`]: seeded Monte Carlo checks that the statistical claims
//!   behind the bound hold on sampled data.
//! - [`cli`]: the `finikey` command-line front end.
//!
//! # Example
//!
//! ```
//! use finikey::entropy::{Protocol, ProtocolSpec};
//! use finikey::finite_key::{ChannelObservation, EpsilonBudget, RunConfig, key_length};
//!
//! let spec = ProtocolSpec::new(Protocol::Bb84);
//! let budget = EpsilonBudget::new(1e-3, 1e-3, 1e-3, 1e-3, 1).unwrap();
//! let config = RunConfig::new(1_000_000, 500_000, 1.2, spec, budget).unwrap();
//! let obs = ChannelObservation::new(0.01, 500_000, 2).unwrap();
//! let result = key_length(&config, &obs, None).unwrap();
//! assert_eq!(result.ell, 376_648);
//! ```

pub mod cli;
pub mod entropy;
pub mod finite_key;
pub mod optimizer;
pub mod rapid;
pub mod simulator;

use thiserror::Error;

/// Errors shared by every module: almost all of them are domain violations of
/// an operation's preconditions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("{name} must lie strictly inside (0, 1), got {value}")]
    EpsilonOutOfRange { name: &'static str, value: f64 },

    #[error("total failure probability must stay below 1, got {total}")]
    EpsilonBudgetTooLarge { total: f64 },

    #[error("{name} must be at least {min}, got {value}")]
    CountTooSmall {
        name: &'static str,
        min: u64,
        value: u64,
    },

    #[error("error rate {q} exceeds the protocol bound q_max = {q_max}")]
    ErrorRateAboveBound { q: f64, q_max: f64 },

    #[error("q_max must lie in (0, 1/2], got {value}")]
    QMaxOutOfRange { value: f64 },

    #[error("error-correction inefficiency must be >= 1, got {value}")]
    InefficiencyBelowOne { value: f64 },

    #[error("raw key length {raw} must be >= 1 and < total signals {total}")]
    InvalidSplit { raw: u64, total: u64 },

    #[error("observation used {observed} estimation signals but the split requires {expected}")]
    EstimationSizeMismatch { observed: u64, expected: u64 },

    #[error("measured leak must be nonnegative and finite, got {value}")]
    InvalidMeasuredLeak { value: f64 },

    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },

    #[error("asymptotic rate is not positive at error rate {q}; no run size yields a key")]
    AsymptoticRateNotPositive { q: f64 },

    #[error("no positive key below the search cap of {cap} signals")]
    CriticalNotFoundBelowCap { cap: u64 },

    #[error("requested work of {requested} draws exceeds the budget of {budget}")]
    WorkBudgetExceeded { requested: u64, budget: u64 },
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
