//! The finite-key bound: overhead terms, failure budget, and key length.
//!
//! The secret-key length of a finite run is
//!
//! ```text
//! ell = floor( n * [ H(A|E at q_pess) - Delta(n) ] - leak_EC )
//! ```
//!
//! clamped at 0, where `q_pess = min(q_obs + dV, q_max)` is the worst error
//! rate compatible with the estimate, `Delta(n)` the privacy-amplification
//! overhead, and `leak_EC` the error-correction disclosure. Each term is its
//! own operation here so it can be tested and reported separately.
//!
//! Logarithm conventions are part of the contract: `Delta(n)` uses base-2
//! logs, `dV` uses natural logs.

use crate::entropy::{binary_entropy, h_ae, ProtocolSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

fn check_epsilon(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange { name, value })
    }
}

/// The four failure probabilities of a run and their composition.
///
/// `eps_pa` is the privacy-amplification failure, `eps_bar` the smoothing
/// parameter, `eps_pe` the per-parameter estimation failure (counted `n_pe`
/// times), and `eps_ec` the residual error-correction failure. Failure
/// probabilities add, so the run is `total()`-secure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    eps_pa: f64,
    eps_bar: f64,
    eps_pe: f64,
    eps_ec: f64,
    n_pe: u32,
}

impl EpsilonBudget {
    pub fn new(eps_pa: f64, eps_bar: f64, eps_pe: f64, eps_ec: f64, n_pe: u32) -> Result<Self> {
        check_epsilon("eps_pa", eps_pa)?;
        check_epsilon("eps_bar", eps_bar)?;
        check_epsilon("eps_pe", eps_pe)?;
        check_epsilon("eps_ec", eps_ec)?;
        if n_pe < 1 {
            return Err(Error::CountTooSmall {
                name: "n_pe",
                min: 1,
                value: n_pe as u64,
            });
        }
        let budget = EpsilonBudget {
            eps_pa,
            eps_bar,
            eps_pe,
            eps_ec,
            n_pe,
        };
        let total = budget.total();
        if total >= 1.0 {
            return Err(Error::EpsilonBudgetTooLarge { total });
        }
        Ok(budget)
    }

    /// Equal split of `eps_total` over the four failure modes; the estimation
    /// share is divided among the `n_pe` estimated parameters.
    pub fn equal_split(eps_total: f64, n_pe: u32) -> Result<Self> {
        check_epsilon("eps_total", eps_total)?;
        let share = eps_total / 4.0;
        EpsilonBudget::new(share, share, share / n_pe as f64, share, n_pe)
    }

    pub fn eps_pa(&self) -> f64 {
        self.eps_pa
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn eps_pe(&self) -> f64 {
        self.eps_pe
    }

    pub fn eps_ec(&self) -> f64 {
        self.eps_ec
    }

    pub fn n_pe(&self) -> u32 {
        self.n_pe
    }

    /// Total failure probability `eps_pa + eps_bar + n_pe * eps_pe + eps_ec`.
    /// Evaluation order is fixed so callers can construct budgets that meet a
    /// target total to the last ulp.
    pub fn total(&self) -> f64 {
        self.eps_pa + self.eps_bar + self.n_pe as f64 * self.eps_pe + self.eps_ec
    }
}

/// Total failure probability of a budget. Free-function form of
/// [`EpsilonBudget::total`].
pub fn total_epsilon(budget: &EpsilonBudget) -> f64 {
    budget.total()
}

/// An estimate of the channel error rate: the observed rate `q_obs`, the
/// number of signals `m` it was averaged over, and the POVM outcome count `d`
/// of the measurement used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservation {
    pub q_obs: f64,
    pub m: u64,
    pub d: u32,
}

impl ChannelObservation {
    pub fn new(q_obs: f64, m: u64, d: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&q_obs) {
            return Err(Error::ProbabilityOutOfRange {
                name: "q_obs",
                value: q_obs,
            });
        }
        if m < 1 {
            return Err(Error::CountTooSmall {
                name: "m",
                min: 1,
                value: m,
            });
        }
        if d < 2 {
            return Err(Error::CountTooSmall {
                name: "d",
                min: 2,
                value: d as u64,
            });
        }
        Ok(ChannelObservation { q_obs, m, d })
    }
}

/// Everything fixed before a run: the block size, the raw-key/estimation
/// split, the error-correction inefficiency, the protocol, and the budget.
/// The split is exhaustive: every signal is either raw key or estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub total_signals: u64,
    pub raw_key_len: u64,
    pub ec_inefficiency: f64,
    pub spec: ProtocolSpec,
    pub budget: EpsilonBudget,
}

impl RunConfig {
    pub fn new(
        total_signals: u64,
        raw_key_len: u64,
        ec_inefficiency: f64,
        spec: ProtocolSpec,
        budget: EpsilonBudget,
    ) -> Result<Self> {
        if raw_key_len < 1 || raw_key_len >= total_signals {
            return Err(Error::InvalidSplit {
                raw: raw_key_len,
                total: total_signals,
            });
        }
        if !(ec_inefficiency >= 1.0) {
            return Err(Error::InefficiencyBelowOne {
                value: ec_inefficiency,
            });
        }
        Ok(RunConfig {
            total_signals,
            raw_key_len,
            ec_inefficiency,
            spec,
            budget,
        })
    }

    /// Signals sacrificed to parameter estimation.
    pub fn estimation_len(&self) -> u64 {
        self.total_signals - self.raw_key_len
    }
}

/// Key length with a per-term breakdown of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    /// Secret key length in bits.
    pub ell: u64,
    /// Secret-key fraction `ell / N`.
    #[serde(rename = "r_N")]
    pub rate: f64,
    /// Worst-case error rate `min(q_obs + delta_v, q_max)` used in the bound.
    pub q_pess: f64,
    pub delta_v: f64,
    pub delta_n: f64,
    /// Error-correction leakage per raw-key bit.
    pub leak_per_bit: f64,
    /// Eve-uncertainty bound evaluated at `q_pess`.
    pub h_ae_pess: f64,
    /// Set when `q_obs + delta_v` overran `q_max` and was clamped; the result
    /// is then a hard `ell = 0`, not a failure.
    pub q_pess_clamped: bool,
    /// Set when `d > 2`: the fluctuation bound is imprecise there.
    pub d_warning: bool,
}

/// Privacy-amplification overhead
/// `Delta(n) = (2/n) log2(1/eps_pa) + 7 sqrt(log2(2/eps_bar) / n)`.
///
/// Strictly decreasing in `n` and vanishing as `n -> infinity`.
pub fn delta_n(n: u64, eps_pa: f64, eps_bar: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::CountTooSmall {
            name: "n",
            min: 1,
            value: n,
        });
    }
    check_epsilon("eps_pa", eps_pa)?;
    check_epsilon("eps_bar", eps_bar)?;
    let n = n as f64;
    Ok((2.0 / n) * (1.0 / eps_pa).log2() + 7.0 * ((2.0 / eps_bar).log2() / n).sqrt())
}

/// Statistical fluctuation bound together with its precision warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaV {
    pub value: f64,
    /// The bound is imprecise for `d > 2`; no correction is applied, the flag
    /// only reports it.
    pub d_warning: bool,
}

/// Fluctuation allowance on a parameter averaged over `m` samples:
/// `dV = sqrt((ln(1/eps_pe) + d ln(m+1)) / (2m))` (natural logs).
///
/// `eps_pe` is the probability that the true fluctuation exceeds `dV`. The
/// boundary value `eps_pe = 1` is accepted (the `ln(1/eps_pe)` term is then
/// exactly zero).
pub fn delta_v(m: u64, eps_pe: f64, d: u32) -> Result<DeltaV> {
    if m < 1 {
        return Err(Error::CountTooSmall {
            name: "m",
            min: 1,
            value: m,
        });
    }
    if !(eps_pe > 0.0 && eps_pe <= 1.0) {
        return Err(Error::EpsilonOutOfRange {
            name: "eps_pe",
            value: eps_pe,
        });
    }
    if d < 2 {
        return Err(Error::CountTooSmall {
            name: "d",
            min: 2,
            value: d as u64,
        });
    }
    let m = m as f64;
    let value = (((1.0 / eps_pe).ln() + d as f64 * (m + 1.0).ln()) / (2.0 * m)).sqrt();
    Ok(DeltaV {
        value,
        d_warning: d > 2,
    })
}

/// Modeled error-correction disclosure
/// `leak_EC = f * n * h(q) + log2(2 / eps_ec)` in bits.
///
/// This is the model used when no real error-correction transcript exists;
/// [`key_length`] accepts a measured value that overrides it.
pub fn leak_ec(n: u64, q: f64, ec_inefficiency: f64, eps_ec: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::CountTooSmall {
            name: "n",
            min: 1,
            value: n,
        });
    }
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::ProbabilityOutOfRange {
            name: "q",
            value: q,
        });
    }
    if !(ec_inefficiency >= 1.0) {
        return Err(Error::InefficiencyBelowOne {
            value: ec_inefficiency,
        });
    }
    check_epsilon("eps_ec", eps_ec)?;
    Ok(ec_inefficiency * n as f64 * binary_entropy(q)? + (2.0 / eps_ec).log2())
}

/// Probability that privacy amplification to `ell` bits fails given a
/// min-entropy of `hmin`: `2^(-(hmin - ell)/2)`. Inverting it reproduces the
/// length bound `ell <= hmin - 2 log2(1/eps_pa)`.
pub fn pa_failure(ell: u64, hmin: f64) -> f64 {
    2f64.powf(-(hmin - ell as f64) / 2.0)
}

/// Assemble the finite-key bound for one run.
///
/// The minimization over error rates compatible with the estimate is taken at
/// `q_obs + dV` (the entropy bound is nonincreasing in `q`, so that is the
/// pessimistic edge), clamped at `q_max`. A clamped worst case means Eve may
/// know everything and the result is a clean `ell = 0` with
/// [`KeyRateResult::q_pess_clamped`] set. The leak defaults to the
/// [`leak_ec`] model at the observed rate; pass `measured_leak` to use the
/// real transcript length instead.
pub fn key_length(
    config: &RunConfig,
    obs: &ChannelObservation,
    measured_leak: Option<f64>,
) -> Result<KeyRateResult> {
    let n = config.raw_key_len;
    let m = config.estimation_len();
    if obs.m != m {
        return Err(Error::EstimationSizeMismatch {
            observed: obs.m,
            expected: m,
        });
    }
    if obs.q_obs > config.spec.q_max {
        return Err(Error::ErrorRateAboveBound {
            q: obs.q_obs,
            q_max: config.spec.q_max,
        });
    }
    let budget = &config.budget;
    let dv = delta_v(m, budget.eps_pe(), obs.d)?;
    let q_raw = obs.q_obs + dv.value;
    let (q_pess, q_pess_clamped) = if q_raw > config.spec.q_max {
        (config.spec.q_max, true)
    } else {
        (q_raw, false)
    };
    let h_ae_pess = h_ae(&config.spec, q_pess)?;
    let dn = delta_n(n, budget.eps_pa(), budget.eps_bar())?;
    let leak = match measured_leak {
        Some(value) => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidMeasuredLeak { value });
            }
            value
        }
        None => leak_ec(n, obs.q_obs, config.ec_inefficiency, budget.eps_ec())?,
    };
    let ell_real = n as f64 * (h_ae_pess - dn) - leak;
    let ell = if ell_real > 0.0 {
        (ell_real.floor() as u64).min(n)
    } else {
        0
    };
    Ok(KeyRateResult {
        ell,
        rate: ell as f64 / config.total_signals as f64,
        q_pess,
        delta_v: dv.value,
        delta_n: dn,
        leak_per_bit: leak / n as f64,
        h_ae_pess,
        q_pess_clamped,
        d_warning: dv.d_warning,
    })
}
