//! Back-of-envelope estimates of the finite-key overheads.
//!
//! Assuming every failure probability is of order `10^-3 ~ 2^-10` and the run
//! splits evenly (`m ~ n ~ N/2`), the two overhead terms collapse to
//! functions of the run size alone:
//!
//! ```text
//! Delta(n) ~ 40/N + 7 sqrt(12/N)        dV ~ sqrt((9 + 2 ln N) / N)
//! ```
//!
//! These are kept exactly in this form, separate from the exact bound, as a
//! sanity-check layer. Substituting the stated approximations into the exact
//! expressions actually gives slightly different constants (`7 sqrt(22/N)`
//! instead of `7 sqrt(12/N)`, and `6.93 + 2 ln(N/2 + 1)` inside the root
//! instead of `9 + 2 ln N`); [`rapid_estimate`] reports both variants side by
//! side rather than guessing which derivation was intended.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

fn check_run_size(total_signals: u64) -> Result<()> {
    if total_signals < 1 {
        return Err(Error::CountTooSmall {
            name: "N",
            min: 1,
            value: total_signals,
        });
    }
    Ok(())
}

/// Rapid form of the privacy-amplification overhead: `40/N + 7 sqrt(12/N)`.
pub fn rapid_delta_n(total_signals: u64) -> Result<f64> {
    check_run_size(total_signals)?;
    let n = total_signals as f64;
    Ok(40.0 / n + 7.0 * (12.0 / n).sqrt())
}

/// Rapid form of the fluctuation allowance: `sqrt((9 + 2 ln N) / N)`.
pub fn rapid_delta_v(total_signals: u64) -> Result<f64> {
    check_run_size(total_signals)?;
    let n = total_signals as f64;
    Ok(((9.0 + 2.0 * n.ln()) / n).sqrt())
}

/// Both overhead estimates at one run size, in the quoted form and in the
/// form obtained by actually substituting `eps = 2^-10`, `m = n = N/2` into
/// the exact expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RapidEstimate {
    pub total_signals: u64,
    pub delta_n_approx: f64,
    pub delta_v_approx: f64,
    pub delta_n_exact_sub: f64,
    pub delta_v_exact_sub: f64,
}

pub fn rapid_estimate(total_signals: u64) -> Result<RapidEstimate> {
    check_run_size(total_signals)?;
    let n = total_signals as f64;
    Ok(RapidEstimate {
        total_signals,
        delta_n_approx: rapid_delta_n(total_signals)?,
        delta_v_approx: rapid_delta_v(total_signals)?,
        delta_n_exact_sub: 40.0 / n + 7.0 * (22.0 / n).sqrt(),
        delta_v_exact_sub: ((2f64.powi(10).ln() + 2.0 * (n / 2.0 + 1.0).ln()) / n).sqrt(),
    })
}

/// Smallest run size satisfying a monotone predicate, by doubling then
/// integer bisection.
fn smallest_run_size(mut holds: impl FnMut(u64) -> bool) -> Result<u64> {
    if holds(1) {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !holds(hi) {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or(Error::CriticalNotFoundBelowCap { cap: u64::MAX / 2 })?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Effect of the privacy-amplification overhead alone: smallest `N` with
/// `r_inf - rapid_delta_n(N) > 0`, fluctuations neglected.
pub fn case_study_1(r_inf: f64) -> Result<u64> {
    if !(r_inf > 0.0 && r_inf <= 1.0) {
        return Err(Error::ProbabilityOutOfRange {
            name: "r_inf",
            value: r_inf,
        });
    }
    smallest_run_size(|n| r_inf - rapid_delta_n(n).unwrap() > 0.0)
}

/// Effect of the fluctuation allowance alone: smallest `N` whose rapid `dV`
/// meets the requested precision.
pub fn case_study_2(target_dv: f64) -> Result<u64> {
    if !(target_dv > 0.0 && target_dv.is_finite()) {
        return Err(Error::NotFinite {
            name: "target_dv",
            value: target_dv,
        });
    }
    smallest_run_size(|n| rapid_delta_v(n).unwrap() <= target_dv)
}
