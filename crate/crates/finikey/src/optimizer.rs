//! Maximize the key length over the choices the bound leaves open.
//!
//! Two knobs are free once the run size and the total failure probability are
//! fixed: how many signals go to the raw key versus estimation, and how the
//! failure budget is allocated over its four components. The key length is
//! unimodal in the split in practice, so a golden-section search (verified by
//! a coarse scan, with a dense-grid fallback) runs on the outside; each probe
//! is scored after a coordinate-descent pass over the budget allocation. The
//! objective is the real-valued key length before integer flooring, which
//! keeps the search surface smooth; final candidates are re-scored through
//! [`key_length`] so reported results are exact.
//!
//! Everything here is deterministic: identical inputs produce bit-identical
//! outputs.

use crate::entropy::{asymptotic_rate, binary_entropy, h_ae, ProtocolSpec};
use crate::finite_key::{
    delta_n, delta_v, ChannelObservation, EpsilonBudget, KeyRateResult, RunConfig,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// Search cap for [`critical_n`].
pub const CRITICAL_N_CAP: u64 = 10_000_000_000;

const GOLDEN_RATIO: f64 = 1.618033988749895;
/// Coarse-scan resolution used to check unimodality before golden section.
const SCAN_POINTS: usize = 32;
/// Fallback grid resolution when the coarse scan is not unimodal.
const DENSE_POINTS: usize = 256;
/// Relative convergence of the budget coordinate descent.
const BUDGET_TOL: f64 = 1e-3;

/// Best split and budget found for one run size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_n: u64,
    pub best_budget: EpsilonBudget,
    pub result: KeyRateResult,
    pub evaluations: u64,
}

struct Objective {
    total_signals: u64,
    q_obs: f64,
    eps_total: f64,
    spec: ProtocolSpec,
    ec_inefficiency: f64,
    h2_q_obs: f64,
    evaluations: Cell<u64>,
}

/// Budget shares for (pa, bar, pe); the error-correction component absorbs
/// the remainder so the composed total meets `eps_total` to the last ulp.
type Shares = [f64; 3];

const EQUAL_SHARES: Shares = [0.25, 0.25, 0.25];
const MIN_SHARE: f64 = 1e-6;
const MAX_SHARE: f64 = 0.999;

impl Objective {
    fn new(
        total_signals: u64,
        q_obs: f64,
        eps_total: f64,
        spec: ProtocolSpec,
        ec_inefficiency: f64,
    ) -> Result<Self> {
        if total_signals < 2 {
            return Err(Error::CountTooSmall {
                name: "N",
                min: 2,
                value: total_signals,
            });
        }
        if !(eps_total > 0.0 && eps_total < 1.0) {
            return Err(Error::EpsilonOutOfRange {
                name: "eps_total",
                value: eps_total,
            });
        }
        if !(ec_inefficiency >= 1.0) {
            return Err(Error::InefficiencyBelowOne {
                value: ec_inefficiency,
            });
        }
        if !(q_obs >= 0.0) {
            return Err(Error::ProbabilityOutOfRange {
                name: "q_obs",
                value: q_obs,
            });
        }
        if q_obs > spec.q_max {
            return Err(Error::ErrorRateAboveBound {
                q: q_obs,
                q_max: spec.q_max,
            });
        }
        Ok(Objective {
            total_signals,
            q_obs,
            eps_total,
            spec,
            ec_inefficiency,
            h2_q_obs: binary_entropy(q_obs)?,
            evaluations: Cell::new(0),
        })
    }

    fn budget(&self, shares: Shares) -> Option<EpsilonBudget> {
        let [s_pa, s_bar, s_pe] = shares;
        let n_pe = self.spec.n_pe;
        let eps_pa = s_pa * self.eps_total;
        let eps_bar = s_bar * self.eps_total;
        let eps_pe = s_pe * self.eps_total / n_pe as f64;
        // mirror EpsilonBudget::total()'s evaluation order so the remainder
        // closes the sum exactly
        let eps_ec = self.eps_total - (eps_pa + eps_bar + n_pe as f64 * eps_pe);
        EpsilonBudget::new(eps_pa, eps_bar, eps_pe, eps_ec, n_pe).ok()
    }

    /// Real-valued key length before flooring; `-inf` for infeasible budgets.
    fn real_key_length(&self, raw_key_len: u64, shares: Shares) -> f64 {
        self.evaluations.set(self.evaluations.get() + 1);
        let Some(budget) = self.budget(shares) else {
            return f64::NEG_INFINITY;
        };
        let estimation = self.total_signals - raw_key_len;
        let Ok(dv) = delta_v(estimation, budget.eps_pe(), self.spec.d) else {
            return f64::NEG_INFINITY;
        };
        let q_pess = (self.q_obs + dv.value).min(self.spec.q_max);
        let h = h_ae(&self.spec, q_pess).expect("q_pess clamped into domain");
        let dn =
            delta_n(raw_key_len, budget.eps_pa(), budget.eps_bar()).expect("validated epsilons");
        let n = raw_key_len as f64;
        let leak = self.ec_inefficiency * n * self.h2_q_obs + (2.0 / budget.eps_ec()).log2();
        n * (h - dn) - leak
    }

    /// Coordinate descent over the budget shares at a fixed split, with
    /// multiplicative steps shrinking toward 1. Returns the best shares and
    /// their objective value.
    fn optimize_budget(&self, raw_key_len: u64) -> (Shares, f64) {
        let mut shares = EQUAL_SHARES;
        let mut best = self.real_key_length(raw_key_len, shares);
        for step in [4.0, 2.0, 1.4, 1.15, 1.05, 1.02] {
            loop {
                let before = best;
                for coord in 0..3 {
                    for factor in [step, 1.0 / step] {
                        let mut candidate = shares;
                        candidate[coord] = (candidate[coord] * factor).clamp(MIN_SHARE, MAX_SHARE);
                        let value = self.real_key_length(raw_key_len, candidate);
                        if value > best {
                            best = value;
                            shares = candidate;
                        }
                    }
                }
                if !(best > before + BUDGET_TOL * before.abs().max(1e-9)) {
                    break;
                }
            }
        }
        (shares, best)
    }

    fn score(&self, raw_key_len: u64) -> f64 {
        self.optimize_budget(raw_key_len).1
    }
}

/// Maximize `ell` over the raw-key/estimation split and the budget
/// allocation at a fixed run size.
///
/// Returns an `ell = 0` result (not an error) when no choice yields a
/// positive key. The reported result never falls below the baseline of an
/// even split with an equally divided budget.
pub fn optimize_split(
    total_signals: u64,
    q_obs: f64,
    eps_total: f64,
    spec: &ProtocolSpec,
    ec_inefficiency: f64,
) -> Result<OptimizationResult> {
    let objective = Objective::new(total_signals, q_obs, eps_total, *spec, ec_inefficiency)?;

    let max_raw = total_signals - 1;
    let mut best_n = 1u64;
    let mut best_value = f64::NEG_INFINITY;
    let mut consider = |objective: &Objective, n: u64| {
        let value = objective.score(n);
        if value > best_value {
            best_value = value;
            best_n = n;
        }
    };

    if max_raw <= 64 {
        for n in 1..=max_raw {
            consider(&objective, n);
        }
    } else {
        // coarse scan across the full split range
        let scan: Vec<u64> = unique_grid(1, max_raw, SCAN_POINTS);
        let values: Vec<f64> = scan.iter().map(|&n| objective.score(n)).collect();
        let peak = argmax(&values);
        let (lo, hi) = if is_unimodal(&values, peak) {
            bracket(&scan, peak)
        } else {
            // no single peak at coarse resolution: fall back to a dense grid
            // and refine around its argmax
            let dense: Vec<u64> = unique_grid(1, max_raw, DENSE_POINTS);
            let dense_values: Vec<f64> = dense.iter().map(|&n| objective.score(n)).collect();
            let dense_peak = argmax(&dense_values);
            bracket(&dense, dense_peak)
        };
        let refined = golden_section(&objective, lo, hi);
        for n in refined {
            consider(&objective, n);
        }
        consider(&objective, scan[peak]);
    }

    let (best_shares, _) = objective.optimize_budget(best_n);
    let best_budget = objective
        .budget(best_shares)
        .unwrap_or(EpsilonBudget::equal_split(eps_total, spec.n_pe)?);
    let optimized = exact_result(
        total_signals,
        best_n,
        q_obs,
        &best_budget,
        spec,
        ec_inefficiency,
    )?;

    // baseline: even split, equally divided budget; the optimizer must
    // dominate it, so keep whichever is better
    let baseline_n = (total_signals / 2).clamp(1, max_raw);
    let baseline_budget = EpsilonBudget::equal_split(eps_total, spec.n_pe)?;
    let baseline = exact_result(
        total_signals,
        baseline_n,
        q_obs,
        &baseline_budget,
        spec,
        ec_inefficiency,
    )?;

    let evaluations = objective.evaluations.get();
    if baseline.ell > optimized.ell {
        return Ok(OptimizationResult {
            best_n: baseline_n,
            best_budget: baseline_budget,
            result: baseline,
            evaluations,
        });
    }
    Ok(OptimizationResult {
        best_n,
        best_budget,
        result: optimized,
        evaluations,
    })
}

fn exact_result(
    total_signals: u64,
    raw_key_len: u64,
    q_obs: f64,
    budget: &EpsilonBudget,
    spec: &ProtocolSpec,
    ec_inefficiency: f64,
) -> Result<KeyRateResult> {
    let config = RunConfig::new(total_signals, raw_key_len, ec_inefficiency, *spec, *budget)?;
    let obs = ChannelObservation::new(q_obs, total_signals - raw_key_len, spec.d)?;
    crate::finite_key::key_length(&config, &obs, None)
}

fn unique_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let span = (hi - lo) as f64;
    let mut grid: Vec<u64> = (0..points)
        .map(|i| lo + (span * i as f64 / (points - 1) as f64).round() as u64)
        .collect();
    grid.dedup();
    grid
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A sampled shape is unimodal when it never rises after the peak and never
/// falls before it, up to floating-point wiggle.
fn is_unimodal(values: &[f64], peak: usize) -> bool {
    let tol = 1e-9 * values[peak].abs().max(1.0);
    let rising_ok = values[..=peak].windows(2).all(|w| w[1] >= w[0] - tol);
    let falling_ok = values[peak..].windows(2).all(|w| w[1] <= w[0] + tol);
    rising_ok && falling_ok
}

fn bracket(grid: &[u64], peak: usize) -> (u64, u64) {
    let lo = if peak == 0 { grid[0] } else { grid[peak - 1] };
    let hi = if peak + 1 == grid.len() {
        grid[grid.len() - 1]
    } else {
        grid[peak + 1]
    };
    (lo, hi)
}

/// Golden-section search over the integer split range; returns the candidate
/// splits around the continuous optimum.
fn golden_section(objective: &Objective, lo: u64, hi: u64) -> Vec<u64> {
    let mut a = lo as f64;
    let mut b = hi as f64;
    let eval = |x: f64| objective.score(x.round() as u64);
    let mut c = b - (b - a) / GOLDEN_RATIO;
    let mut d = a + (b - a) / GOLDEN_RATIO;
    let mut fc = eval(c);
    let mut fd = eval(d);
    while b - a > 2.0 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) / GOLDEN_RATIO;
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) / GOLDEN_RATIO;
            fd = eval(d);
        }
    }
    let center = (0.5 * (a + b)).round() as i64;
    (-1..=1)
        .map(|offset| (center + offset).clamp(lo as i64, hi as i64) as u64)
        .collect()
}

/// Smallest run size whose optimized key length is positive, by exponential
/// doubling then integer bisection, re-optimizing at every probe. Errors when
/// the asymptotic rate is not positive (no run size can work) or when no
/// positive key appears below [`CRITICAL_N_CAP`].
pub fn critical_n(
    q_obs: f64,
    eps_total: f64,
    spec: &ProtocolSpec,
    ec_inefficiency: f64,
) -> Result<u64> {
    if asymptotic_rate(spec, q_obs)? <= 0.0 {
        return Err(Error::AsymptoticRateNotPositive { q: q_obs });
    }
    let positive = |total: u64| -> Result<bool> {
        Ok(
            optimize_split(total, q_obs, eps_total, spec, ec_inefficiency)?
                .result
                .ell
                > 0,
        )
    };
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !positive(hi)? {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > CRITICAL_N_CAP {
            if positive(CRITICAL_N_CAP)? {
                hi = CRITICAL_N_CAP;
                break;
            }
            return Err(Error::CriticalNotFoundBelowCap {
                cap: CRITICAL_N_CAP,
            });
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if positive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One optimized result per grid point, in input order. Grid points are
/// evaluated concurrently; each evaluation is independent and deterministic,
/// so the assembled output does not depend on scheduling.
pub fn scan(
    spec: &ProtocolSpec,
    q_obs: f64,
    eps_total: f64,
    ec_inefficiency: f64,
    run_sizes: &[u64],
) -> Result<Vec<(u64, OptimizationResult)>> {
    run_sizes
        .par_iter()
        .map(|&total| {
            optimize_split(total, q_obs, eps_total, spec, ec_inefficiency)
                .map(|result| (total, result))
        })
        .collect()
}
