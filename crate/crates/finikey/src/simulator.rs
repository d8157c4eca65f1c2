//! Seeded Monte Carlo validation of the statistical claims behind the bound.
//!
//! Two checks: that the fluctuation allowance `dV` really covers the
//! empirical error rate except with probability at most `eps_pe`
//! ([`validate_delta_v`]), and that an end-to-end sampled run realizes a key
//! length consistent with the deterministic bound ([`simulate_run`]).
//!
//! Error positions are i.i.d. Bernoulli draws (the collective-attack channel
//! model) and the estimation subset is sampled uniformly without replacement;
//! the fluctuation bound is agnostic to the with/without-replacement
//! distinction at its level of looseness. Randomness comes from a
//! counter-based generator with one independent substream per trial, derived
//! from `(seed, trial index)`, so reports are bit-identical for a given seed
//! no matter how trials are scheduled.

use crate::entropy::ProtocolSpec;
use crate::finite_key::{
    delta_v, key_length, ChannelObservation, EpsilonBudget, KeyRateResult, RunConfig,
};
use crate::optimizer::optimize_split;
use crate::{Error, Result};
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default ceiling on total Bernoulli draws per call.
pub const DEFAULT_WORK_BUDGET: u64 = 20_000_000_000;
/// Run-size ceiling for [`simulate_run`], which materializes the run.
pub const SIMULATE_MAX_SIGNALS: u64 = 50_000_000;

/// Inputs of one fluctuation-validation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub q_true: f64,
    pub m: u64,
    pub trials: u64,
    pub eps_pe: f64,
    pub d: u32,
    pub seed: u64,
}

impl TrialSpec {
    pub fn new(q_true: f64, m: u64, trials: u64, eps_pe: f64, d: u32, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q_true) {
            return Err(Error::ProbabilityOutOfRange {
                name: "q_true",
                value: q_true,
            });
        }
        if m < 1 {
            return Err(Error::CountTooSmall {
                name: "m",
                min: 1,
                value: m,
            });
        }
        if trials < 1 {
            return Err(Error::CountTooSmall {
                name: "trials",
                min: 1,
                value: trials,
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
        Ok(TrialSpec {
            q_true,
            m,
            trials,
            eps_pe,
            d,
            seed,
        })
    }
}

/// Aggregated outcome of a fluctuation-validation experiment.
///
/// All aggregations are order-independent (integer sums and max reductions),
/// which is what makes the report deterministic under concurrent trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRunReport {
    pub trials: u64,
    /// Trials whose empirical rate deviated from `q_true` by more than `dV`.
    pub violation_count: u64,
    pub violation_fraction: f64,
    pub delta_v_used: f64,
    /// Mean empirical rate over all trials (exact: accumulated as counts).
    pub mean_qhat: f64,
    pub max_abs_deviation: f64,
    pub d_warning: bool,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draw `trials` empirical rates over `m` Bernoulli(`q_true`) samples each
/// and count how often the deviation exceeds the fluctuation allowance
/// `delta_v(m, eps_pe, d)`. The bound is valid (and generally loose): the
/// violation fraction stays at or below `eps_pe`.
pub fn validate_delta_v(spec: &TrialSpec) -> Result<SimRunReport> {
    validate_delta_v_budgeted(spec, DEFAULT_WORK_BUDGET)
}

/// [`validate_delta_v`] with an explicit work budget on `trials * m` draws.
pub fn validate_delta_v_budgeted(spec: &TrialSpec, work_budget: u64) -> Result<SimRunReport> {
    let requested = spec.trials.saturating_mul(spec.m);
    if requested > work_budget {
        return Err(Error::WorkBudgetExceeded {
            requested,
            budget: work_budget,
        });
    }
    let allowance = delta_v(spec.m, spec.eps_pe, spec.d)?;
    let coin = Bernoulli::new(spec.q_true).expect("validated probability");
    let m = spec.m;
    let q_true = spec.q_true;
    let seed = spec.seed;

    let (violations, error_total, max_dev) = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut errors = 0u64;
            for _ in 0..m {
                if coin.sample(&mut rng) {
                    errors += 1;
                }
            }
            let deviation = (errors as f64 / m as f64 - q_true).abs();
            let violated = (deviation > allowance.value) as u64;
            (violated, errors, deviation)
        })
        .reduce(
            || (0u64, 0u64, 0f64),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)),
        );

    Ok(SimRunReport {
        trials: spec.trials,
        violation_count: violations,
        violation_fraction: violations as f64 / spec.trials as f64,
        delta_v_used: allowance.value,
        mean_qhat: error_total as f64 / (spec.trials as f64 * m as f64),
        max_abs_deviation: max_dev,
        d_warning: allowance.d_warning,
    })
}

/// Uniform random subset of `count` indices out of `0..total`, by partial
/// Fisher-Yates. `total` must fit in u32.
pub(crate) fn sample_subset(total: u64, count: u64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    debug_assert!(total <= u32::MAX as u64 && count <= total);
    let mut indices: Vec<u32> = (0..total as u32).collect();
    for slot in 0..count as usize {
        let pick = rng.random_range(slot..total as usize);
        indices.swap(slot, pick);
    }
    indices.truncate(count as usize);
    indices
}

/// Sample one full run: draw `total_signals` error indicators at rate
/// `q_true`, sacrifice a uniformly chosen estimation subset (its size comes
/// from optimizing the split at `q_true`), and push the resulting empirical
/// rate through the deterministic bound with the caller's budget.
pub fn simulate_run(
    total_signals: u64,
    q_true: f64,
    spec: &ProtocolSpec,
    budget: &EpsilonBudget,
    ec_inefficiency: f64,
    seed: u64,
) -> Result<KeyRateResult> {
    if total_signals < 2 {
        return Err(Error::CountTooSmall {
            name: "N",
            min: 2,
            value: total_signals,
        });
    }
    if total_signals > SIMULATE_MAX_SIGNALS {
        return Err(Error::WorkBudgetExceeded {
            requested: total_signals,
            budget: SIMULATE_MAX_SIGNALS,
        });
    }
    if !(0.0..=1.0).contains(&q_true) {
        return Err(Error::ProbabilityOutOfRange {
            name: "q_true",
            value: q_true,
        });
    }

    let optimum = optimize_split(total_signals, q_true, budget.total(), spec, ec_inefficiency)?;
    let raw_key_len = optimum.best_n;
    let estimation_len = total_signals - raw_key_len;

    let mut rng = trial_rng(seed, 0);
    let coin = Bernoulli::new(q_true).expect("validated probability");
    let errors: Vec<bool> = (0..total_signals).map(|_| coin.sample(&mut rng)).collect();
    let subset = sample_subset(total_signals, estimation_len, &mut rng);
    let observed = subset.iter().filter(|&&i| errors[i as usize]).count();
    let q_hat = observed as f64 / estimation_len as f64;

    let config = RunConfig::new(total_signals, raw_key_len, ec_inefficiency, *spec, *budget)?;
    let obs = ChannelObservation::new(q_hat, estimation_len, spec.d)?;
    key_length(&config, &obs, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Protocol;

    fn bb84() -> ProtocolSpec {
        ProtocolSpec::new(Protocol::Bb84)
    }

    fn milli_budget() -> EpsilonBudget {
        EpsilonBudget::new(1e-3, 1e-3, 1e-3, 1e-3, 1).unwrap()
    }

    #[test]
    fn no_violations_when_channel_is_quiet() {
        let spec = TrialSpec::new(0.0, 500, 2_000, 1e-3, 2, 7).unwrap();
        let report = validate_delta_v(&spec).unwrap();
        assert_eq!(report.violation_count, 0);
        assert_eq!(report.mean_qhat, 0.0);
        assert_eq!(report.max_abs_deviation, 0.0);
    }

    #[test]
    fn violation_fraction_bounded_by_eps_pe() {
        let spec = TrialSpec::new(0.05, 1_000, 100_000, 1e-3, 2, 42).unwrap();
        let report = validate_delta_v(&spec).unwrap();
        assert!((report.delta_v_used - 0.10179701576572021).abs() < 1e-15);
        assert!(report.violation_fraction <= 1e-3);
        // the allowance is ~15 standard errors here, so no trial comes close
        assert_eq!(report.violation_count, 0);
        assert!((report.mean_qhat - 0.05).abs() < 1e-3);
    }

    #[test]
    fn deviation_scales_with_sample_size() {
        let small = TrialSpec::new(0.05, 100, 20_000, 1e-3, 2, 9).unwrap();
        let large = TrialSpec::new(0.05, 10_000, 20_000, 1e-3, 2, 9).unwrap();
        let dev_small = validate_delta_v(&small).unwrap().max_abs_deviation;
        let dev_large = validate_delta_v(&large).unwrap().max_abs_deviation;
        let ratio = dev_small / dev_large;
        // sqrt(1/m) scaling predicts 10x; allow sampling slack
        assert!((5.0..20.0).contains(&ratio), "scaling ratio {ratio}");
    }

    #[test]
    fn reports_reproduce_bit_for_bit() {
        let spec = TrialSpec::new(0.03, 700, 5_000, 1e-2, 2, 1234).unwrap();
        let a = validate_delta_v(&spec).unwrap();
        let b = validate_delta_v(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean_qhat.to_bits(), b.mean_qhat.to_bits());
        assert_eq!(a.max_abs_deviation.to_bits(), b.max_abs_deviation.to_bits());
    }

    #[test]
    fn reports_independent_of_thread_count() {
        let spec = TrialSpec::new(0.02, 300, 4_000, 1e-2, 2, 55).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let a = single.install(|| validate_delta_v(&spec).unwrap());
        let b = many.install(|| validate_delta_v(&spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn work_budget_is_enforced() {
        let spec = TrialSpec::new(0.05, 1_000_000, 1_000_000, 1e-3, 2, 0).unwrap();
        assert!(matches!(
            validate_delta_v(&spec),
            Err(Error::WorkBudgetExceeded { .. })
        ));
        let tight = TrialSpec::new(0.05, 100, 10, 1e-3, 2, 0).unwrap();
        assert!(validate_delta_v_budgeted(&tight, 999).is_err());
        assert!(validate_delta_v_budgeted(&tight, 1_000).is_ok());
    }

    #[test]
    fn subset_sampling_is_uniform() {
        // chi-square goodness of fit on inclusion counts across seeds;
        // threshold is the 1 - 1e-4 quantile for 31 degrees of freedom
        let total = 32u64;
        let count = 8u64;
        let seeds = 4_000u64;
        let mut inclusion = [0u64; 32];
        for seed in 0..seeds {
            let mut rng = trial_rng(seed, 0);
            for i in sample_subset(total, count, &mut rng) {
                inclusion[i as usize] += 1;
            }
        }
        let expected = (seeds * count) as f64 / total as f64;
        let statistic: f64 = inclusion
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(
            statistic < 69.105692289867,
            "chi-square statistic {statistic}"
        );
    }

    #[test]
    fn quiet_channel_run_matches_deterministic_bound() {
        let result = simulate_run(20_000, 0.0, &bb84(), &milli_budget(), 1.2, 3).unwrap();
        let optimum = optimize_split(20_000, 0.0, 4e-3, &bb84(), 1.2).unwrap();
        let config = RunConfig::new(20_000, optimum.best_n, 1.2, bb84(), milli_budget()).unwrap();
        let obs = ChannelObservation::new(0.0, 20_000 - optimum.best_n, 2).unwrap();
        let deterministic = key_length(&config, &obs, None).unwrap();
        assert_eq!(result.ell, deterministic.ell);
    }

    #[test]
    fn sampled_run_stays_near_deterministic_bound() {
        let budget = milli_budget();
        let result = simulate_run(1_000_000, 0.01, &bb84(), &budget, 1.2, 77).unwrap();
        let optimum = optimize_split(1_000_000, 0.01, 4e-3, &bb84(), 1.2).unwrap();
        let config = RunConfig::new(1_000_000, optimum.best_n, 1.2, bb84(), budget).unwrap();
        let obs = ChannelObservation::new(0.01, 1_000_000 - optimum.best_n, 2).unwrap();
        let deterministic = key_length(&config, &obs, None).unwrap();
        let rel = (result.ell as f64 - deterministic.ell as f64).abs() / deterministic.ell as f64;
        assert!(
            rel < 0.15,
            "sampled ell {} vs deterministic {}",
            result.ell,
            deterministic.ell
        );
    }

    #[test]
    fn sampled_runs_instantiate_the_confidence_statement() {
        // across many seeded runs, the sampled key length should exceed the
        // deterministic key length at q_true + dV in all but ~eps_pe of runs
        let total = 100_000u64;
        let q_true = 0.01;
        let budget = milli_budget();
        let spec = bb84();
        let optimum = optimize_split(total, q_true, budget.total(), &spec, 1.2).unwrap();
        let estimation = total - optimum.best_n;
        let allowance = delta_v(estimation, budget.eps_pe(), 2).unwrap().value;
        let config = RunConfig::new(total, optimum.best_n, 1.2, spec, budget).unwrap();
        let obs = ChannelObservation::new(q_true + allowance, estimation, 2).unwrap();
        let pessimistic = key_length(&config, &obs, None).unwrap();

        let seeds = 1_000u64;
        let below = (0..seeds)
            .into_par_iter()
            .filter(|&seed| {
                let run = simulate_run(total, q_true, &spec, &budget, 1.2, seed).unwrap();
                run.ell > pessimistic.ell
            })
            .count();
        let fraction = below as f64 / seeds as f64;
        assert!(fraction >= 1.0 - budget.eps_pe(), "fraction {fraction}");
    }

    #[test]
    fn simulate_run_is_seed_deterministic() {
        let a = simulate_run(50_000, 0.02, &bb84(), &milli_budget(), 1.2, 11).unwrap();
        let b = simulate_run(50_000, 0.02, &bb84(), &milli_budget(), 1.2, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_run_rejects_oversized_runs() {
        assert!(matches!(
            simulate_run(
                SIMULATE_MAX_SIGNALS + 1,
                0.01,
                &bb84(),
                &milli_budget(),
                1.2,
                0
            ),
            Err(Error::WorkBudgetExceeded { .. })
        ));
    }
}
