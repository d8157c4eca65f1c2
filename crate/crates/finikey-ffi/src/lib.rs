//! C ABI for the finikey library.
//!
//! Conventions: every fallible call returns a [`FinikeyStatus`] and writes
//! its result through an out pointer; null pointers are rejected, never
//! dereferenced. The calculator handle is opaque — create it with
//! [`finikey_calculator_new`], release it with [`finikey_calculator_free`].
//! Protocols are passed as integers (`0` = BB84, `1` = six-state) so that
//! arbitrary caller values cannot form an invalid Rust enum.
//!
//! The C header `include/finikey.h` is generated from this file at build
//! time.

// Entry points take raw pointers by C convention; every pointer is
// null-checked before any dereference.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use finikey::entropy::{self, Protocol, ProtocolSpec};
use finikey::finite_key::{
    key_length, ChannelObservation, EpsilonBudget, KeyRateResult, RunConfig,
};
use finikey::optimizer::{self, OptimizationResult};
use finikey::rapid;
use finikey::simulator::{self, TrialSpec};
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

pub const FINIKEY_PROTOCOL_BB84: u32 = 0;
pub const FINIKEY_PROTOCOL_SIX_STATE: u32 = 1;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinikeyStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument violated the operation's domain (reported, never computed
    /// around).
    InvalidArgument = 2,
    /// No result exists below the documented search cap.
    NotFound = 3,
    /// The request exceeded the resource budget.
    ResourceLimit = 4,
    /// The library panicked; the out parameters are untouched.
    Internal = 5,
}

fn status_of(err: &finikey::Error) -> FinikeyStatus {
    match err {
        finikey::Error::CriticalNotFoundBelowCap { .. } => FinikeyStatus::NotFound,
        finikey::Error::WorkBudgetExceeded { .. } => FinikeyStatus::ResourceLimit,
        _ => FinikeyStatus::InvalidArgument,
    }
}

/// Opaque handle bundling a protocol, a failure budget, and the
/// error-correction inefficiency.
pub struct FinikeyCalculator {
    spec: ProtocolSpec,
    budget: EpsilonBudget,
    ec_inefficiency: f64,
}

/// Key length with its per-term breakdown.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinikeyKeyRate {
    pub ell: u64,
    pub rate: f64,
    pub q_pess: f64,
    pub delta_v: f64,
    pub delta_n: f64,
    pub leak_per_bit: f64,
    pub h_ae_pess: f64,
    pub q_pess_clamped: bool,
    pub d_warning: bool,
}

impl From<KeyRateResult> for FinikeyKeyRate {
    fn from(r: KeyRateResult) -> Self {
        FinikeyKeyRate {
            ell: r.ell,
            rate: r.rate,
            q_pess: r.q_pess,
            delta_v: r.delta_v,
            delta_n: r.delta_n,
            leak_per_bit: r.leak_per_bit,
            h_ae_pess: r.h_ae_pess,
            q_pess_clamped: r.q_pess_clamped,
            d_warning: r.d_warning,
        }
    }
}

/// Optimized split, budget allocation, and the resulting key rate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinikeyOptimum {
    pub best_n: u64,
    pub eps_pa: f64,
    pub eps_bar: f64,
    pub eps_pe: f64,
    pub eps_ec: f64,
    pub evaluations: u64,
    pub key_rate: FinikeyKeyRate,
}

impl From<OptimizationResult> for FinikeyOptimum {
    fn from(opt: OptimizationResult) -> Self {
        FinikeyOptimum {
            best_n: opt.best_n,
            eps_pa: opt.best_budget.eps_pa(),
            eps_bar: opt.best_budget.eps_bar(),
            eps_pe: opt.best_budget.eps_pe(),
            eps_ec: opt.best_budget.eps_ec(),
            evaluations: opt.evaluations,
            key_rate: opt.result.into(),
        }
    }
}

/// Aggregated fluctuation-validation report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinikeyTrialReport {
    pub trials: u64,
    pub violation_count: u64,
    pub violation_fraction: f64,
    pub delta_v_used: f64,
    pub mean_qhat: f64,
    pub max_abs_deviation: f64,
    pub d_warning: bool,
}

fn protocol_from(raw: u32) -> Option<Protocol> {
    match raw {
        FINIKEY_PROTOCOL_BB84 => Some(Protocol::Bb84),
        FINIKEY_PROTOCOL_SIX_STATE => Some(Protocol::SixState),
        _ => None,
    }
}

fn guarded(body: impl FnOnce() -> FinikeyStatus) -> FinikeyStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(FinikeyStatus::Internal)
}

fn write_out<T>(out: *mut T, value: T) -> FinikeyStatus {
    if out.is_null() {
        return FinikeyStatus::NullArgument;
    }
    unsafe { out.write(value) };
    FinikeyStatus::Ok
}

/// Create a calculator handle. On success `*out` owns the handle; release it
/// with `finikey_calculator_free`.
#[no_mangle]
pub extern "C" fn finikey_calculator_new(
    protocol: u32,
    d: u32,
    n_pe: u32,
    eps_pa: f64,
    eps_bar: f64,
    eps_pe: f64,
    eps_ec: f64,
    ec_inefficiency: f64,
    out: *mut *mut FinikeyCalculator,
) -> FinikeyStatus {
    guarded(|| {
        if out.is_null() {
            return FinikeyStatus::NullArgument;
        }
        let Some(protocol) = protocol_from(protocol) else {
            return FinikeyStatus::InvalidArgument;
        };
        let spec = match ProtocolSpec::new(protocol)
            .with_d(d)
            .and_then(|s| s.with_n_pe(n_pe))
        {
            Ok(spec) => spec,
            Err(_) => return FinikeyStatus::InvalidArgument,
        };
        let budget = match EpsilonBudget::new(eps_pa, eps_bar, eps_pe, eps_ec, n_pe) {
            Ok(budget) => budget,
            Err(_) => return FinikeyStatus::InvalidArgument,
        };
        if !(ec_inefficiency >= 1.0) {
            return FinikeyStatus::InvalidArgument;
        }
        let handle = Box::new(FinikeyCalculator {
            spec,
            budget,
            ec_inefficiency,
        });
        write_out(out, Box::into_raw(handle))
    })
}

/// Release a handle created by `finikey_calculator_new`. Null is a no-op.
#[no_mangle]
pub extern "C" fn finikey_calculator_free(calc: *mut FinikeyCalculator) {
    if !calc.is_null() {
        drop(unsafe { Box::from_raw(calc) });
    }
}

fn borrow<'a>(calc: *const FinikeyCalculator) -> Option<&'a FinikeyCalculator> {
    if calc.is_null() {
        None
    } else {
        Some(unsafe { &*calc })
    }
}

/// Key length for one fixed run. Pass a negative `measured_leak` to use the
/// built-in leak model; a nonnegative value overrides it with the real
/// error-correction transcript length in bits.
#[no_mangle]
pub extern "C" fn finikey_key_rate(
    calc: *const FinikeyCalculator,
    total_signals: u64,
    raw_key_len: u64,
    q_obs: f64,
    measured_leak: f64,
    out: *mut FinikeyKeyRate,
) -> FinikeyStatus {
    guarded(|| {
        let Some(calc) = borrow(calc) else {
            return FinikeyStatus::NullArgument;
        };
        if out.is_null() {
            return FinikeyStatus::NullArgument;
        }
        let leak = if measured_leak >= 0.0 {
            Some(measured_leak)
        } else {
            None
        };
        let result = RunConfig::new(
            total_signals,
            raw_key_len,
            calc.ec_inefficiency,
            calc.spec,
            calc.budget,
        )
        .and_then(|config| {
            let obs = ChannelObservation::new(q_obs, total_signals - raw_key_len, calc.spec.d)?;
            key_length(&config, &obs, leak)
        });
        match result {
            Ok(r) => write_out(out, r.into()),
            Err(e) => status_of(&e),
        }
    })
}

/// Maximize the key length over the split and the budget allocation.
#[no_mangle]
pub extern "C" fn finikey_optimize(
    calc: *const FinikeyCalculator,
    total_signals: u64,
    q_obs: f64,
    out: *mut FinikeyOptimum,
) -> FinikeyStatus {
    guarded(|| {
        let Some(calc) = borrow(calc) else {
            return FinikeyStatus::NullArgument;
        };
        if out.is_null() {
            return FinikeyStatus::NullArgument;
        }
        let total = calc.budget.total();
        match optimizer::optimize_split(
            total_signals,
            q_obs,
            total,
            &calc.spec,
            calc.ec_inefficiency,
        ) {
            Ok(opt) => write_out(out, opt.into()),
            Err(e) => status_of(&e),
        }
    })
}

/// Smallest run size with a positive optimized key. Returns `NotFound` when
/// no positive key exists below the search cap.
#[no_mangle]
pub extern "C" fn finikey_critical_n(
    calc: *const FinikeyCalculator,
    q_obs: f64,
    out: *mut u64,
) -> FinikeyStatus {
    guarded(|| {
        let Some(calc) = borrow(calc) else {
            return FinikeyStatus::NullArgument;
        };
        match optimizer::critical_n(q_obs, calc.budget.total(), &calc.spec, calc.ec_inefficiency) {
            Ok(n_star) => write_out(out, n_star),
            Err(e) => status_of(&e),
        }
    })
}

/// Binary entropy in bits.
#[no_mangle]
pub extern "C" fn finikey_binary_entropy(x: f64, out: *mut f64) -> FinikeyStatus {
    guarded(|| match entropy::binary_entropy(x) {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    })
}

/// Collective-attack bound on Eve's per-signal uncertainty at error rate `q`
/// for the protocol's default parameters.
#[no_mangle]
pub extern "C" fn finikey_entropy_bound(protocol: u32, q: f64, out: *mut f64) -> FinikeyStatus {
    guarded(|| {
        let Some(protocol) = protocol_from(protocol) else {
            return FinikeyStatus::InvalidArgument;
        };
        match entropy::h_ae(&ProtocolSpec::new(protocol), q) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        }
    })
}

/// Asymptotic secret-key fraction at error rate `q`.
#[no_mangle]
pub extern "C" fn finikey_asymptotic_rate(protocol: u32, q: f64, out: *mut f64) -> FinikeyStatus {
    guarded(|| {
        let Some(protocol) = protocol_from(protocol) else {
            return FinikeyStatus::InvalidArgument;
        };
        match entropy::asymptotic_rate(&ProtocolSpec::new(protocol), q) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        }
    })
}

/// Rapid estimate of the privacy-amplification overhead at run size `n`.
#[no_mangle]
pub extern "C" fn finikey_rapid_delta_n(total_signals: u64, out: *mut f64) -> FinikeyStatus {
    guarded(|| match rapid::rapid_delta_n(total_signals) {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    })
}

/// Rapid estimate of the fluctuation allowance at run size `n`.
#[no_mangle]
pub extern "C" fn finikey_rapid_delta_v(total_signals: u64, out: *mut f64) -> FinikeyStatus {
    guarded(|| match rapid::rapid_delta_v(total_signals) {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    })
}

/// Smallest run size whose rapid overhead stays below `r_inf`.
#[no_mangle]
pub extern "C" fn finikey_rapid_case_1(r_inf: f64, out: *mut u64) -> FinikeyStatus {
    guarded(|| match rapid::case_study_1(r_inf) {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    })
}

/// Smallest run size whose rapid fluctuation allowance meets `target_dv`.
#[no_mangle]
pub extern "C" fn finikey_rapid_case_2(target_dv: f64, out: *mut u64) -> FinikeyStatus {
    guarded(|| match rapid::case_study_2(target_dv) {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    })
}

/// Monte Carlo validation of the fluctuation bound: `trials` empirical rates
/// over `m` samples each, with one deterministic substream per trial.
#[no_mangle]
pub extern "C" fn finikey_validate_delta_v(
    q_true: f64,
    m: u64,
    trials: u64,
    eps_pe: f64,
    d: u32,
    seed: u64,
    out: *mut FinikeyTrialReport,
) -> FinikeyStatus {
    guarded(|| {
        if out.is_null() {
            return FinikeyStatus::NullArgument;
        }
        let report = TrialSpec::new(q_true, m, trials, eps_pe, d, seed)
            .and_then(|spec| simulator::validate_delta_v(&spec));
        match report {
            Ok(r) => write_out(
                out,
                FinikeyTrialReport {
                    trials: r.trials,
                    violation_count: r.violation_count,
                    violation_fraction: r.violation_fraction,
                    delta_v_used: r.delta_v_used,
                    mean_qhat: r.mean_qhat,
                    max_abs_deviation: r.max_abs_deviation,
                    d_warning: r.d_warning,
                },
            ),
            Err(e) => status_of(&e),
        }
    })
}

/// Sample one full run at true error rate `q_true` and evaluate the bound on
/// the sampled estimate. Deterministic for a given seed.
#[no_mangle]
pub extern "C" fn finikey_simulate_run(
    calc: *const FinikeyCalculator,
    total_signals: u64,
    q_true: f64,
    seed: u64,
    out: *mut FinikeyKeyRate,
) -> FinikeyStatus {
    guarded(|| {
        let Some(calc) = borrow(calc) else {
            return FinikeyStatus::NullArgument;
        };
        if out.is_null() {
            return FinikeyStatus::NullArgument;
        }
        match simulator::simulate_run(
            total_signals,
            q_true,
            &calc.spec,
            &calc.budget,
            calc.ec_inefficiency,
            seed,
        ) {
            Ok(r) => write_out(out, r.into()),
            Err(e) => status_of(&e),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn finikey_status_message(status: FinikeyStatus) -> *const c_char {
    let text: &'static [u8] = match status {
        FinikeyStatus::Ok => b"ok\0",
        FinikeyStatus::NullArgument => b"a required pointer argument was null\0",
        FinikeyStatus::InvalidArgument => b"an argument violated the operation's domain\0",
        FinikeyStatus::NotFound => b"no result below the search cap\0",
        FinikeyStatus::ResourceLimit => b"request exceeded the resource budget\0",
        FinikeyStatus::Internal => b"internal error\0",
    };
    text.as_ptr() as *const c_char
}
