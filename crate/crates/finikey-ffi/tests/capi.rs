//! Exercise the C ABI from Rust: status codes, null handling, parity with
//! the core library, and the generated header.

use finikey_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn new_calc() -> *mut FinikeyCalculator {
    let mut calc: *mut FinikeyCalculator = ptr::null_mut();
    let status = finikey_calculator_new(
        FINIKEY_PROTOCOL_BB84,
        2,
        1,
        1e-3,
        1e-3,
        1e-3,
        1e-3,
        1.2,
        &mut calc,
    );
    assert_eq!(status, FinikeyStatus::Ok);
    assert!(!calc.is_null());
    calc
}

#[test]
fn key_rate_matches_core_library() {
    let calc = new_calc();
    let mut out = FinikeyKeyRate {
        ell: 0,
        rate: 0.0,
        q_pess: 0.0,
        delta_v: 0.0,
        delta_n: 0.0,
        leak_per_bit: 0.0,
        h_ae_pess: 0.0,
        q_pess_clamped: false,
        d_warning: false,
    };
    let status = finikey_key_rate(calc, 1_000_000, 500_000, 0.01, -1.0, &mut out);
    assert_eq!(status, FinikeyStatus::Ok);
    assert_eq!(out.ell, 376_648);
    assert_eq!(out.rate, 0.376648);

    let spec = finikey::entropy::ProtocolSpec::new(finikey::entropy::Protocol::Bb84);
    let budget = finikey::finite_key::EpsilonBudget::new(1e-3, 1e-3, 1e-3, 1e-3, 1).unwrap();
    let config =
        finikey::finite_key::RunConfig::new(1_000_000, 500_000, 1.2, spec, budget).unwrap();
    let obs = finikey::finite_key::ChannelObservation::new(0.01, 500_000, 2).unwrap();
    let core = finikey::finite_key::key_length(&config, &obs, None).unwrap();
    assert_eq!(out.q_pess.to_bits(), core.q_pess.to_bits());
    assert_eq!(out.delta_n.to_bits(), core.delta_n.to_bits());
    finikey_calculator_free(calc);
}

#[test]
fn measured_leak_passthrough() {
    let calc = new_calc();
    let mut out = unsafe { std::mem::zeroed::<FinikeyKeyRate>() };
    assert_eq!(
        finikey_key_rate(calc, 1_000_000, 500_000, 0.01, 60_000.0, &mut out),
        FinikeyStatus::Ok
    );
    assert_eq!(out.leak_per_bit, 0.12);
    finikey_calculator_free(calc);
}

#[test]
fn optimize_and_critical_n_roundtrip() {
    let calc = new_calc();
    let mut opt = unsafe { std::mem::zeroed::<FinikeyOptimum>() };
    assert_eq!(
        finikey_optimize(calc, 1_000_000, 0.01, &mut opt),
        FinikeyStatus::Ok
    );
    assert_eq!(opt.best_n, 947_313);
    assert_eq!(opt.key_rate.ell, 666_691);
    let total = opt.eps_pa + opt.eps_bar + opt.eps_pe + opt.eps_ec;
    assert!((total - 4e-3).abs() <= 1e-15 * 4e-3);

    let mut n_star = 0u64;
    assert_eq!(
        finikey_critical_n(calc, 0.01, &mut n_star),
        FinikeyStatus::Ok
    );
    assert_eq!(n_star, 3_954);
    finikey_calculator_free(calc);
}

#[test]
fn invalid_arguments_are_reported_not_computed() {
    let mut calc: *mut FinikeyCalculator = ptr::null_mut();
    // protocol out of range
    let status = finikey_calculator_new(7, 2, 1, 1e-3, 1e-3, 1e-3, 1e-3, 1.2, &mut calc);
    assert_eq!(status, FinikeyStatus::InvalidArgument);
    // epsilon out of range
    let status = finikey_calculator_new(0, 2, 1, 0.0, 1e-3, 1e-3, 1e-3, 1.2, &mut calc);
    assert_eq!(status, FinikeyStatus::InvalidArgument);
    // inefficiency below one
    let status = finikey_calculator_new(0, 2, 1, 1e-3, 1e-3, 1e-3, 1e-3, 0.9, &mut calc);
    assert_eq!(status, FinikeyStatus::InvalidArgument);

    let calc = new_calc();
    let mut out = unsafe { std::mem::zeroed::<FinikeyKeyRate>() };
    // q_obs beyond the protocol bound
    assert_eq!(
        finikey_key_rate(calc, 1_000, 500, 0.7, -1.0, &mut out),
        FinikeyStatus::InvalidArgument
    );
    // degenerate split
    assert_eq!(
        finikey_key_rate(calc, 1_000, 1_000, 0.01, -1.0, &mut out),
        FinikeyStatus::InvalidArgument
    );
    finikey_calculator_free(calc);
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0f64;
    assert_eq!(
        finikey_binary_entropy(0.5, ptr::null_mut()),
        FinikeyStatus::NullArgument
    );
    assert_eq!(
        finikey_key_rate(ptr::null(), 1_000, 500, 0.01, -1.0, ptr::null_mut()),
        FinikeyStatus::NullArgument
    );
    assert_eq!(
        finikey_critical_n(ptr::null(), 0.01, &mut 0u64),
        FinikeyStatus::NullArgument
    );
    assert_eq!(
        finikey_calculator_new(0, 2, 1, 1e-3, 1e-3, 1e-3, 1e-3, 1.2, ptr::null_mut()),
        FinikeyStatus::NullArgument
    );
    // free of null is a no-op
    finikey_calculator_free(ptr::null_mut());
    assert_eq!(finikey_binary_entropy(0.5, &mut out), FinikeyStatus::Ok);
    assert_eq!(out, 1.0);
}

#[test]
fn entropy_and_rapid_helpers() {
    let mut out = 0f64;
    assert_eq!(
        finikey_asymptotic_rate(FINIKEY_PROTOCOL_BB84, 0.05, &mut out),
        FinikeyStatus::Ok
    );
    assert!((out - 0.42720608576808774).abs() < 1e-13);
    assert_eq!(
        finikey_entropy_bound(FINIKEY_PROTOCOL_SIX_STATE, 0.126, &mut out),
        FinikeyStatus::Ok
    );
    assert!((out - 0.54743246135718017).abs() < 1e-13);
    assert_eq!(finikey_rapid_delta_v(1, &mut out), FinikeyStatus::Ok);
    assert_eq!(out, 3.0);

    let mut n_star = 0u64;
    assert_eq!(finikey_rapid_case_1(0.1, &mut n_star), FinikeyStatus::Ok);
    assert_eq!(n_star, 59_598);
    assert_eq!(finikey_rapid_case_2(0.005, &mut n_star), FinikeyStatus::Ok);
    assert_eq!(n_star, 1_497_548);
    assert_eq!(
        finikey_rapid_case_2(0.0, &mut n_star),
        FinikeyStatus::InvalidArgument
    );
}

#[test]
fn not_found_status_for_diverging_critical_n() {
    let calc = new_calc();
    let mut n_star = 0u64;
    assert_eq!(
        finikey_critical_n(calc, 0.1098, &mut n_star),
        FinikeyStatus::NotFound
    );
    // beyond the asymptotic threshold the inputs themselves are invalid
    assert_eq!(
        finikey_critical_n(calc, 0.12, &mut n_star),
        FinikeyStatus::InvalidArgument
    );
    finikey_calculator_free(calc);
}

#[test]
fn monte_carlo_through_the_boundary() {
    let mut report = unsafe { std::mem::zeroed::<FinikeyTrialReport>() };
    let status = finikey_validate_delta_v(0.05, 1_000, 10_000, 1e-3, 2, 42, &mut report);
    assert_eq!(status, FinikeyStatus::Ok);
    assert_eq!(report.trials, 10_000);
    assert_eq!(report.violation_count, 0);
    assert!((report.delta_v_used - 0.10179701576572021).abs() < 1e-15);

    let again = {
        let mut r = unsafe { std::mem::zeroed::<FinikeyTrialReport>() };
        finikey_validate_delta_v(0.05, 1_000, 10_000, 1e-3, 2, 42, &mut r);
        r
    };
    assert_eq!(report, again);

    // resource guard propagates as a status, not a panic
    let status = finikey_validate_delta_v(0.05, u64::MAX / 2, 100, 1e-3, 2, 0, &mut report);
    assert_eq!(status, FinikeyStatus::ResourceLimit);

    let calc = new_calc();
    let mut out = unsafe { std::mem::zeroed::<FinikeyKeyRate>() };
    assert_eq!(
        finikey_simulate_run(calc, 100_000, 0.01, 7, &mut out),
        FinikeyStatus::Ok
    );
    assert!(out.ell > 0);
    finikey_calculator_free(calc);
}

#[test]
fn status_messages_are_static_c_strings() {
    for status in [
        FinikeyStatus::Ok,
        FinikeyStatus::NullArgument,
        FinikeyStatus::InvalidArgument,
        FinikeyStatus::NotFound,
        FinikeyStatus::ResourceLimit,
        FinikeyStatus::Internal,
    ] {
        let ptr = finikey_status_message(status);
        assert!(!ptr.is_null());
        let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap();
        assert!(!text.is_empty());
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/finikey.h"))
        .expect("header generated at build time");
    for symbol in [
        "typedef struct FinikeyCalculator FinikeyCalculator;",
        "finikey_calculator_new",
        "finikey_calculator_free",
        "finikey_key_rate",
        "finikey_optimize",
        "finikey_critical_n",
        "finikey_validate_delta_v",
        "finikey_simulate_run",
        "finikey_status_message",
        "FinikeyStatus",
    ] {
        assert!(header.contains(symbol), "header missing {symbol:?}");
    }
}
