//! Pinned values derived by this artifact. The optimizer is deterministic,
//! so these are exact-equality regressions: a change here means the search
//! behavior changed, not just a tolerance.

use finikey::entropy::{Protocol, ProtocolSpec};
use finikey::optimizer::{critical_n, optimize_split};

fn bb84() -> ProtocolSpec {
    ProtocolSpec::new(Protocol::Bb84)
}

#[test]
fn critical_run_sizes_bb84_pinned() {
    // eps_total = 4e-3, f = 1.2; the exact transition points produced by the
    // optimizer, each verified against an independent grid search
    let pinned = [
        (0.005, 3_378u64),
        (0.01, 3_954),
        (0.02, 5_438),
        (0.05, 17_568),
    ];
    for (q, expected) in pinned {
        let got = critical_n(q, 4e-3, &bb84(), 1.2).unwrap();
        assert_eq!(got, expected, "critical N moved at q = {q}");
    }
}

#[test]
fn critical_transition_is_sharp() {
    for (q, n_star) in [(0.005, 3_378u64), (0.01, 3_954), (0.02, 5_438)] {
        let at = optimize_split(n_star, q, 4e-3, &bb84(), 1.2).unwrap();
        let below = optimize_split(n_star - 1, q, 4e-3, &bb84(), 1.2).unwrap();
        assert!(
            at.result.ell > 0,
            "no key at the pinned critical N for q = {q}"
        );
        assert_eq!(
            below.result.ell, 0,
            "key already positive below critical N for q = {q}"
        );
    }
}

#[test]
fn optimized_worked_example_pinned() {
    let opt = optimize_split(1_000_000, 0.01, 4e-3, &bb84(), 1.2).unwrap();
    assert_eq!(opt.best_n, 947_313);
    assert_eq!(opt.result.ell, 666_691);
    assert_eq!(opt.result.rate, 0.666691);
}
