//! Entropy primitives and protocol-specific bounds on Eve's uncertainty.
//!
//! Under collective attacks the per-signal conditional entropy `H(A|E)` has a
//! closed form for each supported protocol, parametrized only by the error
//! rate `Q`. Both forms decrease from 1 at `Q = 0` to 0 at `Q = 1/2`; past
//! that point Eve may know everything and the bound carries no meaning, which
//! is what [`ProtocolSpec::q_max`] encodes.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Protocols with a closed-form collective-attack entropy bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Bb84,
    SixState,
}

impl Protocol {
    /// Largest error rate for which `H(A|E)` is defined and nonnegative.
    /// Both closed forms reach 0 at `Q = 1/2`.
    pub fn default_q_max(self) -> f64 {
        0.5
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::SixState => "six-state",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "six-state" | "sixstate" | "six_state" => Ok(Protocol::SixState),
            other => Err(format!(
                "unknown protocol {other:?} (expected bb84 or six-state)"
            )),
        }
    }
}

/// Protocol identity plus the estimation metadata that travels with it: the
/// POVM outcome count `d` used to estimate the error rate, the number of
/// estimated parameters `n_pe`, and the domain bound `q_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub protocol: Protocol,
    pub d: u32,
    pub n_pe: u32,
    pub q_max: f64,
}

impl ProtocolSpec {
    /// Spec with the defaults `d = 2`, `n_pe = 1` and the protocol's `q_max`.
    pub fn new(protocol: Protocol) -> Self {
        ProtocolSpec {
            protocol,
            d: 2,
            n_pe: 1,
            q_max: protocol.default_q_max(),
        }
    }

    pub fn with_d(mut self, d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::CountTooSmall {
                name: "d",
                min: 2,
                value: d as u64,
            });
        }
        self.d = d;
        Ok(self)
    }

    pub fn with_n_pe(mut self, n_pe: u32) -> Result<Self> {
        if n_pe < 1 {
            return Err(Error::CountTooSmall {
                name: "n_pe",
                min: 1,
                value: n_pe as u64,
            });
        }
        self.n_pe = n_pe;
        Ok(self)
    }

    pub fn with_q_max(mut self, q_max: f64) -> Result<Self> {
        if !(q_max > 0.0 && q_max <= 0.5) {
            return Err(Error::QMaxOutOfRange { value: q_max });
        }
        self.q_max = q_max;
        Ok(self)
    }
}

/// Binary entropy `h(x) = -x log2 x - (1-x) log2 (1-x)`, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::ProbabilityOutOfRange {
            name: "x",
            value: x,
        });
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Collective-attack lower bound on Eve's per-signal uncertainty `H(A|E)`,
/// minimized over attacks compatible with error rate `q`.
///
/// BB84: `1 - h(q)`. Six-state: `(1-q) * [1 - h((1 - 3q/2) / (1-q))]`, which
/// tends to 1 as `q -> 0`. Values are clamped into `[0, 1]` so that rounding
/// residue near the zero crossing cannot turn the bound negative.
pub fn h_ae(spec: &ProtocolSpec, q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::ProbabilityOutOfRange {
            name: "q",
            value: q,
        });
    }
    if q > spec.q_max {
        return Err(Error::ErrorRateAboveBound {
            q,
            q_max: spec.q_max,
        });
    }
    let value = match spec.protocol {
        Protocol::Bb84 => 1.0 - binary_entropy(q)?,
        Protocol::SixState => {
            let kept = 1.0 - q;
            let arg = ((1.0 - 1.5 * q) / kept).min(1.0);
            kept * (1.0 - binary_entropy(arg)?)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Asymptotic secret-key fraction `H(A|E) - H(A|B)` at error rate `q`.
/// May be negative; callers clamp for reporting.
pub fn asymptotic_rate(spec: &ProtocolSpec, q: f64) -> Result<f64> {
    Ok(h_ae(spec, q)? - binary_entropy(q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb84() -> ProtocolSpec {
        ProtocolSpec::new(Protocol::Bb84)
    }

    fn six_state() -> ProtocolSpec {
        ProtocolSpec::new(Protocol::SixState)
    }

    #[test]
    fn binary_entropy_reference_points() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // independently evaluated at high precision
        assert!((binary_entropy(0.11).unwrap() - 0.499915958164528).abs() < 1e-13);
        assert!((binary_entropy(0.01).unwrap() - 0.080793135895911173).abs() < 1e-13);
    }

    #[test]
    fn binary_entropy_rejects_out_of_range() {
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn h_ae_reference_points() {
        assert_eq!(h_ae(&bb84(), 0.0).unwrap(), 1.0);
        assert!((h_ae(&bb84(), 0.11).unwrap() - 0.500084041835472).abs() < 1e-13);
        let six = h_ae(&six_state(), 0.126).unwrap();
        assert!((six - 0.54743246135718017).abs() < 1e-13);
        // near the six-state threshold the bound crosses h(q); they agree to 1%
        let h = binary_entropy(0.126).unwrap();
        assert!((six - h).abs() / h < 0.01);
    }

    #[test]
    fn h_ae_six_state_limits() {
        assert_eq!(h_ae(&six_state(), 0.0).unwrap(), 1.0);
        assert!((h_ae(&six_state(), 1e-12).unwrap() - 1.0).abs() < 1e-9);
        // zero (after clamping) at the domain edge
        assert!(h_ae(&six_state(), 0.5).unwrap() <= 1e-11);
    }

    #[test]
    fn h_ae_rejects_beyond_q_max() {
        assert_eq!(
            h_ae(&bb84(), 0.51),
            Err(Error::ErrorRateAboveBound {
                q: 0.51,
                q_max: 0.5
            })
        );
        assert!(h_ae(&bb84(), -0.01).is_err());
    }

    #[test]
    fn h_ae_nonincreasing_on_domain() {
        for spec in [bb84(), six_state()] {
            let mut prev = f64::INFINITY;
            for i in 0..=5000 {
                let q = 0.5 * i as f64 / 5000.0;
                let v = h_ae(&spec, q).unwrap();
                assert!(
                    v <= prev + 1e-12,
                    "{:?}: h_ae rose at q = {q}: {v} > {prev}",
                    spec.protocol
                );
                prev = v;
            }
        }
    }

    #[test]
    fn asymptotic_rate_reference_points() {
        assert_eq!(asymptotic_rate(&bb84(), 0.0).unwrap(), 1.0);
        assert!(asymptotic_rate(&bb84(), 0.11).unwrap().abs() < 2e-4);
        assert!((asymptotic_rate(&bb84(), 0.05).unwrap() - 0.42720608576808774).abs() < 1e-13);
    }

    fn sign_change_interval(spec: &ProtocolSpec) -> (f64, f64) {
        let f = |q: f64| asymptotic_rate(spec, q).unwrap();
        let mut changes = 0;
        let steps = 20_000;
        let mut bracket = (0.0, 0.5);
        let mut prev_q = 1e-9;
        let mut prev = f(prev_q);
        for i in 1..steps {
            let q = 0.5 * i as f64 / steps as f64;
            let v = f(q);
            if prev > 0.0 && v <= 0.0 {
                changes += 1;
                bracket = (prev_q, q);
            }
            assert!(
                !(prev <= 0.0 && v > 0.0),
                "rate turned positive again at q = {q}"
            );
            prev = v;
            prev_q = q;
        }
        assert_eq!(changes, 1, "expected exactly one sign change");
        let (mut lo, mut hi) = bracket;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }

    #[test]
    fn bb84_threshold_matches_known_value() {
        let (lo, hi) = sign_change_interval(&bb84());
        assert!(lo >= 0.1099 && hi <= 0.1101, "threshold in [{lo}, {hi}]");
    }

    #[test]
    fn six_state_threshold_matches_known_value() {
        let (lo, hi) = sign_change_interval(&six_state());
        assert!(lo >= 0.125 && hi <= 0.127, "threshold in [{lo}, {hi}]");
    }

    #[test]
    fn spec_builders_validate() {
        assert!(ProtocolSpec::new(Protocol::Bb84).with_d(1).is_err());
        assert!(ProtocolSpec::new(Protocol::Bb84).with_n_pe(0).is_err());
        assert!(ProtocolSpec::new(Protocol::Bb84).with_q_max(0.0).is_err());
        assert!(ProtocolSpec::new(Protocol::Bb84).with_q_max(0.6).is_err());
        let spec = ProtocolSpec::new(Protocol::SixState).with_d(6).unwrap();
        assert_eq!(spec.d, 6);
    }

    proptest! {
        #[test]
        fn binary_entropy_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn binary_entropy_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let mid = binary_entropy(0.5 * (x + y)).unwrap();
            let avg = 0.5 * (binary_entropy(x).unwrap() + binary_entropy(y).unwrap());
            prop_assert!(mid >= avg - 1e-12);
        }

        #[test]
        fn h_ae_stays_in_unit_interval(q in 0.0f64..=0.5) {
            for spec in [ProtocolSpec::new(Protocol::Bb84), ProtocolSpec::new(Protocol::SixState)] {
                let v = h_ae(&spec, q).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
