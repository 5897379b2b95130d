//! Channel parameters of the standard-form Gaussian cognitive Z-interference
//! channel and the interference thresholds that split it into regimes.
//!
//! The channel is
//!
//! ```text
//! Y1 = X1 + a X2 + Z1,    Y2 = X2 + Z2,    Z1, Z2 ~ N(0, 1)
//! ```
//!
//! with average powers `E[X1^2] <= P1` and `E[X2^2] <= P2`. Transmitter 2 is the
//! cognitive user: it knows the primary message and codeword non-causally.
//! Only the primary receiver sees interference, and every formula depends on
//! the interference gain through `|a|`.

use serde::{Deserialize, Serialize};

use crate::error::{CzicError, Result};

/// Standard-form channel: unit direct gains, unit noise variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    a: f64,
    p1: f64,
    p2: f64,
}

impl ChannelParams {
    pub fn new(a: f64, p1: f64, p2: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(CzicError::domain(format!("interference gain must be finite, got {a}")));
        }
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !p.is_finite() || p < 0.0 {
                return Err(CzicError::domain(format!(
                    "{name} must be a finite non-negative power, got {p}"
                )));
            }
        }
        Ok(Self { a, p1, p2 })
    }

    /// The P1 = P2 = 6, |a| = 4 operating point used for the bound comparison figure.
    pub fn figure4() -> Self {
        Self {
            a: 4.0,
            p1: 6.0,
            p2: 6.0,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn abs_a(&self) -> f64 {
        self.a.abs()
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    /// Same channel with the interference sign flipped.
    pub fn negated(&self) -> Self {
        Self { a: -self.a, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    /// `|a| < 1`: capacity known (superposition coding plus dirty paper coding).
    Weak,
    /// `1 <= |a| <= sqrt(1 + P1/(1+P2))`: capacity known.
    StrongCapacity,
    /// `sqrt(1 + P1/(1+P2)) < |a| < sqrt(1 + P1)`: capacity unknown.
    UnknownGap,
    /// `sqrt(1 + P1) <= |a| < sqrt(P1 P2) + sqrt(1 + P1 + P1 P2)`: superposition coding is optimal.
    VeryStrong,
    /// `|a| >= sqrt(P1 P2) + sqrt(1 + P1 + P1 P2)`: the sum-rate constraint is redundant.
    UltraStrong,
}

impl RegimeTag {
    pub fn capacity_known(self) -> bool {
        !matches!(self, RegimeTag::UnknownGap)
    }
}

/// The four regime boundaries on `|a|`, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl Thresholds {
    pub fn for_powers(p1: f64, p2: f64) -> Self {
        Self {
            t1: 1.0,
            t2: (1.0 + p1 / (1.0 + p2)).sqrt(),
            t3: (1.0 + p1).sqrt(),
            t4: (p1 * p2).sqrt() + (1.0 + p1 + p1 * p2).sqrt(),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t1, self.t2, self.t3, self.t4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub thresholds: Thresholds,
}

/// Places `|a|` among the thresholds.
///
/// Capacity rows are closed intervals. When two rows share an endpoint, or
/// thresholds coincide (as they all do at `P1 = 0`), the row with the larger
/// `|a|` wins.
pub fn classify_regime(params: &ChannelParams) -> Regime {
    let th = Thresholds::for_powers(params.p1, params.p2);
    let x = params.abs_a();
    let tag = if x >= th.t4 {
        RegimeTag::UltraStrong
    } else if x >= th.t3 {
        RegimeTag::VeryStrong
    } else if x > th.t2 {
        RegimeTag::UnknownGap
    } else if x >= th.t1 {
        RegimeTag::StrongCapacity
    } else {
        RegimeTag::Weak
    };
    Regime { tag, thresholds: th }
}

/// `a^2 >= 1`, the Gaussian form of the strong cognitive interference
/// condition. The outer bounds built on the more-capable converse apply here.
pub fn is_strong_interference(params: &ChannelParams) -> bool {
    params.a * params.a >= 1.0
}

/// `|a| >= 1 + sqrt(P1/P2)`.
///
/// Obtained by comparing output entropies under jointly Gaussian inputs with
/// the worst-case input correlation of -1. It is a sufficient test under that
/// restriction only; whether it implies the more-capable condition for every
/// input distribution is not established.
pub fn more_capable_sufficient(params: &ChannelParams) -> Result<bool> {
    if params.p2 == 0.0 {
        return Err(CzicError::domain("more-capable test divides by P2, which is zero"));
    }
    Ok(params.abs_a() >= 1.0 + (params.p1 / params.p2).sqrt())
}

/// `sqrt(alpha P1 P2) + sqrt(1 + P1 + alpha P1 P2)`.
///
/// For a given power split `alpha`, the sum-rate constraint of the
/// superposition region is redundant exactly when `|a|` reaches this value.
/// At `alpha = 0` it is `sqrt(1 + P1)`; at `alpha = 1` it is the ultra-strong
/// threshold.
pub fn redundancy_threshold(alpha: f64, p1: f64, p2: f64) -> Result<f64> {
    check_unit("alpha", alpha)?;
    if !(p1 >= 0.0 && p2 >= 0.0) || !p1.is_finite() || !p2.is_finite() {
        return Err(CzicError::domain(format!(
            "powers must be finite and non-negative, got ({p1}, {p2})"
        )));
    }
    let cross = alpha * p1 * p2;
    Ok(cross.sqrt() + (1.0 + p1 + cross).sqrt())
}

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CzicError::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ch(a: f64, p1: f64, p2: f64) -> ChannelParams {
        ChannelParams::new(a, p1, p2).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ChannelParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, 1.0, f64::INFINITY).is_err());
        assert!(ChannelParams::new(-3.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(&ch(0.5, 6.0, 6.0)).tag, RegimeTag::Weak);
        assert_eq!(classify_regime(&ch(4.0, 6.0, 6.0)).tag, RegimeTag::VeryStrong);
        assert_eq!(classify_regime(&ch(2.0, 6.0, 6.0)).tag, RegimeTag::UnknownGap);
        assert_eq!(classify_regime(&ch(13.0, 6.0, 6.0)).tag, RegimeTag::UltraStrong);
        assert_eq!(classify_regime(&ch(12.0, 6.0, 6.0)).tag, RegimeTag::VeryStrong);
    }

    #[test]
    fn thresholds_match_high_precision_values() {
        // mpmath, 30 digits
        let th = Thresholds::for_powers(6.0, 6.0);
        assert_eq!(th.t1, 1.0);
        assert!((th.t2 - 1.362_770_287_738_493_8).abs() < 1e-14);
        assert!((th.t3 - 2.645_751_311_064_590_6).abs() < 1e-14);
        assert!((th.t4 - 12.557_438_524_302_000_7).abs() < 1e-12);
    }

    #[test]
    fn boundaries_go_to_the_known_capacity_row() {
        let th = Thresholds::for_powers(6.0, 6.0);
        assert_eq!(classify_regime(&ch(1.0, 6.0, 6.0)).tag, RegimeTag::StrongCapacity);
        assert_eq!(classify_regime(&ch(th.t2, 6.0, 6.0)).tag, RegimeTag::StrongCapacity);
        assert_eq!(classify_regime(&ch(th.t3, 6.0, 6.0)).tag, RegimeTag::VeryStrong);
        assert_eq!(classify_regime(&ch(th.t4, 6.0, 6.0)).tag, RegimeTag::UltraStrong);
        // all thresholds collapse to 1 without primary power
        assert_eq!(classify_regime(&ch(1.0, 0.0, 3.0)).tag, RegimeTag::UltraStrong);
        assert_eq!(classify_regime(&ch(0.999, 0.0, 3.0)).tag, RegimeTag::Weak);
    }

    #[test]
    fn strong_interference_gate() {
        assert!(is_strong_interference(&ch(1.0, 0.0, 0.0)));
        assert!(is_strong_interference(&ch(1.0, 6.0, 6.0)));
        assert!(is_strong_interference(&ch(-1.5, 6.0, 6.0)));
        assert!(!is_strong_interference(&ch(0.99, 6.0, 6.0)));
    }

    #[test]
    fn more_capable_examples() {
        assert!(more_capable_sufficient(&ch(2.0, 6.0, 6.0)).unwrap());
        assert!(!more_capable_sufficient(&ch(1.9, 6.0, 6.0)).unwrap());
        assert!(more_capable_sufficient(&ch(1.0, 0.0, 6.0)).unwrap());
        assert!(matches!(
            more_capable_sufficient(&ch(3.0, 6.0, 0.0)),
            Err(CzicError::Domain(_))
        ));
    }

    #[test]
    fn redundancy_threshold_examples() {
        assert!((redundancy_threshold(0.0, 6.0, 6.0).unwrap() - 7f64.sqrt()).abs() < 1e-14);
        assert!((redundancy_threshold(0.0, 6.0, 6.0).unwrap() - 2.645_751_311_064_590_6).abs() < 1e-14);
        assert!((redundancy_threshold(1.0, 6.0, 6.0).unwrap() - (6.0 + 43f64.sqrt())).abs() < 1e-12);
        assert!((redundancy_threshold(1.0, 6.0, 6.0).unwrap() - 12.557_438_524_302).abs() < 1e-9);
        assert_eq!(redundancy_threshold(0.0, 0.0, 123.0).unwrap(), 1.0);
        assert!(redundancy_threshold(1.5, 6.0, 6.0).is_err());
        assert!(redundancy_threshold(0.5, -6.0, 6.0).is_err());
    }

    proptest! {
        #[test]
        fn thresholds_are_ordered(p1 in 0.0f64..1e3, p2 in 0.0f64..1e3) {
            let t = Thresholds::for_powers(p1, p2);
            prop_assert!(t.t1 <= t.t2 && t.t2 <= t.t3 && t.t3 <= t.t4);
        }

        #[test]
        fn thresholds_collapse_only_without_primary_power(p1 in 1e-6f64..1e3, p2 in 0.0f64..1e3) {
            let t = Thresholds::for_powers(p1, p2);
            prop_assert!(t.t2 > t.t1 && t.t3 > t.t2);
            let z = Thresholds::for_powers(0.0, p2);
            prop_assert_eq!(z.as_array(), [1.0; 4]);
        }

        #[test]
        fn redundancy_threshold_is_monotone(a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0, p1 in 0.0f64..100.0, p2 in 0.0f64..100.0) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(redundancy_threshold(lo, p1, p2).unwrap() <= redundancy_threshold(hi, p1, p2).unwrap());
        }

        #[test]
        fn regime_ignores_sign(a in -20.0f64..20.0, p1 in 0.0f64..50.0, p2 in 0.0f64..50.0) {
            let c = ch(a, p1, p2);
            prop_assert_eq!(classify_regime(&c), classify_regime(&c.negated()));
        }

        #[test]
        fn more_capable_implies_strong(a in -20.0f64..20.0, p1 in 0.0f64..50.0, p2 in 1e-3f64..50.0) {
            let c = ch(a, p1, p2);
            if more_capable_sufficient(&c).unwrap() {
                prop_assert!(is_strong_interference(&c));
            }
        }
    }
}
