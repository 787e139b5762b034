//! Activity rates and the apparent-rate arithmetic for passive participation.
//!
//! A rate is either an exponential parameter (`Active`) or a passive offer
//! `w*T` whose integer weight only fixes branching probabilities; the actual
//! speed of a passive activity is decided by its active cooperation partners.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rate annotation on a single activity, as written in a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateExpr {
    /// Exponential rate parameter, strictly positive.
    Active(f64),
    /// Passive offer with weight `w >= 1` (`T` is `1*T`).
    Passive(u64),
}

impl RateExpr {
    pub fn apparent(self) -> ApparentRate {
        match self {
            RateExpr::Active(r) => ApparentRate::Active(r),
            RateExpr::Passive(w) => ApparentRate::Passive(w),
        }
    }

    pub fn is_passive(self) -> bool {
        matches!(self, RateExpr::Passive(_))
    }
}

/// Total rate a component (or group, or cooperation side) offers for one
/// action type.
///
/// `Active(0.0)` is the canonical "not enabled"; `Passive(0)` arises from
/// scaling a passive weight by a zero population and also offers nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ApparentRate {
    Active(f64),
    Passive(u64),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("cannot combine a non-zero active rate with a non-zero passive weight")]
pub struct MixedRateError;

impl ApparentRate {
    pub const ZERO: ApparentRate = ApparentRate::Active(0.0);

    pub fn is_zero(self) -> bool {
        match self {
            ApparentRate::Active(r) => r == 0.0,
            ApparentRate::Passive(w) => w == 0,
        }
    }

    pub fn is_passive(self) -> bool {
        matches!(self, ApparentRate::Passive(_))
    }

    /// Sum of two offers. Like kinds add (`w1*T + w2*T = (w1+w2)*T`); a zero
    /// offer of either kind is the identity. Summing a non-zero active rate
    /// with a non-zero passive weight has no meaning in the rate algebra and
    /// is rejected.
    pub fn checked_add(self, other: ApparentRate) -> Result<ApparentRate, MixedRateError> {
        use ApparentRate::*;
        match (self, other) {
            (Active(a), Active(b)) => Ok(Active(a + b)),
            (Passive(a), Passive(b)) => Ok(Passive(a + b)),
            (a, b) if a.is_zero() => Ok(b),
            (a, b) if b.is_zero() => Ok(a),
            _ => Err(MixedRateError),
        }
    }

    /// Scale by an instance count: `k * (w*T) = (k*w)*T`, `k * r = k*r`.
    pub fn scale(self, count: u64) -> ApparentRate {
        match self {
            ApparentRate::Active(r) => ApparentRate::Active(count as f64 * r),
            ApparentRate::Passive(w) => ApparentRate::Passive(count * w),
        }
    }

    /// Cooperation minimum. Passive offers do not bound the rate:
    /// `min(r, w*T) = r` for `w >= 1`, while `min(r, 0*T) = 0` because a
    /// zero-weight side has nobody to participate.
    pub fn min(self, other: ApparentRate) -> ApparentRate {
        use ApparentRate::*;
        match (self, other) {
            (Active(a), Active(b)) => Active(a.min(b)),
            (Passive(a), Passive(b)) => Passive(a.min(b)),
            (Active(_), Passive(0)) | (Passive(0), Active(_)) => Active(0.0),
            (Active(a), Passive(_)) | (Passive(_), Active(a)) => Active(a),
        }
    }

    /// Numeric value once all passivity has been resolved.
    pub fn as_active(self) -> Option<f64> {
        match self {
            ApparentRate::Active(r) => Some(r),
            ApparentRate::Passive(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ApparentRate::{Active, Passive};

    #[test]
    fn passive_weights_add() {
        assert_eq!(Passive(2).checked_add(Passive(3)), Ok(Passive(5)));
    }

    #[test]
    fn bare_top_is_weight_one() {
        assert_eq!(RateExpr::Passive(1).apparent(), Passive(1));
    }

    #[test]
    fn scaling_preserves_kind() {
        assert_eq!(Passive(2).scale(3), Passive(6));
        assert_eq!(Active(1.5).scale(4), Active(6.0));
        assert_eq!(Passive(7).scale(0), Passive(0));
    }

    #[test]
    fn min_of_passives_takes_min_weight() {
        assert_eq!(Passive(4).min(Passive(9)), Passive(4));
    }

    #[test]
    fn active_wins_over_passive_unless_weight_zero() {
        assert_eq!(Active(3.0).min(Passive(5)), Active(3.0));
        assert_eq!(Passive(5).min(Active(3.0)), Active(3.0));
        assert_eq!(Active(3.0).min(Passive(0)), Active(0.0));
    }

    #[test]
    fn zero_is_additive_identity_across_kinds() {
        assert_eq!(Active(0.0).checked_add(Passive(4)), Ok(Passive(4)));
        assert_eq!(Passive(0).checked_add(Active(2.0)), Ok(Active(2.0)));
    }

    #[test]
    fn nonzero_mixing_is_rejected() {
        assert_eq!(Active(1.0).checked_add(Passive(1)), Err(MixedRateError));
    }
}
