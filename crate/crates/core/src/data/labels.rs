//! Gold label derivation: annotator majority vote and rating threshold.

use super::types::{BreakdownLabel, SatLabel, VoteCounts};
use crate::error::{Error, Result};

/// Ratings at or below this value are DSAT.
pub const SAT_THRESHOLD: f64 = 3.5;

/// Label with the strictly greatest vote count. Ties resolve toward the more
/// severe label (B over PB over NB).
pub fn majority_vote(votes: &VoteCounts) -> Result<BreakdownLabel> {
    if votes.total() == 0 {
        return Err(Error::InvalidArgument("majority vote over zero votes".into()));
    }
    let mut best = BreakdownLabel::NB;
    for label in BreakdownLabel::ALL {
        // ALL is in ascending severity, so `>=` lets the later label win ties
        if votes.get(label) >= votes.get(best) {
            best = label;
        }
    }
    Ok(best)
}

/// DSAT iff `rating <= 3.5`.
pub fn rating_to_sat(rating: f64) -> Result<SatLabel> {
    if !(1.0..=5.0).contains(&rating) {
        return Err(Error::OutOfRange(format!("rating {rating} outside [1.0, 5.0]")));
    }
    Ok(if rating <= SAT_THRESHOLD {
        SatLabel::Dsat
    } else {
        SatLabel::Sat
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_majorities() {
        assert_eq!(majority_vote(&VoteCounts::new(15, 10, 5)).unwrap(), BreakdownLabel::NB);
        assert_eq!(majority_vote(&VoteCounts::new(14, 16, 0)).unwrap(), BreakdownLabel::PB);
    }

    #[test]
    fn ties_go_to_severity() {
        assert_eq!(majority_vote(&VoteCounts::new(10, 10, 10)).unwrap(), BreakdownLabel::B);
        assert_eq!(majority_vote(&VoteCounts::new(12, 12, 6)).unwrap(), BreakdownLabel::PB);
        assert_eq!(majority_vote(&VoteCounts::new(12, 6, 12)).unwrap(), BreakdownLabel::B);
    }

    #[test]
    fn zero_votes_is_an_error() {
        assert!(majority_vote(&VoteCounts::default()).is_err());
    }

    #[test]
    fn rating_threshold() {
        assert_eq!(rating_to_sat(3.5).unwrap(), SatLabel::Dsat);
        assert_eq!(rating_to_sat(3.6).unwrap(), SatLabel::Sat);
        assert_eq!(rating_to_sat(1.0).unwrap(), SatLabel::Dsat);
        assert_eq!(rating_to_sat(5.0).unwrap(), SatLabel::Sat);
        assert!(rating_to_sat(0.5).is_err());
        assert!(rating_to_sat(5.1).is_err());
        assert!(rating_to_sat(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn rating_is_monotone(a in 1.0f64..=5.0, b in 1.0f64..=5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(rating_to_sat(lo).unwrap() <= rating_to_sat(hi).unwrap());
        }

        #[test]
        fn majority_is_total_and_maximal(nb in 0u32..40, pb in 0u32..40, b in 0u32..40) {
            prop_assume!(nb + pb + b > 0);
            let votes = VoteCounts::new(nb, pb, b);
            let label = majority_vote(&votes).unwrap();
            let max = nb.max(pb).max(b);
            prop_assert_eq!(votes.get(label), max);
            // no more severe label shares the maximum
            for other in BreakdownLabel::ALL.iter().filter(|l| **l > label) {
                prop_assert!(votes.get(*other) < max);
            }
        }
    }
}
