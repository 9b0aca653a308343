//! Property tests for the settlement and bidding invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use pcp_core::bidding::{effective_bids, BidSet};
use pcp_core::settlement::{settle, total_payment, HourOutcome, DEVIATION_TOL};

fn consumers() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // (effective, realtime) pairs, bounded away from zero loads.
    vec((1.0f64..200.0, 0.5f64..250.0), 1..12)
}

proptest! {
    #[test]
    fn settlement_balances_to_market_payment(
        pairs in consumers(),
        p_d in 1.0f64..100.0,
        p_r in 1.0f64..100.0,
    ) {
        let (effective, realtime): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let outcome = HourOutcome::new(effective, realtime, p_d, p_r).unwrap();
        let s = settle(&outcome, DEVIATION_TOL).unwrap();
        let market = total_payment(
            outcome.effective().iter().sum(),
            outcome.realtime().iter().sum(),
            p_d,
            p_r,
        );
        let sum: f64 = s.individual.iter().sum();
        prop_assert!((sum - market).abs() <= 1e-9 * market.abs().max(1.0));
        prop_assert!((s.total_payment - market).abs() <= 1e-9 * market.abs().max(1.0));
    }

    #[test]
    fn settlement_scales_with_prices(
        pairs in consumers(),
        p_d in 1.0f64..100.0,
        p_r in 1.0f64..100.0,
        scale in 0.1f64..10.0,
    ) {
        let (effective, realtime): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let base = HourOutcome::new(effective.clone(), realtime.clone(), p_d, p_r).unwrap();
        let scaled = HourOutcome::new(effective, realtime, scale * p_d, scale * p_r).unwrap();
        let a = settle(&base, DEVIATION_TOL).unwrap();
        let b = settle(&scaled, DEVIATION_TOL).unwrap();
        for (x, y) in a.individual.iter().zip(&b.individual) {
            prop_assert!((scale * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn contributors_and_reducers_partition_the_deviators(
        pairs in consumers(),
        p_d in 1.0f64..100.0,
        p_r in 1.0f64..100.0,
    ) {
        let (effective, realtime): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let outcome = HourOutcome::new(effective, realtime, p_d, p_r).unwrap();
        let s = settle(&outcome, DEVIATION_TOL).unwrap();
        for (i, label) in s.case_labels.iter().enumerate() {
            let delta = s.individual_deviation[i];
            if delta.abs() <= DEVIATION_TOL || s.aggregate_deviation.abs() <= DEVIATION_TOL {
                prop_assert!(!label.is_contributor() && !label.is_reducer());
            } else {
                let same_sign = delta.signum() == s.aggregate_deviation.signum();
                prop_assert_eq!(label.is_contributor(), same_sign);
                prop_assert_eq!(label.is_reducer(), !same_sign);
                prop_assert_eq!(s.contributor_set.contains(&i), same_sign);
            }
        }
    }

    #[test]
    fn effective_bids_stay_within_forecast_bracket(
        loads in vec(0.0f64..500.0, 1..12),
        rhos in vec(0.0f64..=1.0, 12),
        factor in 0.25f64..4.0,
    ) {
        let n = loads.len();
        let announced_total: f64 = loads.iter().sum();
        let forecast = announced_total * factor;
        let bids = BidSet::new(loads, rhos[..n].to_vec(), forecast).unwrap();
        let eff = effective_bids(&bids);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&eff.alpha));
        let (lo, hi) = (
            announced_total.min(forecast),
            announced_total.max(forecast),
        );
        prop_assert!(eff.aggregate >= lo - 1e-9 * hi.max(1.0));
        prop_assert!(eff.aggregate <= hi + 1e-9 * hi.max(1.0));
        // The aggregate is the exact sum of the individual blends; note the
        // individual bids themselves are not sign-constrained by the formula.
        let sum: f64 = eff.individual.iter().sum();
        prop_assert!((sum - eff.aggregate).abs() <= 1e-9 * eff.aggregate.abs().max(1.0));
    }
}
