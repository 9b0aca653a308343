//! Effective day-ahead bids.
//!
//! The cooperative blends each consumer's announced load with its own
//! aggregate forecast, weighted by the consumer's confidence factor:
//!
//! ```text
//! l_e[i] = l_a[i] + rho[i]^2 * l_a[i] * (L_f - L_a) / sum_j(rho[j] * l_a[j])
//! ```
//!
//! The blend keeps the aggregate bid between the announced sum and the
//! forecast, moves every individual bid in the same direction as the
//! aggregate, and rewards confidence with a larger share of the correction.

use crate::error::{PcpError, Result};

/// Announced loads, confidence factors, and the cooperative forecast for one
/// hour.
#[derive(Debug, Clone)]
pub struct BidSet {
    announced: Vec<f64>,
    confidence: Vec<f64>,
    forecast: f64,
}

impl BidSet {
    pub fn new(announced: Vec<f64>, confidence: Vec<f64>, forecast: f64) -> Result<Self> {
        if announced.is_empty() {
            return Err(PcpError::Validation("bid set needs at least one consumer".into()));
        }
        if announced.len() != confidence.len() {
            return Err(PcpError::Alignment(format!(
                "announced ({}) and confidence ({}) lengths differ",
                announced.len(),
                confidence.len()
            )));
        }
        if let Some(&bad) = announced.iter().find(|&&l| !(l >= 0.0)) {
            return Err(PcpError::Validation(format!(
                "announced load must be non-negative, got {bad}"
            )));
        }
        if let Some(&bad) = confidence.iter().find(|&&r| !(0.0..=1.0).contains(&r)) {
            return Err(PcpError::Validation(format!(
                "confidence must lie in [0,1], got {bad}"
            )));
        }
        if !(forecast >= 0.0) {
            return Err(PcpError::Validation(format!(
                "forecast must be non-negative, got {forecast}"
            )));
        }
        Ok(Self {
            announced,
            confidence,
            forecast,
        })
    }

    pub fn announced(&self) -> &[f64] {
        &self.announced
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn forecast(&self) -> f64 {
        self.forecast
    }

    pub fn announced_total(&self) -> f64 {
        self.announced.iter().sum()
    }
}

/// Per-consumer effective bids plus the recovered blend weight alpha.
#[derive(Debug, Clone)]
pub struct EffectiveBids {
    pub individual: Vec<f64>,
    pub aggregate: f64,
    pub alpha: f64,
}

/// Blend announced loads with the cooperative forecast.
///
/// When `sum_j rho[j]*l_a[j] == 0` (no confidence anywhere, or nothing
/// announced) the announcements pass through unchanged; that is the
/// rho -> 0 limit of the formula.
pub fn effective_bids(bids: &BidSet) -> EffectiveBids {
    let announced_total = bids.announced_total();
    let weighted: f64 = bids
        .announced
        .iter()
        .zip(&bids.confidence)
        .map(|(l, r)| r * l)
        .sum();
    let gap = bids.forecast - announced_total;
    let individual: Vec<f64> = if weighted > 0.0 {
        bids.announced
            .iter()
            .zip(&bids.confidence)
            .map(|(&l, &r)| l + r * r * l * gap / weighted)
            .collect()
    } else {
        bids.announced.clone()
    };
    let aggregate: f64 = individual.iter().sum();
    let alpha = if gap.abs() > 0.0 && weighted > 0.0 {
        (aggregate - announced_total) / gap
    } else {
        0.0
    };
    EffectiveBids {
        individual,
        aggregate,
        alpha,
    }
}

/// Numeric check of the three bid axioms on a concrete instance.
#[derive(Debug, Clone, Copy)]
pub struct BidAxiomReport {
    /// Boundedness: alpha in [0,1].
    pub boundedness: bool,
    /// Deviation direction: sign(l_e[i]-l_a[i]) == sign(L_e-L_a) for every
    /// consumer with positive confidence and announcement.
    pub sign_agreement: bool,
    /// Monotonicity: the correction l_e[i]-l_a[i] grows in the direction of
    /// the forecast gap as rho[i] increases (finite difference > 0).
    pub monotonicity: bool,
    /// Set when the forecast matches the announced sum (or no weight exists),
    /// making the sign and monotonicity checks vacuous.
    pub vacuous: bool,
}

impl BidAxiomReport {
    pub fn all_pass(&self) -> bool {
        self.boundedness && self.sign_agreement && self.monotonicity
    }
}

/// Verify the axioms for `eff == effective_bids(bids)`.
///
/// The monotonicity axiom is a derivative condition; it is checked with a
/// central finite difference of step `eps` in the consumer's confidence,
/// clamped to [0,1].
pub fn check_bid_axioms(bids: &BidSet, eff: &EffectiveBids, eps: f64) -> BidAxiomReport {
    let announced_total = bids.announced_total();
    let weighted: f64 = bids
        .announced
        .iter()
        .zip(&bids.confidence)
        .map(|(l, r)| r * l)
        .sum();
    let gap = bids.forecast - announced_total;
    let vacuous = gap == 0.0 || weighted == 0.0;

    let boundedness = (-1e-12..=1.0 + 1e-12).contains(&eff.alpha);

    let agg_dev = eff.aggregate - announced_total;
    let mut sign_agreement = true;
    let mut monotonicity = true;
    if !vacuous {
        for i in 0..bids.announced.len() {
            let la = bids.announced[i];
            let rho = bids.confidence[i];
            let dev = eff.individual[i] - la;
            if rho > 0.0 && la > 0.0 && dev * agg_dev <= 0.0 {
                sign_agreement = false;
            }
            if la > 0.0 {
                let lo = (rho - eps).max(0.0);
                let hi = (rho + eps).min(1.0);
                if hi > lo {
                    let dev_at = |r: f64| {
                        let mut conf = bids.confidence.clone();
                        conf[i] = r;
                        let b = BidSet::new(bids.announced.clone(), conf, bids.forecast)
                            .expect("perturbed bids stay valid");
                        let e = effective_bids(&b);
                        e.individual[i] - la
                    };
                    if gap.signum() * (dev_at(hi) - dev_at(lo)) / (hi - lo) <= 0.0 {
                        monotonicity = false;
                    }
                }
            }
        }
    }
    BidAxiomReport {
        boundedness,
        sign_agreement,
        monotonicity,
        vacuous,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Hand evaluation: denominator = 1*10 + 0.5*20 = 20, gap = 3.
    // l_e1 = 10 + 1*10*3/20 = 11.5; l_e2 = 20 + 0.25*20*3/20 = 20.75.
    #[test]
    fn worked_example() {
        let bids = BidSet::new(vec![10.0, 20.0], vec![1.0, 0.5], 33.0).unwrap();
        let eff = effective_bids(&bids);
        assert!((eff.individual[0] - 11.5).abs() < 1e-12);
        assert!((eff.individual[1] - 20.75).abs() < 1e-12);
        assert!((eff.aggregate - 32.25).abs() < 1e-12);
        assert!((eff.alpha - 0.75).abs() < 1e-12);
        let report = check_bid_axioms(&bids, &eff, 1e-5);
        assert!(report.all_pass());
        assert!(!report.vacuous);
    }

    #[test]
    fn forecast_equals_announced_passes_through() {
        let bids = BidSet::new(vec![10.0, 20.0], vec![0.8, 0.3], 30.0).unwrap();
        let eff = effective_bids(&bids);
        assert_eq!(eff.individual, vec![10.0, 20.0]);
        assert_eq!(eff.alpha, 0.0);
        let report = check_bid_axioms(&bids, &eff, 1e-5);
        assert!(report.vacuous);
        assert!(report.all_pass());
    }

    #[test]
    fn zero_confidence_falls_back_to_announcements() {
        let bids = BidSet::new(vec![10.0, 20.0], vec![0.0, 0.0], 40.0).unwrap();
        let eff = effective_bids(&bids);
        assert_eq!(eff.individual, vec![10.0, 20.0]);
        assert_eq!(eff.aggregate, 30.0);
        assert_eq!(eff.alpha, 0.0);
    }

    #[test]
    fn negative_announced_rejected() {
        assert!(BidSet::new(vec![-1.0], vec![0.5], 1.0).is_err());
        assert!(BidSet::new(vec![1.0], vec![1.5], 1.0).is_err());
    }

    #[test]
    fn aggregate_bounded_by_forecast_and_announced() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let n = rng.gen_range(1..6);
            let announced: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let confidence: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let la: f64 = announced.iter().sum();
            let forecast = la * rng.gen_range(0.5..1.5);
            let bids = BidSet::new(announced, confidence, forecast).unwrap();
            let eff = effective_bids(&bids);
            let (lo, hi) = (la.min(forecast), la.max(forecast));
            assert!(
                eff.aggregate >= lo - 1e-9 && eff.aggregate <= hi + 1e-9,
                "aggregate {} outside [{lo}, {hi}]",
                eff.aggregate
            );
            assert!((eff.aggregate - eff.individual.iter().sum::<f64>()).abs() <= 1e-9 * eff.aggregate.abs().max(1.0));
        }
    }

    #[test]
    fn randomized_axiom_sweep() {
        // 10^4 random bid sets: loads U(0,100), rho U(0,1), forecast within
        // +/-50% of the announced sum. Zero violations expected.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10_000 {
            let n = rng.gen_range(1..8);
            let announced: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let confidence: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let la: f64 = announced.iter().sum();
            let forecast = (la * rng.gen_range(0.5..1.5)).max(0.0);
            let bids = BidSet::new(announced, confidence, forecast).unwrap();
            let eff = effective_bids(&bids);
            let report = check_bid_axioms(&bids, &eff, 1e-5);
            assert!(report.all_pass(), "violation: {report:?}");
        }
    }

    #[test]
    fn scale_covariance() {
        let bids = BidSet::new(vec![3.0, 7.0, 2.0], vec![0.9, 0.2, 0.6], 14.0).unwrap();
        let eff = effective_bids(&bids);
        for c in [0.5, 2.0, 13.0] {
            let scaled = BidSet::new(
                bids.announced().iter().map(|l| c * l).collect(),
                bids.confidence().to_vec(),
                c * bids.forecast(),
            )
            .unwrap();
            let eff_c = effective_bids(&scaled);
            for (a, b) in eff.individual.iter().zip(&eff_c.individual) {
                assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
