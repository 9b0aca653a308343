//! Payment disaggregation across the eight deviation/price cases.
//!
//! The cooperative settles `L_e*p_d + (L_r - L_e)*p_r` with the market and
//! splits it among consumers. Consumers whose deviation opposes the aggregate
//! (reducers) get the favorable of the two prices for their deviation; the
//! resulting cost is carried by the consumers who caused the aggregate
//! deviation (contributors), proportional to their share of it.

use crate::error::{PcpError, Result};

/// Default tolerance for treating a deviation as zero (MWh).
pub const DEVIATION_TOL: f64 = 1e-9;

/// Per-consumer effective bids and real-time consumptions plus the two
/// prices for a single hour.
#[derive(Debug, Clone)]
pub struct HourOutcome {
    effective: Vec<f64>,
    realtime: Vec<f64>,
    p_d: f64,
    p_r: f64,
}

impl HourOutcome {
    pub fn new(effective: Vec<f64>, realtime: Vec<f64>, p_d: f64, p_r: f64) -> Result<Self> {
        if effective.is_empty() || effective.len() != realtime.len() {
            return Err(PcpError::Alignment(format!(
                "effective ({}) and realtime ({}) lengths must match and be >= 1",
                effective.len(),
                realtime.len()
            )));
        }
        if effective.iter().chain(&realtime).any(|&l| !(l >= 0.0)) {
            return Err(PcpError::Validation("loads must be non-negative".into()));
        }
        if !(p_d > 0.0) || !(p_r > 0.0) {
            return Err(PcpError::Validation(format!(
                "prices must be positive, got p_d={p_d}, p_r={p_r}"
            )));
        }
        Ok(Self {
            effective,
            realtime,
            p_d,
            p_r,
        })
    }

    pub fn effective(&self) -> &[f64] {
        &self.effective
    }

    pub fn realtime(&self) -> &[f64] {
        &self.realtime
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn p_r(&self) -> f64 {
        self.p_r
    }

    pub fn num_consumers(&self) -> usize {
        self.effective.len()
    }

    fn with_realtime(&self, i: usize, value: f64) -> Self {
        let mut rt = self.realtime.clone();
        rt[i] = value;
        Self {
            effective: self.effective.clone(),
            realtime: rt,
            p_d: self.p_d,
            p_r: self.p_r,
        }
    }
}

/// Deviation case for one consumer in one hour. Number: sign of the
/// individual deviation vs the aggregate (1/2 contributors, 3/4 reducers).
/// Letter: `a` when `p_r >= p_d`, `b` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    C1a,
    C1b,
    C2a,
    C2b,
    C3a,
    C3b,
    C4a,
    C4b,
    Balanced,
}

impl CaseLabel {
    pub fn is_contributor(self) -> bool {
        matches!(self, CaseLabel::C1a | CaseLabel::C1b | CaseLabel::C2a | CaseLabel::C2b)
    }

    pub fn is_reducer(self) -> bool {
        matches!(self, CaseLabel::C3a | CaseLabel::C3b | CaseLabel::C4a | CaseLabel::C4b)
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseLabel::C1a => "1a",
            CaseLabel::C1b => "1b",
            CaseLabel::C2a => "2a",
            CaseLabel::C2b => "2b",
            CaseLabel::C3a => "3a",
            CaseLabel::C3b => "3b",
            CaseLabel::C4a => "4a",
            CaseLabel::C4b => "4b",
            CaseLabel::Balanced => "balanced",
        };
        f.write_str(s)
    }
}

/// Case classification for one hour.
#[derive(Debug, Clone)]
pub struct CaseClassification {
    pub aggregate_deviation: f64,
    pub individual_deviation: Vec<f64>,
    pub labels: Vec<CaseLabel>,
    /// Indices of deviation contributors (cases 1 and 2).
    pub contributor_set: Vec<usize>,
}

/// Total market payment for the hour: `L_e*p_d + (L_r - L_e)*p_r`.
pub fn total_payment(l_e: f64, l_r: f64, p_d: f64, p_r: f64) -> f64 {
    l_e * p_d + (l_r - l_e) * p_r
}

/// Assign each consumer a deviation case. Consumers with `|delta| <= tol`,
/// or every consumer when `|Delta| <= tol`, are labeled balanced.
pub fn classify_cases(outcome: &HourOutcome, tol: f64) -> CaseClassification {
    let n = outcome.num_consumers();
    let individual_deviation: Vec<f64> = (0..n)
        .map(|i| outcome.realtime[i] - outcome.effective[i])
        .collect();
    let aggregate_deviation: f64 = individual_deviation.iter().sum();
    let price_up = outcome.p_r >= outcome.p_d;

    let mut labels = vec![CaseLabel::Balanced; n];
    let mut contributor_set = Vec::new();
    if aggregate_deviation.abs() > tol {
        for i in 0..n {
            let d = individual_deviation[i];
            if d.abs() <= tol {
                continue;
            }
            let label = match (aggregate_deviation > 0.0, d > 0.0, price_up) {
                (true, true, true) => CaseLabel::C1a,
                (true, true, false) => CaseLabel::C1b,
                (false, false, true) => CaseLabel::C2a,
                (false, false, false) => CaseLabel::C2b,
                (true, false, true) => CaseLabel::C3a,
                (true, false, false) => CaseLabel::C3b,
                (false, true, true) => CaseLabel::C4a,
                (false, true, false) => CaseLabel::C4b,
            };
            if label.is_contributor() {
                contributor_set.push(i);
            }
            labels[i] = label;
        }
    }
    CaseClassification {
        aggregate_deviation,
        individual_deviation,
        labels,
        contributor_set,
    }
}

/// Full settlement for one hour.
#[derive(Debug, Clone)]
pub struct Settlement {
    pub total_payment: f64,
    pub individual: Vec<f64>,
    pub case_labels: Vec<CaseLabel>,
    pub aggregate_deviation: f64,
    pub individual_deviation: Vec<f64>,
    pub contributor_set: Vec<usize>,
}

/// Disaggregate the hour's total payment.
///
/// Aligned regimes (the price moved with the deviation: `Delta>0, p_r>=p_d`
/// or `Delta<0, p_r<=p_d`) charge everyone `l_e*p_d + delta*p_r`; the
/// reducers' price choice equals `p_r` there, so nothing extra is owed.
/// Misaligned regimes grant reducers the day-ahead price for their deviation
/// and recover the difference from contributors in proportion to their share
/// of the aggregate deviation.
pub fn settle(outcome: &HourOutcome, tol: f64) -> Result<Settlement> {
    let cls = classify_cases(outcome, tol);
    let n = outcome.num_consumers();
    let p_d = outcome.p_d;
    let p_r = outcome.p_r;
    let l_e_total: f64 = outcome.effective.iter().sum();
    let l_r_total: f64 = outcome.realtime.iter().sum();
    let total = total_payment(l_e_total, l_r_total, p_d, p_r);
    let delta = cls.aggregate_deviation;

    let misaligned = delta.abs() > tol
        && ((delta > 0.0 && p_r < p_d) || (delta < 0.0 && p_r > p_d));

    let eq5 = |i: usize| outcome.effective[i] * p_d + cls.individual_deviation[i] * p_r;

    let individual: Vec<f64> = if !misaligned {
        (0..n).map(eq5).collect()
    } else {
        let contributor_sum: f64 = cls
            .contributor_set
            .iter()
            .map(|&i| cls.individual_deviation[i])
            .sum();
        if cls.contributor_set.is_empty() || contributor_sum.abs() <= tol {
            // Arithmetically impossible: Delta > tol forces some same-signed
            // individual deviation. Surfaced instead of dividing by zero.
            return Err(PcpError::Internal(format!(
                "aggregate deviation {delta} with empty contributor set"
            )));
        }
        (0..n)
            .map(|i| {
                let d = cls.individual_deviation[i];
                match cls.labels[i] {
                    CaseLabel::Balanced => outcome.effective[i] * p_d,
                    l if l.is_reducer() => {
                        // Rational price choice: case 3 (delta<0) takes the
                        // larger price, case 4 (delta>0) the smaller.
                        let price = if d < 0.0 { p_d.max(p_r) } else { p_d.min(p_r) };
                        outcome.effective[i] * p_d + d * price
                    }
                    _ => {
                        outcome.realtime[i] * p_d
                            + delta * (p_r - p_d) * d / contributor_sum
                    }
                }
            })
            .collect()
    };

    Ok(Settlement {
        total_payment: total,
        individual,
        case_labels: cls.labels,
        aggregate_deviation: delta,
        individual_deviation: cls.individual_deviation,
        contributor_set: cls.contributor_set,
    })
}

/// Central-difference estimate of `dP^i / dl_r^i`.
///
/// Valid only while the perturbation preserves the signs of both the
/// aggregate and the individual deviation; a sign flip is reported as an
/// error rather than a meaningless derivative.
pub fn marginal_price_check(outcome: &HourOutcome, i: usize, h: f64) -> Result<f64> {
    if i >= outcome.num_consumers() {
        return Err(PcpError::Range(format!("consumer index {i} out of range")));
    }
    if !(h > 0.0) {
        return Err(PcpError::Range("step h must be positive".into()));
    }
    let base = classify_cases(outcome, DEVIATION_TOL);
    let lr = outcome.realtime[i];
    if lr - h < 0.0 {
        return Err(PcpError::Range(format!(
            "step {h} drives consumer {i} load negative"
        )));
    }
    let up = outcome.with_realtime(i, lr + h);
    let down = outcome.with_realtime(i, lr - h);
    for (name, pert) in [("+h", &up), ("-h", &down)] {
        let c = classify_cases(pert, DEVIATION_TOL);
        if c.aggregate_deviation.signum() != base.aggregate_deviation.signum() {
            return Err(PcpError::Validation(format!(
                "perturbation {name} flips the aggregate deviation sign"
            )));
        }
        if c.individual_deviation[i].signum() != base.individual_deviation[i].signum() {
            return Err(PcpError::Validation(format!(
                "perturbation {name} flips consumer {i}'s deviation sign"
            )));
        }
    }
    let p_up = settle(&up, DEVIATION_TOL)?.individual[i];
    let p_down = settle(&down, DEVIATION_TOL)?.individual[i];
    Ok((p_up - p_down) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn worked_outcome() -> HourOutcome {
        HourOutcome::new(vec![30.0, 30.0, 40.0], vec![40.0, 35.0, 35.0], 30.0, 20.0).unwrap()
    }

    #[test]
    fn total_payment_examples() {
        assert_eq!(total_payment(100.0, 110.0, 30.0, 40.0), 3400.0);
        assert_eq!(total_payment(100.0, 100.0, 30.0, 40.0), 3000.0);
        assert_eq!(total_payment(100.0, 90.0, 30.0, 20.0), 2800.0);
    }

    #[test]
    fn classify_worked_example() {
        let cls = classify_cases(&worked_outcome(), DEVIATION_TOL);
        assert!((cls.aggregate_deviation - 10.0).abs() < 1e-12);
        assert_eq!(cls.individual_deviation, vec![10.0, 5.0, -5.0]);
        assert_eq!(cls.labels, vec![CaseLabel::C1b, CaseLabel::C1b, CaseLabel::C3b]);
        assert_eq!(cls.contributor_set, vec![0, 1]);
    }

    #[test]
    fn classify_balanced_hour() {
        let o = HourOutcome::new(vec![10.0, 20.0], vec![10.0, 20.0], 30.0, 40.0).unwrap();
        let cls = classify_cases(&o, DEVIATION_TOL);
        assert!(cls.labels.iter().all(|&l| l == CaseLabel::Balanced));
        assert!(cls.contributor_set.is_empty());
    }

    #[test]
    fn classify_case_4a() {
        // Delta < 0, p_r > p_d, one consumer with positive deviation.
        let o = HourOutcome::new(vec![10.0, 30.0], vec![12.0, 20.0], 30.0, 35.0).unwrap();
        let cls = classify_cases(&o, DEVIATION_TOL);
        assert_eq!(cls.labels[0], CaseLabel::C4a);
        assert_eq!(cls.labels[1], CaseLabel::C2a);
    }

    #[test]
    fn settle_worked_example() {
        let s = settle(&worked_outcome(), DEVIATION_TOL).unwrap();
        assert!((s.individual[0] - (1200.0 - 100.0 * 10.0 / 15.0)).abs() < 1e-9);
        assert!((s.individual[1] - (1050.0 - 100.0 * 5.0 / 15.0)).abs() < 1e-9);
        assert!((s.individual[2] - 1050.0).abs() < 1e-12);
        assert!((s.total_payment - 3200.0).abs() < 1e-12);
        let sum: f64 = s.individual.iter().sum();
        assert!((sum - s.total_payment).abs() <= 1e-9 * s.total_payment.abs());
    }

    #[test]
    fn settle_no_deviation() {
        let o = HourOutcome::new(vec![10.0, 20.0], vec![10.0, 20.0], 30.0, 20.0).unwrap();
        let s = settle(&o, DEVIATION_TOL).unwrap();
        assert_eq!(s.individual, vec![300.0, 600.0]);
        assert_eq!(s.total_payment, 900.0);
    }

    #[test]
    fn settle_aligned_is_linear() {
        // Delta > 0 with p_r > p_d: everyone pays l_e*p_d + delta*p_r.
        let o = HourOutcome::new(vec![10.0, 20.0], vec![12.0, 21.0], 30.0, 35.0).unwrap();
        let s = settle(&o, DEVIATION_TOL).unwrap();
        assert!((s.individual[0] - (300.0 + 2.0 * 35.0)).abs() < 1e-12);
        assert!((s.individual[1] - (600.0 + 1.0 * 35.0)).abs() < 1e-12);
        let sum: f64 = s.individual.iter().sum();
        assert!((sum - s.total_payment).abs() < 1e-9);
    }

    fn random_outcome(rng: &mut ChaCha8Rng, n: usize) -> HourOutcome {
        let effective: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let realtime: Vec<f64> = effective
            .iter()
            .map(|&e| (e + rng.gen_range(-30.0..30.0)).max(0.0))
            .collect();
        let p_d = rng.gen_range(10.0..60.0);
        let p_r = (p_d + rng.gen_range(-20.0_f64..20.0)).max(0.5);
        HourOutcome::new(effective, realtime, p_d, p_r).unwrap()
    }

    #[test]
    fn balance_holds_over_randomized_hours() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20_000 {
            let n = rng.gen_range(1..10);
            let o = random_outcome(&mut rng, n);
            let s = settle(&o, DEVIATION_TOL).unwrap();
            let sum: f64 = s.individual.iter().sum();
            let scale = s.total_payment.abs().max(1.0);
            assert!(
                (sum - s.total_payment).abs() <= 1e-9 * scale,
                "imbalance {} vs total {}",
                sum - s.total_payment,
                s.total_payment
            );
        }
    }

    #[test]
    fn marginal_price_positive_on_worked_example() {
        let d = marginal_price_check(&worked_outcome(), 0, 0.01).unwrap();
        assert!(d > 0.0, "derivative {d}");
    }

    #[test]
    fn marginal_price_equals_p_r_in_aligned_regime() {
        let o = HourOutcome::new(vec![10.0, 20.0], vec![12.0, 21.0], 30.0, 35.0).unwrap();
        let d = marginal_price_check(&o, 0, 0.01).unwrap();
        assert!((d - 35.0).abs() < 1e-9);
    }

    #[test]
    fn marginal_price_sign_flip_rejected() {
        // delta_0 = +0.005; h = 0.01 flips its sign.
        let o = HourOutcome::new(vec![10.0, 20.0], vec![10.005, 26.0], 30.0, 20.0).unwrap();
        assert!(marginal_price_check(&o, 0, 0.01).is_err());
    }

    #[test]
    fn reducer_choice_is_optimal() {
        // Axiom B.3: implemented reducer payment <= payment under either
        // fixed price.
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut seen = 0;
        while seen < 2000 {
            let o = random_outcome(&mut rng, 4);
            let s = settle(&o, DEVIATION_TOL).unwrap();
            for i in 0..4 {
                if s.case_labels[i].is_reducer() {
                    let d = s.individual_deviation[i];
                    let a = o.effective()[i] * o.p_d() + d * o.p_d();
                    let b = o.effective()[i] * o.p_d() + d * o.p_r();
                    assert!(s.individual[i] <= a.min(b) + 1e-9);
                    seen += 1;
                }
            }
        }
    }

    #[test]
    fn contributor_surcharge_matches_reducer_grant() {
        // Axiom B.4: in misaligned regimes the contributors' total surcharge
        // over the aligned formula equals the cost of the reducers' price
        // choice (plus the balanced consumers' delta rebate, which is <= tol).
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let mut seen = 0;
        while seen < 1000 {
            let o = random_outcome(&mut rng, 5);
            let s = settle(&o, DEVIATION_TOL).unwrap();
            let delta = s.aggregate_deviation;
            let misaligned = delta.abs() > DEVIATION_TOL
                && ((delta > 0.0 && o.p_r() < o.p_d()) || (delta < 0.0 && o.p_r() > o.p_d()));
            if !misaligned {
                continue;
            }
            let eq5 = |i: usize| o.effective()[i] * o.p_d() + s.individual_deviation[i] * o.p_r();
            let surcharge: f64 = s
                .contributor_set
                .iter()
                .map(|&i| s.individual[i] - eq5(i))
                .sum();
            let grant: f64 = (0..5)
                .filter(|&i| s.case_labels[i].is_reducer())
                .map(|i| eq5(i) - s.individual[i])
                .sum();
            assert!(
                (surcharge - grant).abs() <= 1e-6 * surcharge.abs().max(1.0),
                "surcharge {surcharge} vs grant {grant}"
            );
            seen += 1;
        }
    }

    #[test]
    fn labels_permutation_invariant() {
        let o = worked_outcome();
        let s = settle(&o, DEVIATION_TOL).unwrap();
        let perm = [2usize, 0, 1];
        let o2 = HourOutcome::new(
            perm.iter().map(|&i| o.effective()[i]).collect(),
            perm.iter().map(|&i| o.realtime()[i]).collect(),
            o.p_d(),
            o.p_r(),
        )
        .unwrap();
        let s2 = settle(&o2, DEVIATION_TOL).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(s2.case_labels[k], s.case_labels[i]);
            assert!((s2.individual[k] - s.individual[i]).abs() < 1e-12);
        }
    }
}
