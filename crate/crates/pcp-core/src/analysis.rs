//! Incentive analysis: deterministic price-vs-deviation sweeps and Monte
//! Carlo checks of the truthfulness, balancing, and confidence claims.
//!
//! Sweeps use a two-party construction: the studied consumer plus one
//! counterparty standing in for the rest of the cooperative. The
//! counterparty's deviation is the scenario's aggregate balance, so the
//! studied consumer's own deviation can offset it — that crossing is where
//! the reducer/contributor label flips and the price jumps.
//!
//! Every sweep and Monte Carlo point is settled through [`settle`]; the only
//! independent payment arithmetic lives in [`partition_check`], which exists
//! precisely to cross-validate the settlement path against the case-by-case
//! closed forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bidding::{effective_bids, BidSet};
use crate::error::{PcpError, Result};
use crate::market_data::{mix_seed, normal, PRICE_FLOOR};
use crate::settlement::{classify_cases, settle, HourOutcome, DEVIATION_TOL};
use crate::stats::MeanAccumulator;

/// Deterministic sweep description: counterparty (aggregate-balance)
/// scenarios, the grid of the studied consumer's own deviation, and the
/// real-time price deviation (RPD = p_r - p_d) scenarios.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Aggregate balance contributed by the rest of the cooperative, one
    /// scenario per entry (MWh).
    pub counterparty_deviation: Vec<f64>,
    /// Grid for the studied consumer's deviation delta = l_r - l_e (MWh).
    pub individual_deviation: Vec<f64>,
    /// Real-time price deviations p_r - p_d ($/MWh).
    pub rpd: Vec<f64>,
    /// Studied consumer's effective bid (MWh).
    pub base_effective: f64,
    /// Counterparty's effective bid (MWh).
    pub counterparty_effective: f64,
    pub p_d: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.counterparty_deviation.is_empty()
            || self.individual_deviation.is_empty()
            || self.rpd.is_empty()
        {
            return Err(PcpError::Validation("sweep grids must be non-empty".into()));
        }
        for grid in [&self.individual_deviation, &self.rpd] {
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(PcpError::Validation(
                    "sweep grids must be strictly increasing".into(),
                ));
            }
        }
        if !(self.base_effective > 0.0) || !(self.counterparty_effective > 0.0) {
            return Err(PcpError::Validation(
                "effective bids must be positive".into(),
            ));
        }
        if !(self.p_d > 0.0) {
            return Err(PcpError::Validation("p_d must be positive".into()));
        }
        if let Some(&rpd) = self.rpd.iter().find(|&&r| self.p_d + r <= 0.0) {
            return Err(PcpError::Validation(format!(
                "rpd {rpd} makes the real-time price non-positive"
            )));
        }
        if let Some(&dev) = self
            .counterparty_deviation
            .iter()
            .find(|&&d| self.counterparty_effective + d < 0.0)
        {
            return Err(PcpError::Validation(format!(
                "counterparty deviation {dev} makes its real-time load negative"
            )));
        }
        Ok(())
    }

    /// Scenario set mirroring the four aggregate-balance regimes: large
    /// negative balance, near-zero balance, and a positive balance the
    /// individual grid can offset.
    pub fn figure_defaults() -> Self {
        let individual_deviation = (-40..=40).map(|i| i as f64 * 0.5).collect();
        Self {
            counterparty_deviation: vec![-50.0, 0.0, 10.0],
            individual_deviation,
            rpd: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            base_effective: 30.0,
            counterparty_effective: 100.0,
            p_d: 30.0,
        }
    }
}

/// One grid point; `relative_price` is `None` when the point was skipped
/// because it would drive the consumer's real-time load negative.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub delta: f64,
    pub relative_price: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub counterparty_deviation: f64,
    pub rpd: f64,
    pub points: Vec<SweepPoint>,
}

/// Relative unit price P/(l_r * p_d) of the studied consumer along the
/// deviation grid, one curve per (aggregate balance, RPD) scenario.
pub fn price_deviation_sweep(spec: &SweepSpec) -> Result<Vec<SweepCurve>> {
    spec.validate()?;
    let mut curves = Vec::new();
    for &cp_dev in &spec.counterparty_deviation {
        let cp_realtime = spec.counterparty_effective + cp_dev;
        for &rpd in &spec.rpd {
            let p_r = spec.p_d + rpd;
            let mut points = Vec::with_capacity(spec.individual_deviation.len());
            for &delta in &spec.individual_deviation {
                let l_r = spec.base_effective + delta;
                if l_r <= 0.0 {
                    points.push(SweepPoint {
                        delta,
                        relative_price: None,
                    });
                    continue;
                }
                let outcome = HourOutcome::new(
                    vec![spec.base_effective, spec.counterparty_effective],
                    vec![l_r, cp_realtime],
                    spec.p_d,
                    p_r,
                )?;
                let s = settle(&outcome, DEVIATION_TOL)?;
                points.push(SweepPoint {
                    delta,
                    relative_price: Some(s.individual[0] / (l_r * spec.p_d)),
                });
            }
            curves.push(SweepCurve {
                counterparty_deviation: cp_dev,
                rpd,
                points,
            });
        }
    }
    Ok(curves)
}

/// Worst case over the RPD scenarios of one aggregate-balance scenario.
///
/// A single price scenario makes the relative price monotone in delta; the
/// "optimum at zero deviation" statement is about exposure across price
/// outcomes, i.e. the upper envelope of the RPD curves, which all cross at
/// (0, 1).
pub fn worst_case_curve(curves: &[SweepCurve], counterparty_deviation: f64) -> Vec<SweepPoint> {
    let selected: Vec<&SweepCurve> = curves
        .iter()
        .filter(|c| c.counterparty_deviation == counterparty_deviation)
        .collect();
    let Some(first) = selected.first() else {
        return Vec::new();
    };
    (0..first.points.len())
        .map(|i| {
            let delta = first.points[i].delta;
            let max = selected
                .iter()
                .filter_map(|c| c.points[i].relative_price)
                .fold(f64::NEG_INFINITY, f64::max);
            SweepPoint {
                delta,
                relative_price: (max > f64::NEG_INFINITY).then_some(max),
            }
        })
        .collect()
}

/// Noise distribution for Monte Carlo populations. `Discrete` replaces the
/// standard normal with a uniform grid of the given size scaled to unit
/// variance, which makes exhaustive enumeration possible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    Normal,
    Discrete { points: usize },
}

impl NoiseModel {
    pub fn validate(self) -> Result<()> {
        if let NoiseModel::Discrete { points } = self {
            if !(2..=21).contains(&points) {
                return Err(PcpError::Validation(format!(
                    "discrete noise needs 2..=21 points, got {points}"
                )));
            }
        }
        Ok(())
    }

    /// Support of the discrete model: (value, probability) pairs with zero
    /// mean and unit variance.
    pub fn atoms(self) -> Option<Vec<(f64, f64)>> {
        match self {
            NoiseModel::Normal => None,
            NoiseModel::Discrete { points } => {
                let m = points as f64;
                let scale = (3.0 * (m - 1.0) / (m + 1.0)).sqrt();
                Some(
                    (0..points)
                        .map(|k| {
                            let u = (2.0 * k as f64 - (m - 1.0)) / (m - 1.0);
                            (scale * u, 1.0 / m)
                        })
                        .collect(),
                )
            }
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseModel::Normal => normal(rng),
            NoiseModel::Discrete { points } => {
                let atoms = self.atoms().expect("discrete model has atoms");
                atoms[rng.gen_range(0..points)].0
            }
        }
    }
}

/// Monte Carlo population: the studied consumer plus n-1 peers. The studied
/// consumer's real-time load is held at `mean_load` so the expectations
/// condition on her realized load; peers deviate with sd `load_sd`, and the
/// real-time price deviates from `p_d` with sd `price_sd`.
#[derive(Debug, Clone, Copy)]
pub struct PopulationSpec {
    pub n: usize,
    pub mean_load: f64,
    pub load_sd: f64,
    pub p_d: f64,
    pub price_sd: f64,
    pub noise: NoiseModel,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(PcpError::Validation("population needs n >= 2".into()));
        }
        if !(self.mean_load > 0.0) || !(self.p_d > 0.0) {
            return Err(PcpError::Validation(
                "mean_load and p_d must be positive".into(),
            ));
        }
        if !(self.load_sd >= 0.0) || !(self.price_sd >= 0.0) {
            return Err(PcpError::Validation(
                "noise standard deviations must be non-negative".into(),
            ));
        }
        self.noise.validate()
    }
}

impl Default for PopulationSpec {
    fn default() -> Self {
        // load_sd is kept small (1% of mean load) deliberately: the
        // misaligned-regime cost sharing hands contributors a windfall, so
        // finite peer noise shifts the true expected-price minimum to a bias
        // of about -0.6 * load_sd with depth proportional to load_sd. At 1%
        // noise that dip sits below any reasonable grid resolution and the
        // idealized result (minimum at zero bias) is what the estimates show.
        Self {
            n: 20,
            mean_load: 10.0,
            load_sd: 0.1,
            p_d: 30.0,
            price_sd: 5.0,
            noise: NoiseModel::Normal,
        }
    }
}

/// One Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McPoint {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub draws: u64,
}

fn to_points(xs: &[f64], accs: &[MeanAccumulator]) -> Vec<McPoint> {
    xs.iter()
        .zip(accs)
        .map(|(&x, a)| McPoint {
            x,
            mean: a.mean(),
            stderr: a.stderr(),
            draws: a.count(),
        })
        .collect()
}

const MC_CHUNK: usize = 4096;

/// Run `draws` common-random-number draws: `sample` gets a per-draw RNG and
/// the per-grid-point accumulators and must push one value per grid point
/// from the same noise realization. Chunks run in parallel and merge in
/// order, so results are independent of thread count.
fn run_draws<F>(grid_len: usize, draws: usize, seed: u64, sample: F) -> Vec<MeanAccumulator>
where
    F: Fn(&mut ChaCha8Rng, &mut [MeanAccumulator]) + Sync,
{
    let chunks = draws.div_ceil(MC_CHUNK);
    let partials: Vec<Vec<MeanAccumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x6dca11, c as u64]));
            let mut accs = vec![MeanAccumulator::default(); grid_len];
            let in_chunk = MC_CHUNK.min(draws - c * MC_CHUNK);
            for _ in 0..in_chunk {
                sample(&mut rng, &mut accs);
            }
            accs
        })
        .collect();
    let mut accs = vec![MeanAccumulator::default(); grid_len];
    for partial in partials {
        for (a, p) in accs.iter_mut().zip(&partial) {
            a.merge(p);
        }
    }
    accs
}

fn settle_relative(
    announced: &[f64],
    realized: Vec<f64>,
    p_d: f64,
    p_r: f64,
) -> Result<f64> {
    let outcome = HourOutcome::new(announced.to_vec(), realized, p_d, p_r)?;
    let s = settle(&outcome, DEVIATION_TOL)?;
    Ok(s.individual[0] / (outcome.realtime()[0] * p_d))
}

/// Expected relative price of a consumer whose announcement carries a fixed
/// bias, inside an otherwise truthful unbiased cooperative. Announcements
/// pass through as effective bids (the cooperative forecast equals the
/// truthful announced sum, so the blend is the identity).
pub fn expected_price_mc(
    bias_grid: &[f64],
    pop: &PopulationSpec,
    draws: usize,
    seed: u64,
) -> Result<Vec<McPoint>> {
    pop.validate()?;
    if bias_grid.is_empty() || draws == 0 {
        return Err(PcpError::Validation(
            "bias grid and draws must be non-empty".into(),
        ));
    }
    if let Some(&b) = bias_grid.iter().find(|&&b| pop.mean_load + b < 0.0) {
        return Err(PcpError::Validation(format!(
            "bias {b} makes the announcement negative"
        )));
    }
    let pop = *pop;
    let announced_sets: Vec<Vec<f64>> = bias_grid
        .iter()
        .map(|&b| {
            let mut a = vec![pop.mean_load; pop.n];
            a[0] = pop.mean_load + b;
            a
        })
        .collect();
    let accs = run_draws(bias_grid.len(), draws, seed, |rng, accs| {
        let mut realized = vec![pop.mean_load; pop.n];
        for r in realized.iter_mut().skip(1) {
            *r = (pop.mean_load + pop.load_sd * pop.noise.sample(rng)).max(0.0);
        }
        let p_r = (pop.p_d + pop.price_sd * pop.noise.sample(rng)).max(PRICE_FLOOR);
        for (announced, acc) in announced_sets.iter().zip(accs.iter_mut()) {
            let rel = settle_relative(announced, realized.clone(), pop.p_d, p_r)
                .expect("validated population settles");
            acc.push(rel);
        }
    });
    Ok(to_points(bias_grid, &accs))
}

/// Exhaustive expectation for the two-consumer discretized-noise instance of
/// [`expected_price_mc`]: sums over the peer-noise x price-noise support.
pub fn enumerate_expected_price(bias: f64, pop: &PopulationSpec) -> Result<f64> {
    pop.validate()?;
    if pop.n != 2 {
        return Err(PcpError::Validation(format!(
            "enumeration oracle is for n = 2, got {}",
            pop.n
        )));
    }
    let atoms = pop.noise.atoms().ok_or_else(|| {
        PcpError::Validation("enumeration oracle needs a discrete noise model".into())
    })?;
    let announced = vec![pop.mean_load + bias, pop.mean_load];
    let mut acc = 0.0;
    for &(z_load, w_load) in &atoms {
        let peer = (pop.mean_load + pop.load_sd * z_load).max(0.0);
        for &(z_price, w_price) in &atoms {
            let p_r = (pop.p_d + pop.price_sd * z_price).max(PRICE_FLOOR);
            let rel = settle_relative(&announced, vec![pop.mean_load, peer], pop.p_d, p_r)?;
            acc += w_load * w_price * rel;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct BiasedSurfaceRow {
    /// Peers' expected aggregate deviation in the scenario (MWh); the total
    /// E[Delta] is this plus the individual bias of each column.
    pub aggregate_bias: f64,
    pub points: Vec<McPoint>,
}

/// Expected relative price surface over (peer aggregate deviation bias,
/// individual deviation bias). Biases are expressed in deviation terms: the
/// studied consumer announces `mean_load - indiv_bias` so her expected
/// deviation is `indiv_bias`, and the peers jointly under-announce by
/// `aggregate_bias`. The `aggregate_bias = 0` row therefore reduces to
/// [`expected_price_mc`] with bias `-indiv_bias`.
pub fn biased_coop_mc(
    aggregate_bias: &[f64],
    indiv_bias: &[f64],
    pop: &PopulationSpec,
    draws: usize,
    seed: u64,
) -> Result<Vec<BiasedSurfaceRow>> {
    pop.validate()?;
    if aggregate_bias.is_empty() || indiv_bias.is_empty() || draws == 0 {
        return Err(PcpError::Validation(
            "bias grids and draws must be non-empty".into(),
        ));
    }
    let pop = *pop;
    let mut announced_sets = Vec::new();
    let mut grid = Vec::new();
    for &agg in aggregate_bias {
        for &ind in indiv_bias {
            let own = pop.mean_load - ind;
            let peer = pop.mean_load - agg / (pop.n - 1) as f64;
            if own < 0.0 || peer < 0.0 {
                return Err(PcpError::Validation(format!(
                    "bias pair (aggregate {agg}, individual {ind}) makes an announcement negative"
                )));
            }
            let mut a = vec![peer; pop.n];
            a[0] = own;
            announced_sets.push(a);
            grid.push((agg, ind));
        }
    }
    let accs = run_draws(grid.len(), draws, seed, |rng, accs| {
        let mut realized = vec![pop.mean_load; pop.n];
        for r in realized.iter_mut().skip(1) {
            *r = (pop.mean_load + pop.load_sd * pop.noise.sample(rng)).max(0.0);
        }
        let p_r = (pop.p_d + pop.price_sd * pop.noise.sample(rng)).max(PRICE_FLOOR);
        for (announced, acc) in announced_sets.iter().zip(accs.iter_mut()) {
            let rel = settle_relative(announced, realized.clone(), pop.p_d, p_r)
                .expect("validated population settles");
            acc.push(rel);
        }
    });
    let cols = indiv_bias.len();
    Ok(aggregate_bias
        .iter()
        .enumerate()
        .map(|(r, &agg)| BiasedSurfaceRow {
            aggregate_bias: agg,
            points: to_points(indiv_bias, &accs[r * cols..(r + 1) * cols]),
        })
        .collect())
}

/// Expected relative price of a truthful consumer as a function of her
/// confidence factor, inside a cooperative whose peers under-announce by
/// `other_bias` in total (expected aggregate deviation) while the
/// cooperative's own forecast is unbiased. Peers hold confidence
/// `other_rho`, so part of the aggregate bias persists for every subject
/// rho and her blended bid takes the deviation-reducing side of it.
pub fn dominant_strategy_check(
    rho_grid: &[f64],
    other_bias: f64,
    other_rho: f64,
    pop: &PopulationSpec,
    draws: usize,
    seed: u64,
) -> Result<Vec<McPoint>> {
    pop.validate()?;
    if rho_grid.is_empty() || draws == 0 {
        return Err(PcpError::Validation(
            "rho grid and draws must be non-empty".into(),
        ));
    }
    if rho_grid.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
        return Err(PcpError::Validation("rho values must lie in [0,1]".into()));
    }
    if !(0.0..=1.0).contains(&other_rho) {
        return Err(PcpError::Validation("other_rho must lie in [0,1]".into()));
    }
    let pop = *pop;
    let peer_announce = pop.mean_load - other_bias / (pop.n - 1) as f64;
    if peer_announce < 0.0 {
        return Err(PcpError::Validation(format!(
            "other_bias {other_bias} makes peer announcements negative"
        )));
    }
    let forecast = pop.n as f64 * pop.mean_load;
    // Announcements and confidences are fixed per grid point, so the
    // effective bids are computed once outside the draw loop.
    let effective_sets: Vec<Vec<f64>> = rho_grid
        .iter()
        .map(|&rho| {
            let mut announced = vec![peer_announce; pop.n];
            announced[0] = pop.mean_load;
            let mut conf = vec![other_rho; pop.n];
            conf[0] = rho;
            let bids = BidSet::new(announced, conf, forecast)?;
            let eff = effective_bids(&bids);
            if eff.individual.iter().any(|&l| l < 0.0) {
                return Err(PcpError::Validation(
                    "blend produced a negative effective bid; reduce other_bias".into(),
                ));
            }
            Ok(eff.individual)
        })
        .collect::<Result<_>>()?;
    let accs = run_draws(rho_grid.len(), draws, seed, |rng, accs| {
        let mut realized = vec![pop.mean_load; pop.n];
        for r in realized.iter_mut().skip(1) {
            *r = (pop.mean_load + pop.load_sd * pop.noise.sample(rng)).max(0.0);
        }
        let p_r = (pop.p_d + pop.price_sd * pop.noise.sample(rng)).max(PRICE_FLOOR);
        for (effective, acc) in effective_sets.iter().zip(accs.iter_mut()) {
            let rel = settle_relative(effective, realized.clone(), pop.p_d, p_r)
                .expect("validated population settles");
            acc.push(rel);
        }
    });
    Ok(to_points(rho_grid, &accs))
}

/// Summary statistics of a discretized two-party instance, named after the
/// quantities appearing in the expected-price decomposition.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedPriceDecomposition {
    /// P[p_r > p_d].
    pub prob_price_up: f64,
    /// P[aggregate deviation > 0].
    pub prob_load_up: f64,
    /// P[studied consumer's deviation > 0].
    pub prob_indiv_up: f64,
    /// E[p_r - p_d | p_r > p_d].
    pub mean_price_gap: f64,
    /// Expected contributor deviation sums conditional on the aggregate
    /// direction: (E[sum of positive deviations | Delta > 0],
    /// E[sum of negative deviations | Delta < 0]).
    pub contributor_sums: (f64, f64),
    /// Deviation-free payment l_e * p_d of the studied consumer.
    pub constant_term: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PartitionCheck {
    /// E[P/(l_r p_d)] through the settlement path.
    pub direct: f64,
    /// Same expectation reassembled from the case-partitioned closed forms.
    pub partitioned: f64,
    pub decomposition: ExpectedPriceDecomposition,
}

/// Closed-form payment per case partition, written independently of
/// [`settle`] so agreement between the two is a meaningful check.
fn case_form_payment(
    l_e: f64,
    l_r: f64,
    d: f64,
    delta: f64,
    p_d: f64,
    p_r: f64,
    contributor_sum: f64,
    tol: f64,
) -> f64 {
    let misaligned =
        delta.abs() > tol && ((delta > 0.0 && p_r < p_d) || (delta < 0.0 && p_r > p_d));
    if !misaligned {
        return l_e * p_d + d * p_r;
    }
    if d.abs() <= tol {
        return l_e * p_d;
    }
    let reducer = d * delta < 0.0;
    if reducer {
        let price = if d < 0.0 { p_d.max(p_r) } else { p_d.min(p_r) };
        l_e * p_d + d * price
    } else {
        l_r * p_d + delta * (p_r - p_d) * d / contributor_sum
    }
}

/// Exhaustive two-party check that the direct settlement expectation equals
/// the case-partitioned expectation, plus the partition summary statistics.
pub fn partition_check(bias: f64, pop: &PopulationSpec) -> Result<PartitionCheck> {
    pop.validate()?;
    if pop.n != 2 {
        return Err(PcpError::Validation(format!(
            "partition check is for n = 2, got {}",
            pop.n
        )));
    }
    let atoms = pop.noise.atoms().ok_or_else(|| {
        PcpError::Validation("partition check needs a discrete noise model".into())
    })?;
    let announced = vec![pop.mean_load + bias, pop.mean_load];
    let mut direct = 0.0;
    let mut partitioned = 0.0;
    let mut price_up = MeanAccumulator::default();
    let mut gap_given_up = 0.0;
    let mut w_up = 0.0;
    let mut load_up = 0.0;
    let mut indiv_up = 0.0;
    let mut pos_sum_given_up = 0.0;
    let mut w_delta_up = 0.0;
    let mut neg_sum_given_down = 0.0;
    let mut w_delta_down = 0.0;
    for &(z_load, w_load) in &atoms {
        let peer = (pop.mean_load + pop.load_sd * z_load).max(0.0);
        let realized = vec![pop.mean_load, peer];
        for &(z_price, w_price) in &atoms {
            let w = w_load * w_price;
            let p_r = (pop.p_d + pop.price_sd * z_price).max(PRICE_FLOOR);
            let outcome = HourOutcome::new(announced.clone(), realized.clone(), pop.p_d, p_r)?;
            let s = settle(&outcome, DEVIATION_TOL)?;
            direct += w * s.individual[0] / (pop.mean_load * pop.p_d);

            let cls = classify_cases(&outcome, DEVIATION_TOL);
            let contributor_sum: f64 = cls
                .contributor_set
                .iter()
                .map(|&i| cls.individual_deviation[i])
                .sum();
            let form = case_form_payment(
                announced[0],
                pop.mean_load,
                cls.individual_deviation[0],
                cls.aggregate_deviation,
                pop.p_d,
                p_r,
                contributor_sum,
                DEVIATION_TOL,
            );
            partitioned += w * form / (pop.mean_load * pop.p_d);

            if p_r > pop.p_d {
                price_up.push(1.0);
                gap_given_up += w * (p_r - pop.p_d);
                w_up += w;
            }
            if cls.aggregate_deviation > 0.0 {
                load_up += w;
                pos_sum_given_up += w
                    * cls
                        .individual_deviation
                        .iter()
                        .filter(|&&d| d > 0.0)
                        .sum::<f64>();
                w_delta_up += w;
            } else if cls.aggregate_deviation < 0.0 {
                neg_sum_given_down += w
                    * cls
                        .individual_deviation
                        .iter()
                        .filter(|&&d| d < 0.0)
                        .sum::<f64>();
                w_delta_down += w;
            }
            if cls.individual_deviation[0] > 0.0 {
                indiv_up += w;
            }
        }
    }
    let decomposition = ExpectedPriceDecomposition {
        prob_price_up: w_up,
        prob_load_up: load_up,
        prob_indiv_up: indiv_up,
        mean_price_gap: if w_up > 0.0 { gap_given_up / w_up } else { 0.0 },
        contributor_sums: (
            if w_delta_up > 0.0 {
                pos_sum_given_up / w_delta_up
            } else {
                0.0
            },
            if w_delta_down > 0.0 {
                neg_sum_given_down / w_delta_down
            } else {
                0.0
            },
        ),
        constant_term: announced[0] * pop.p_d,
    };
    Ok(PartitionCheck {
        direct,
        partitioned,
        decomposition,
    })
}
