//! Short-term aggregate load forecasting.
//!
//! Additive double-seasonal exponential smoothing: a smoothed level, a
//! 24-slot daily seasonal ring, a 168-slot weekly ring, and a first-order
//! autoregressive residual adjustment. The k-step forecast is
//!
//! ```text
//! f(t+k) = level + daily[(t+k-1) % 24] + weekly[(t+k-1) % 168] + phi^k * e_t
//! ```
//!
//! Smoothing parameters are re-optimized once a day by a deterministic
//! Nelder-Mead search over the trailing window (see [`refit_daily`]).

mod nelder_mead;

use crate::error::{PcpError, Result};
use nelder_mead::{Bounds, NelderMead};

pub const DAILY_SEASON: usize = 24;
pub const WEEKLY_SEASON: usize = 168;

/// Minimum history for seasonal initialization: two weekly cycles.
pub const MIN_WINDOW: usize = 2 * WEEKLY_SEASON;

/// Standard refit window: four weeks.
pub const REFIT_WINDOW: usize = 672;

/// Evaluation budget for one daily refit.
pub const MAX_REFIT_EVALS: usize = 2000;

/// Smoothing coefficients for level and both seasonal rings, plus the AR(1)
/// residual coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub level: f64,
    pub daily: f64,
    pub weekly: f64,
    pub phi: f64,
}

impl SmoothingParams {
    pub const DEFAULT: SmoothingParams = SmoothingParams {
        level: 0.2,
        daily: 0.15,
        weekly: 0.05,
        phi: 0.3,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("level", self.level),
            ("daily", self.daily),
            ("weekly", self.weekly),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PcpError::Validation(format!(
                    "smoothing coefficient {name} must lie in [0,1], got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.phi) {
            return Err(PcpError::Validation(format!(
                "phi must lie in [0,1), got {}",
                self.phi
            )));
        }
        Ok(())
    }
}

/// Trailing hourly aggregate loads. `start_hour` is the absolute hour index
/// of the first sample; seasonal phases are `(start_hour + i) % 24` and
/// `% 168`, so windows cut from any point of a longer series stay aligned.
#[derive(Debug, Clone)]
pub struct FitWindow {
    history: Vec<f64>,
    start_hour: u64,
}

impl FitWindow {
    pub fn new(history: Vec<f64>, start_hour: u64) -> Result<Self> {
        if history.len() < MIN_WINDOW {
            return Err(PcpError::InsufficientHistory {
                need: MIN_WINDOW,
                got: history.len(),
            });
        }
        Ok(Self {
            history,
            start_hour,
        })
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn start_hour(&self) -> u64 {
        self.start_hour
    }
}

/// Smoothing state. A value type: `update` and `refit_daily` return new
/// states, so independent forecasters can run concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastState {
    level: f64,
    daily: Vec<f64>,
    weekly: Vec<f64>,
    last_residual: f64,
    params: SmoothingParams,
    /// Absolute hour index of the next observation.
    t: u64,
}

impl ForecastState {
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn daily_idx(&self) -> &[f64] {
        &self.daily
    }

    pub fn weekly_idx(&self) -> &[f64] {
        &self.weekly
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn params(&self) -> SmoothingParams {
        self.params
    }

    pub fn next_hour(&self) -> u64 {
        self.t
    }

    fn phase24(&self, offset: u64) -> usize {
        ((self.t + offset) % DAILY_SEASON as u64) as usize
    }

    fn phase168(&self, offset: u64) -> usize {
        ((self.t + offset) % WEEKLY_SEASON as u64) as usize
    }
}

/// Mean-based seasonal decomposition of a window: level = window mean,
/// daily index = per-hour-of-day mean residual, weekly index = per-hour-of-week
/// mean residual after daily removal.
pub fn init_state_with(window: &FitWindow, params: SmoothingParams) -> Result<ForecastState> {
    params.validate()?;
    let xs = window.history();
    let n = xs.len() as f64;
    let level = xs.iter().sum::<f64>() / n;

    let mut daily = vec![0.0; DAILY_SEASON];
    let mut daily_cnt = vec![0usize; DAILY_SEASON];
    for (i, &x) in xs.iter().enumerate() {
        let p = ((window.start_hour + i as u64) % DAILY_SEASON as u64) as usize;
        daily[p] += x - level;
        daily_cnt[p] += 1;
    }
    for (d, c) in daily.iter_mut().zip(&daily_cnt) {
        *d /= (*c).max(1) as f64;
    }

    let mut weekly = vec![0.0; WEEKLY_SEASON];
    let mut weekly_cnt = vec![0usize; WEEKLY_SEASON];
    for (i, &x) in xs.iter().enumerate() {
        let h = window.start_hour + i as u64;
        let p24 = (h % DAILY_SEASON as u64) as usize;
        let p168 = (h % WEEKLY_SEASON as u64) as usize;
        weekly[p168] += x - level - daily[p24];
        weekly_cnt[p168] += 1;
    }
    for (w, c) in weekly.iter_mut().zip(&weekly_cnt) {
        *w /= (*c).max(1) as f64;
    }

    Ok(ForecastState {
        level,
        daily,
        weekly,
        last_residual: 0.0,
        params,
        t: window.start_hour + xs.len() as u64,
    })
}

pub fn init_state(window: &FitWindow) -> Result<ForecastState> {
    init_state_with(window, SmoothingParams::DEFAULT)
}

/// Consume one observation: error-correction update of the level, the due
/// seasonal slots, and the AR residual, then advance one hour.
pub fn update(state: &ForecastState, observed: f64) -> ForecastState {
    let mut s = state.clone();
    let p24 = s.phase24(0);
    let p168 = s.phase168(0);
    let predicted = s.level + s.daily[p24] + s.weekly[p168] + s.params.phi * s.last_residual;
    let e = observed - predicted;
    s.level += s.params.level * e;
    s.daily[p24] += s.params.daily * e;
    s.weekly[p168] += s.params.weekly * e;
    s.last_residual = e;
    s.t += 1;
    s
}

/// k-step-ahead forecast, k in [1, 36].
pub fn forecast(state: &ForecastState, k: usize) -> Result<f64> {
    if !(1..=36).contains(&k) {
        return Err(PcpError::Range(format!("lead {k} outside [1, 36]")));
    }
    let off = (k - 1) as u64;
    Ok(state.level
        + state.daily[state.phase24(off)]
        + state.weekly[state.phase168(off)]
        + state.params.phi.powi(k as i32) * state.last_residual)
}

/// Initialize from the window and replay it, returning the trained state and
/// the in-sample sum of squared one-step errors.
pub fn fit_and_replay(window: &FitWindow, params: SmoothingParams) -> Result<(ForecastState, f64)> {
    let mut state = init_state_with(window, params)?;
    state.t = window.start_hour;
    let mut sse = 0.0;
    for &x in window.history() {
        let p24 = state.phase24(0);
        let p168 = state.phase168(0);
        let predicted =
            state.level + state.daily[p24] + state.weekly[p168] + state.params.phi * state.last_residual;
        let e = x - predicted;
        sse += e * e;
        state.level += state.params.level * e;
        state.daily[p24] += state.params.daily * e;
        state.weekly[p168] += state.params.weekly * e;
        state.last_residual = e;
        state.t += 1;
    }
    Ok((state, sse))
}

/// Result of a daily refit.
#[derive(Debug, Clone)]
pub struct RefitOutcome {
    pub state: ForecastState,
    pub params: SmoothingParams,
    pub sse: f64,
    /// False when the search exhausted its evaluation budget without the
    /// simplex collapsing; the best-found parameters are still returned.
    pub converged: bool,
}

const MULTISTARTS: [SmoothingParams; 5] = [
    SmoothingParams { level: 0.05, daily: 0.05, weekly: 0.02, phi: 0.0 },
    SmoothingParams { level: 0.2, daily: 0.1, weekly: 0.05, phi: 0.3 },
    SmoothingParams { level: 0.4, daily: 0.2, weekly: 0.1, phi: 0.6 },
    SmoothingParams { level: 0.1, daily: 0.3, weekly: 0.15, phi: 0.9 },
    SmoothingParams { level: 0.5, daily: 0.05, weekly: 0.02, phi: 0.1 },
];

/// Re-optimize the smoothing parameters on the trailing window, starting the
/// search from the previous parameters plus a fixed multistart set, and
/// return the state re-run over the window with the best parameters found.
///
/// The previous parameters are always among the evaluated points, so the
/// refit SSE never exceeds theirs.
pub fn refit_daily(window: &FitWindow, prev: &ForecastState) -> Result<RefitOutcome> {
    refit_daily_from(window, prev.params)
}

pub fn refit_daily_from(window: &FitWindow, prev_params: SmoothingParams) -> Result<RefitOutcome> {
    let bounds = [
        Bounds { lo: 0.0, hi: 1.0 },
        Bounds { lo: 0.0, hi: 1.0 },
        Bounds { lo: 0.0, hi: 1.0 },
        Bounds { lo: 0.0, hi: 0.99 },
    ];
    let objective = |x: &[f64]| -> f64 {
        let p = SmoothingParams {
            level: x[0],
            daily: x[1],
            weekly: x[2],
            phi: x[3],
        };
        match fit_and_replay(window, p) {
            Ok((_, sse)) => sse,
            Err(_) => f64::INFINITY,
        }
    };

    let starts: Vec<SmoothingParams> = std::iter::once(prev_params)
        .chain(MULTISTARTS.iter().copied())
        .collect();
    let per_start = MAX_REFIT_EVALS / starts.len();

    let mut best_x = [
        prev_params.level,
        prev_params.daily,
        prev_params.weekly,
        prev_params.phi,
    ]
    .to_vec();
    let mut best_v = f64::INFINITY;
    let mut all_converged = true;
    for start in starts {
        let nm = NelderMead::new(&bounds, per_start, 1e-10);
        let mut f = objective;
        let r = nm.minimize(&mut f, &[start.level, start.daily, start.weekly, start.phi]);
        if r.value < best_v {
            best_v = r.value;
            best_x = r.x;
        }
        all_converged &= r.converged;
    }

    let params = SmoothingParams {
        level: best_x[0],
        daily: best_x[1],
        weekly: best_x[2],
        phi: best_x[3].min(0.99),
    };
    let (state, sse) = fit_and_replay(window, params)?;
    Ok(RefitOutcome {
        state,
        params,
        sse,
        converged: all_converged,
    })
}

/// Mean absolute percentage error. Every actual value must be positive.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(PcpError::Alignment(format!(
            "actual ({}) and predicted ({}) must be equal-length and non-empty",
            actual.len(),
            predicted.len()
        )));
    }
    let mut acc = 0.0;
    for (&a, &p) in actual.iter().zip(predicted) {
        if !(a > 0.0) {
            return Err(PcpError::Domain(format!(
                "mape undefined for non-positive actual value {a}"
            )));
        }
        acc += (a - p).abs() / a;
    }
    Ok(acc / actual.len() as f64)
}

/// How `rolling_forecast` chooses parameters over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// One refit on the first window; parameters frozen afterwards.
    Fixed,
    /// Refit on the trailing window at every day boundary.
    Dynamic,
}

/// Lead-k evaluation harness over an hourly aggregate load series.
///
/// The forecaster trains on the first [`REFIT_WINDOW`] hours, then streams
/// the rest: before consuming the observation at hour `t` it records the
/// lead-k prediction for hour `t + k - 1`. Returns `(hour, actual,
/// predicted)` for every hour with both values available.
pub fn rolling_forecast(
    loads: &[f64],
    lead: usize,
    mode: FitMode,
) -> Result<Vec<(usize, f64, f64)>> {
    if !(1..=36).contains(&lead) {
        return Err(PcpError::Range(format!("lead {lead} outside [1, 36]")));
    }
    if loads.len() < REFIT_WINDOW + lead {
        return Err(PcpError::InsufficientHistory {
            need: REFIT_WINDOW + lead,
            got: loads.len(),
        });
    }
    let first = FitWindow::new(loads[..REFIT_WINDOW].to_vec(), 0)?;
    let initial = refit_daily_from(&first, SmoothingParams::DEFAULT)?;
    let mut state = initial.state;
    let mut predictions: Vec<Option<f64>> = vec![None; loads.len()];
    for (t, &x) in loads.iter().enumerate().skip(REFIT_WINDOW) {
        if mode == FitMode::Dynamic && t % 24 == 0 && t > REFIT_WINDOW {
            let window = FitWindow::new(loads[t - REFIT_WINDOW..t].to_vec(), (t - REFIT_WINDOW) as u64)?;
            state = refit_daily_from(&window, state.params())?.state;
        }
        let target = t + lead - 1;
        if target < loads.len() {
            predictions[target] = Some(forecast(&state, lead)?);
        }
        state = update(&state, x);
    }
    Ok(predictions
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (i, loads[i], p)))
        .collect())
}
