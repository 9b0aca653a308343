//! Price/load ingestion, validation, and synthetic scenario generation.
//!
//! Everything downstream (bidding, settlement, forecasting, simulation)
//! consumes the types defined here. Series are validated on construction:
//! hourly, gap-free, strictly positive prices, non-negative loads.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{PcpError, Result};

/// Smallest real-time price the synthetic generator will emit ($/MWh).
/// Normal noise can cross zero; the market model assumes positive prices.
pub const PRICE_FLOOR: f64 = 0.01;

/// Canonical numeric formatting for CSV output: 6 decimal places.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

const TS_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    TS_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn fmt_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M").to_string()
}

/// Aligned day-ahead / real-time price vectors on a gap-free hourly axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPriceSeries {
    timestamps: Vec<NaiveDateTime>,
    day_ahead: Vec<f64>,
    real_time: Vec<f64>,
}

impl HourlyPriceSeries {
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        day_ahead: Vec<f64>,
        real_time: Vec<f64>,
    ) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(PcpError::Validation("empty price series".into()));
        }
        if day_ahead.len() != timestamps.len() || real_time.len() != timestamps.len() {
            return Err(PcpError::Alignment(format!(
                "price vectors ({}, {}) do not match timestamp count {}",
                day_ahead.len(),
                real_time.len(),
                timestamps.len()
            )));
        }
        let mut missing = Vec::new();
        for w in timestamps.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                return Err(PcpError::Validation(format!(
                    "timestamps not strictly increasing at {}",
                    fmt_timestamp(b)
                )));
            }
            let mut t = a + Duration::hours(1);
            while t < b {
                if missing.len() < 48 {
                    missing.push(fmt_timestamp(t));
                }
                t += Duration::hours(1);
            }
        }
        if !missing.is_empty() {
            return Err(PcpError::Gap { missing });
        }
        for (i, (&pd, &pr)) in day_ahead.iter().zip(&real_time).enumerate() {
            if !(pd > 0.0) || !(pr > 0.0) {
                return Err(PcpError::Validation(format!(
                    "non-positive price at {} (day_ahead={pd}, real_time={pr})",
                    fmt_timestamp(timestamps[i])
                )));
            }
        }
        Ok(Self {
            timestamps,
            day_ahead,
            real_time,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn day_ahead(&self) -> &[f64] {
        &self.day_ahead
    }

    pub fn real_time(&self) -> &[f64] {
        &self.real_time
    }
}

/// One consumer's hourly energy use, aligned to a price series.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub consumer_id: String,
    loads: Vec<f64>,
}

impl LoadProfile {
    pub fn new(consumer_id: impl Into<String>, loads: Vec<f64>) -> Result<Self> {
        let consumer_id = consumer_id.into();
        if let Some(&bad) = loads.iter().find(|&&l| !(l >= 0.0)) {
            return Err(PcpError::Validation(format!(
                "negative load {bad} for consumer {consumer_id}"
            )));
        }
        Ok(Self { consumer_id, loads })
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }
}

/// Price inputs for a simulation scenario: either CSV paths or a synthetic
/// model (diurnal day-ahead template plus normal real-time noise).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSource {
    pub prices_csv: Option<String>,
    pub loads_csv: Option<String>,
    #[serde(default = "default_mean_da")]
    pub mean_da: f64,
    #[serde(default = "default_rt_sigma")]
    pub rt_sigma: f64,
}

fn default_mean_da() -> f64 {
    30.0
}
fn default_rt_sigma() -> f64 {
    5.0
}

impl Default for PriceSource {
    fn default() -> Self {
        Self {
            prices_csv: None,
            loads_csv: None,
            mean_da: default_mean_da(),
            rt_sigma: default_rt_sigma(),
        }
    }
}

/// Full scenario description for `simulate`. CLI flags override file values.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_consumers")]
    pub num_consumers: usize,
    #[serde(default = "default_horizon")]
    pub horizon_hours: usize,
    #[serde(default = "default_rounds")]
    pub num_rounds: usize,
    #[serde(default = "default_mape_low")]
    pub mape_low: f64,
    #[serde(default = "default_mape_high")]
    pub mape_high: f64,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_balance_tol")]
    pub balance_tolerance: f64,
    #[serde(default)]
    pub data: PriceSource,
}

fn default_consumers() -> usize {
    100
}
fn default_horizon() -> usize {
    3600
}
fn default_rounds() -> usize {
    50
}
fn default_mape_low() -> f64 {
    0.02
}
fn default_mape_high() -> f64 {
    0.20
}
fn default_seed() -> u64 {
    42
}
fn default_balance_tol() -> f64 {
    1e-9
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config populates defaults")
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(s).map_err(|e| PcpError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_consumers == 0 {
            return Err(PcpError::Validation("num_consumers must be >= 1".into()));
        }
        if self.num_rounds == 0 {
            return Err(PcpError::Validation("num_rounds must be >= 1".into()));
        }
        if !(self.mape_low > 0.0 && self.mape_low <= self.mape_high && self.mape_high < 1.0) {
            return Err(PcpError::Validation(format!(
                "mape range must satisfy 0 < low <= high < 1, got ({}, {})",
                self.mape_low, self.mape_high
            )));
        }
        if self.horizon_hours < 168 {
            return Err(PcpError::Validation(
                "horizon_hours must cover at least one weekly season (168)".into(),
            ));
        }
        if self.horizon_hours % 24 != 0 {
            return Err(PcpError::Validation(
                "horizon_hours must be a whole number of days".into(),
            ));
        }
        if !(self.balance_tolerance > 0.0) {
            return Err(PcpError::Validation(
                "balance_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PcpError::io(path.display().to_string(), e))
}

/// Parse a `timestamp,day_ahead,real_time` CSV into a validated series.
/// Rows are sorted by timestamp before gap checking.
pub fn load_price_csv(path: &Path) -> Result<HourlyPriceSeries> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PcpError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim() != "timestamp,day_ahead,real_time" {
        return Err(PcpError::Parse {
            line: 1,
            msg: format!("expected header `timestamp,day_ahead,real_time`, got `{header}`"),
        });
    }
    let mut rows: Vec<(NaiveDateTime, f64, f64)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (ts, pd, pr) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(PcpError::Parse {
                    line: lineno,
                    msg: "expected 3 comma-separated fields".into(),
                })
            }
        };
        let ts = parse_timestamp(ts).ok_or_else(|| PcpError::Parse {
            line: lineno,
            msg: format!("bad timestamp `{ts}`"),
        })?;
        let pd: f64 = pd.trim().parse().map_err(|_| PcpError::Parse {
            line: lineno,
            msg: format!("bad day_ahead `{pd}`"),
        })?;
        let pr: f64 = pr.trim().parse().map_err(|_| PcpError::Parse {
            line: lineno,
            msg: format!("bad real_time `{pr}`"),
        })?;
        if !(pd > 0.0) || !(pr > 0.0) {
            return Err(PcpError::Validation(format!(
                "non-positive price at line {lineno}"
            )));
        }
        rows.push((ts, pd, pr));
    }
    rows.sort_by_key(|r| r.0);
    let timestamps = rows.iter().map(|r| r.0).collect();
    let day_ahead = rows.iter().map(|r| r.1).collect();
    let real_time = rows.iter().map(|r| r.2).collect();
    HourlyPriceSeries::new(timestamps, day_ahead, real_time)
}

/// Render a series in canonical form (sorted, 6-decimal prices).
pub fn price_csv_string(series: &HourlyPriceSeries) -> String {
    let mut out = String::from("timestamp,day_ahead,real_time\n");
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_timestamp(series.timestamps()[i]),
            fmt_num(series.day_ahead()[i]),
            fmt_num(series.real_time()[i]),
        );
    }
    out
}

pub fn write_price_csv(series: &HourlyPriceSeries, path: &Path) -> Result<()> {
    write_atomic(path, price_csv_string(series).as_bytes())
}

/// Long-format loads CSV: `timestamp,consumer_id,load_mwh`, one row per
/// consumer-hour. Profiles come back in first-appearance order, each aligned
/// to `prices.timestamps()`.
pub fn load_profiles_csv(path: &Path, prices: &HourlyPriceSeries) -> Result<Vec<LoadProfile>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PcpError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim() != "timestamp,consumer_id,load_mwh" {
        return Err(PcpError::Parse {
            line: 1,
            msg: format!("expected header `timestamp,consumer_id,load_mwh`, got `{header}`"),
        });
    }
    let index: std::collections::HashMap<NaiveDateTime, usize> = prices
        .timestamps()
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();
    let mut order: Vec<String> = Vec::new();
    let mut data: std::collections::HashMap<String, Vec<Option<f64>>> =
        std::collections::HashMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (ts, id, load) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b.trim(), c),
            _ => {
                return Err(PcpError::Parse {
                    line: lineno,
                    msg: "expected 3 comma-separated fields".into(),
                })
            }
        };
        let ts = parse_timestamp(ts).ok_or_else(|| PcpError::Parse {
            line: lineno,
            msg: format!("bad timestamp `{ts}`"),
        })?;
        let load: f64 = load.trim().parse().map_err(|_| PcpError::Parse {
            line: lineno,
            msg: format!("bad load `{load}`"),
        })?;
        if !(load >= 0.0) {
            return Err(PcpError::Validation(format!(
                "negative load at line {lineno} for consumer {id}"
            )));
        }
        let &hour = index.get(&ts).ok_or_else(|| {
            PcpError::Alignment(format!(
                "line {lineno}: timestamp {} not present in price series",
                fmt_timestamp(ts)
            ))
        })?;
        let slot = data.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            vec![None; prices.len()]
        });
        if slot[hour].is_some() {
            return Err(PcpError::Validation(format!(
                "duplicate row for consumer {id} at {}",
                fmt_timestamp(ts)
            )));
        }
        slot[hour] = Some(load);
    }
    let mut profiles = Vec::with_capacity(order.len());
    for id in order {
        let slots = &data[&id];
        let mut loads = Vec::with_capacity(slots.len());
        for (i, s) in slots.iter().enumerate() {
            match s {
                Some(l) => loads.push(*l),
                None => {
                    return Err(PcpError::Alignment(format!(
                        "consumer {id} missing hour {}",
                        fmt_timestamp(prices.timestamps()[i])
                    )))
                }
            }
        }
        profiles.push(LoadProfile::new(id, loads)?);
    }
    if profiles.is_empty() {
        return Err(PcpError::Validation("loads file has no data rows".into()));
    }
    Ok(profiles)
}

pub fn profiles_csv_string(profiles: &[LoadProfile], timestamps: &[NaiveDateTime]) -> String {
    let mut out = String::from("timestamp,consumer_id,load_mwh\n");
    for p in profiles {
        for (i, &l) in p.loads().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_timestamp(timestamps[i]),
                p.consumer_id,
                fmt_num(l)
            );
        }
    }
    out
}

pub fn write_profiles_csv(
    profiles: &[LoadProfile],
    timestamps: &[NaiveDateTime],
    path: &Path,
) -> Result<()> {
    write_atomic(path, profiles_csv_string(profiles, timestamps).as_bytes())
}

/// Write via a temp file in the same directory plus rename, so a failed run
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp.{}",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    let mut f =
        std::fs::File::create(&tmp).map_err(|e| PcpError::io(tmp.display().to_string(), e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| PcpError::io(tmp.display().to_string(), e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| PcpError::io(path.display().to_string(), e))
}

/// Epoch for synthetic series. Arbitrary but fixed so output is reproducible.
pub fn synth_epoch() -> NaiveDateTime {
    chrono::NaiveDate::from_ymd_opt(2015, 2, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

fn hourly_axis(hours: usize) -> Vec<NaiveDateTime> {
    let t0 = synth_epoch();
    (0..hours as i64).map(|h| t0 + Duration::hours(h)).collect()
}

/// Standard normal via Box-Muller on the given stream.
pub fn normal(rng: &mut impl Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Synthetic prices: day-ahead follows a fixed diurnal template around
/// `mean_da`; real-time adds normal(0, rt_sigma) noise floored at
/// [`PRICE_FLOOR`].
pub fn synth_prices(hours: usize, mean_da: f64, rt_sigma: f64, seed: u64) -> Result<HourlyPriceSeries> {
    if hours == 0 {
        return Err(PcpError::Validation("hours must be >= 1".into()));
    }
    if !(mean_da > 0.0) {
        return Err(PcpError::Validation("mean_da must be positive".into()));
    }
    if !(rt_sigma >= 0.0) {
        return Err(PcpError::Validation("rt_sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut day_ahead = Vec::with_capacity(hours);
    let mut real_time = Vec::with_capacity(hours);
    for h in 0..hours {
        let phase = std::f64::consts::TAU * ((h % 24) as f64 - 9.0) / 24.0;
        let pd = mean_da * (1.0 + 0.3 * phase.sin());
        let pr = (pd + rt_sigma * normal(&mut rng)).max(PRICE_FLOOR);
        day_ahead.push(pd);
        real_time.push(pr);
    }
    HourlyPriceSeries::new(hourly_axis(hours), day_ahead, real_time)
}

/// Shape knobs for synthetic load profiles (fractions of the base level).
#[derive(Debug, Clone, Copy)]
pub struct SynthLoadParams {
    pub base_low: f64,
    pub base_high: f64,
    pub daily_frac: f64,
    pub weekly_frac: f64,
    pub noise_frac: f64,
}

impl Default for SynthLoadParams {
    fn default() -> Self {
        Self {
            base_low: 0.5,
            base_high: 2.0,
            daily_frac: 0.3,
            weekly_frac: 0.15,
            noise_frac: 0.05,
        }
    }
}

/// Base level + daily sinusoid + weekly sinusoid + noise, clamped at zero.
pub fn synth_loads_with(
    num_consumers: usize,
    hours: usize,
    seed: u64,
    params: SynthLoadParams,
) -> Result<Vec<LoadProfile>> {
    if num_consumers == 0 || hours == 0 {
        return Err(PcpError::Validation(
            "num_consumers and hours must be >= 1".into(),
        ));
    }
    let mut profiles = Vec::with_capacity(num_consumers);
    for c in 0..num_consumers {
        // Independent stream per consumer so profiles do not shift when N changes.
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x10ad, c as u64]));
        let base = params.base_low + (params.base_high - params.base_low) * rng.gen::<f64>();
        let daily_phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let weekly_phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let mut loads = Vec::with_capacity(hours);
        for h in 0..hours {
            let t = h as f64;
            let daily = params.daily_frac * (std::f64::consts::TAU * t / 24.0 + daily_phase).sin();
            let weekly =
                params.weekly_frac * (std::f64::consts::TAU * t / 168.0 + weekly_phase).sin();
            let noise = params.noise_frac * normal(&mut rng);
            loads.push((base * (1.0 + daily + weekly + noise)).max(0.0));
        }
        profiles.push(LoadProfile::new(format!("c{c:03}"), loads)?);
    }
    Ok(profiles)
}

pub fn synth_loads(num_consumers: usize, hours: usize, seed: u64) -> Result<Vec<LoadProfile>> {
    synth_loads_with(num_consumers, hours, seed, SynthLoadParams::default())
}

/// Stable seed derivation (splitmix64 over the parts). Used everywhere a
/// child RNG stream is needed so results do not depend on execution order.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}
