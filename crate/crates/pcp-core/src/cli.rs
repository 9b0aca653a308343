//! Command-line entry point: `synth`, `settle`, `forecast`, `simulate`, and
//! `analyze` subcommands.
//!
//! All outputs are CSV written atomically (temp file + rename); every
//! subcommand is reproducible from its flags/config and seed alone. Exit
//! codes: 0 success, 1 validation/usage errors, 2 data errors (gaps,
//! misalignment, missing history, I/O).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{
    biased_coop_mc, dominant_strategy_check, expected_price_mc, price_deviation_sweep,
    PopulationSpec, SweepSpec,
};
use crate::error::{PcpError, Result};
use crate::forecast::{self, FitMode};
use crate::market_data::{self, fmt_num, write_atomic, HourlyPriceSeries, ScenarioConfig};
use crate::settlement::{settle, HourOutcome, DEVIATION_TOL};
use crate::simulation::run_scenario_collect;

#[derive(Parser)]
#[command(
    name = "pcp",
    version,
    about = "Predictive-cooperative electricity market toolkit"
)]
struct Cli {
    /// Print extra detail (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic hourly prices and consumer load profiles.
    Synth {
        /// Number of consumers.
        #[arg(long, default_value_t = 4)]
        consumers: usize,
        /// Number of hours.
        #[arg(long, default_value_t = 336)]
        hours: usize,
        /// RNG seed; all randomness derives from it.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Mean day-ahead price ($/MWh).
        #[arg(long, default_value_t = 30.0)]
        mean_da: f64,
        /// Real-time price noise standard deviation ($/MWh).
        #[arg(long, default_value_t = 5.0)]
        rt_sigma: f64,
        /// Output directory for prices.csv and loads.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Settle a single hour from a scenario file and print the payment table.
    Settle {
        /// TOML scenario: effective, realtime, day_ahead, real_time.
        scenario: PathBuf,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the aggregate-load forecaster on a loads CSV.
    Forecast {
        /// Loads CSV (timestamp,consumer_id,load_mwh); consumers are summed.
        loads: PathBuf,
        /// Forecast lead in hours.
        #[arg(long, default_value_t = 24)]
        lead: usize,
        /// Parameter fitting mode.
        #[arg(long, value_enum, default_value_t = ModeArg::Dynamic)]
        mode: ModeArg,
        /// Output CSV (timestamp,actual,predicted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the multi-round cooperative-vs-RTP simulation.
    Simulate {
        /// TOML scenario config; flags override file values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for summary.csv and confidence.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        consumers: Option<usize>,
        /// Horizon in hours (whole days, >= 168).
        #[arg(long)]
        hours: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mape_low: Option<f64>,
        #[arg(long)]
        mape_high: Option<f64>,
        /// Prices CSV instead of synthetic prices.
        #[arg(long)]
        prices: Option<PathBuf>,
        /// Loads CSV instead of synthetic profiles.
        #[arg(long)]
        loads: Option<PathBuf>,
        /// Also write raw relative prices to samples.csv.gz.
        #[arg(long)]
        samples: bool,
    },
    /// Incentive analysis: deterministic sweeps and Monte Carlo checks.
    Analyze {
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory for the mode's CSV.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Dynamic,
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzeMode {
    Sweep,
    Truthful,
    Biased,
    Dominant,
}

/// Parse arguments, dispatch, and translate errors to exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &PcpError) -> i32 {
    match e {
        PcpError::Validation(_)
        | PcpError::Parse { .. }
        | PcpError::Range(_)
        | PcpError::Domain(_) => 1,
        PcpError::Gap { .. }
        | PcpError::Alignment(_)
        | PcpError::InsufficientHistory { .. }
        | PcpError::Internal(_)
        | PcpError::Io { .. } => 2,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            consumers,
            hours,
            seed,
            mean_da,
            rt_sigma,
            out,
        } => cmd_synth(consumers, hours, seed, mean_da, rt_sigma, &out),
        Command::Settle { scenario, out } => cmd_settle(&scenario, out.as_deref(), cli.verbose),
        Command::Forecast {
            loads,
            lead,
            mode,
            out,
        } => cmd_forecast(&loads, lead, mode, out.as_deref()),
        Command::Simulate {
            config,
            out,
            consumers,
            hours,
            rounds,
            seed,
            mape_low,
            mape_high,
            prices,
            loads,
            samples,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| PcpError::io(path.display().to_string(), e))?;
                    ScenarioConfig::from_toml_str(&text)?
                }
                None => ScenarioConfig::default(),
            };
            if let Some(v) = consumers {
                cfg.num_consumers = v;
            }
            if let Some(v) = hours {
                cfg.horizon_hours = v;
            }
            if let Some(v) = rounds {
                cfg.num_rounds = v;
            }
            if let Some(v) = seed {
                cfg.rng_seed = v;
            }
            if let Some(v) = mape_low {
                cfg.mape_low = v;
            }
            if let Some(v) = mape_high {
                cfg.mape_high = v;
            }
            if let Some(p) = prices {
                cfg.data.prices_csv = Some(p.display().to_string());
            }
            if let Some(p) = loads {
                cfg.data.loads_csv = Some(p.display().to_string());
            }
            cmd_simulate(&cfg, &out, samples)
        }
        Command::Analyze {
            mode,
            draws,
            seed,
            out,
        } => cmd_analyze(mode, draws, seed, &out),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| PcpError::io(dir.display().to_string(), e))
}

fn cmd_synth(
    consumers: usize,
    hours: usize,
    seed: u64,
    mean_da: f64,
    rt_sigma: f64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let prices = market_data::synth_prices(
        hours,
        mean_da,
        rt_sigma,
        market_data::mix_seed(seed, &[0x9106e5]),
    )?;
    let profiles =
        market_data::synth_loads(consumers, hours, market_data::mix_seed(seed, &[0x10ad5]))?;
    market_data::write_price_csv(&prices, &out.join("prices.csv"))?;
    market_data::write_profiles_csv(&profiles, prices.timestamps(), &out.join("loads.csv"))?;
    println!(
        "wrote prices.csv and loads.csv ({consumers} consumers, {hours} hours, seed {seed}) to {}",
        out.display()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettleScenario {
    effective: Vec<f64>,
    realtime: Vec<f64>,
    day_ahead: f64,
    real_time: f64,
    #[serde(default)]
    consumer_ids: Option<Vec<String>>,
}

fn cmd_settle(scenario: &Path, out: Option<&Path>, verbose: u8) -> Result<()> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| PcpError::io(scenario.display().to_string(), e))?;
    let sc: SettleScenario =
        toml::from_str(&text).map_err(|e| PcpError::Validation(format!("scenario: {e}")))?;
    let n = sc.effective.len();
    let ids: Vec<String> = match sc.consumer_ids {
        Some(ids) if ids.len() == n => ids,
        Some(ids) => {
            return Err(PcpError::Alignment(format!(
                "consumer_ids has {} entries for {} consumers",
                ids.len(),
                n
            )))
        }
        None => (0..n).map(|i| format!("c{i:03}")).collect(),
    };
    let outcome = HourOutcome::new(sc.effective, sc.realtime, sc.day_ahead, sc.real_time)?;
    let s = settle(&outcome, DEVIATION_TOL)?;

    let mut csv = String::from("consumer_id,case,l_e,l_r,payment\n");
    for i in 0..n {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.2}",
            ids[i],
            s.case_labels[i],
            fmt_num(outcome.effective()[i]),
            fmt_num(outcome.realtime()[i]),
            s.individual[i],
        );
    }
    print!("{csv}");
    println!("total {:.2}", s.total_payment);
    if verbose > 0 {
        println!(
            "aggregate deviation {:.6}, contributors {:?}",
            s.aggregate_deviation, s.contributor_set
        );
    }
    if let Some(path) = out {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(())
}

/// Read a standalone loads CSV: derive the hourly axis from the file itself,
/// then reuse the aligned-profile loader for validation.
fn read_standalone_loads(
    path: &Path,
) -> Result<(Vec<chrono::NaiveDateTime>, Vec<market_data::LoadProfile>)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| PcpError::io(path.display().to_string(), e))?;
    let mut stamps: Vec<chrono::NaiveDateTime> = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(ts) = line.split(',').next().and_then(market_data::parse_timestamp) {
            stamps.push(ts);
        }
    }
    stamps.sort_unstable();
    stamps.dedup();
    if stamps.is_empty() {
        return Err(PcpError::Validation("loads file has no data rows".into()));
    }
    // Unit prices give a validated gap-free axis to align against.
    let axis = HourlyPriceSeries::new(stamps.clone(), vec![1.0; stamps.len()], vec![1.0; stamps.len()])?;
    let profiles = market_data::load_profiles_csv(path, &axis)?;
    Ok((stamps, profiles))
}

fn cmd_forecast(loads: &Path, lead: usize, mode: ModeArg, out: Option<&Path>) -> Result<()> {
    let (stamps, profiles) = read_standalone_loads(loads)?;
    let aggregate: Vec<f64> = (0..stamps.len())
        .map(|h| profiles.iter().map(|p| p.loads()[h]).sum())
        .collect();
    let fit_mode = match mode {
        ModeArg::Dynamic => FitMode::Dynamic,
        ModeArg::Fixed => FitMode::Fixed,
    };
    let results = forecast::rolling_forecast(&aggregate, lead, fit_mode)?;
    let actual: Vec<f64> = results.iter().map(|r| r.1).collect();
    let predicted: Vec<f64> = results.iter().map(|r| r.2).collect();
    let mape = forecast::mape(&actual, &predicted)?;

    let mut csv = String::from("timestamp,actual,predicted\n");
    for &(hour, actual, predicted) in &results {
        let _ = writeln!(
            csv,
            "{},{},{}",
            market_data::fmt_timestamp(stamps[hour]),
            fmt_num(actual),
            fmt_num(predicted),
        );
    }
    if let Some(path) = out {
        write_atomic(path, csv.as_bytes())?;
    }
    let mode_name = match mode {
        ModeArg::Dynamic => "dynamic",
        ModeArg::Fixed => "fixed",
    };
    println!(
        "mape {mape:.4} (lead {lead}, {mode_name}, {} evaluated hours)",
        results.len()
    );
    Ok(())
}

fn cmd_simulate(cfg: &ScenarioConfig, out: &Path, samples: bool) -> Result<()> {
    ensure_dir(out)?;
    let report = run_scenario_collect(cfg, samples)?;
    write_atomic(&out.join("summary.csv"), report.summary_csv().as_bytes())?;
    write_atomic(&out.join("confidence.csv"), report.confidence_csv().as_bytes())?;
    if let Some(csv) = report.samples_csv() {
        let mut enc =
            flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(csv.as_bytes())
            .and_then(|_| enc.finish())
            .map_err(|e| PcpError::io("samples.csv.gz", e))
            .and_then(|bytes| write_atomic(&out.join("samples.csv.gz"), &bytes))?;
    }
    let medians: Vec<String> = (0..report.num_buckets)
        .map(|b| format!("{:.3}/{:.3}", report.pcp[b].median(), report.rtp[b].median()))
        .collect();
    println!(
        "{} buckets, {} rounds x {} h, forecast mape {:.4}, median pcp/rtp: {}",
        report.num_buckets,
        cfg.num_rounds,
        cfg.horizon_hours,
        report.forecast_mape,
        medians.join(" "),
    );
    Ok(())
}

fn cmd_analyze(mode: AnalyzeMode, draws: usize, seed: u64, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    match mode {
        AnalyzeMode::Sweep => {
            let spec = SweepSpec::figure_defaults();
            let curves = price_deviation_sweep(&spec)?;
            let mut csv = String::from("counterparty_deviation,rpd,x,value\n");
            let mut kept = 0usize;
            for c in &curves {
                for p in &c.points {
                    if let Some(rel) = p.relative_price {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{}",
                            fmt_num(c.counterparty_deviation),
                            fmt_num(c.rpd),
                            fmt_num(p.delta),
                            fmt_num(rel)
                        );
                        kept += 1;
                    }
                }
            }
            write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
            println!("sweep: {} curves, {kept} points -> sweep.csv", curves.len());
        }
        AnalyzeMode::Truthful => {
            let pop = PopulationSpec::default();
            let grid: Vec<f64> = (-10..=10)
                .map(|i| pop.mean_load * 0.02 * i as f64)
                .collect();
            let points = expected_price_mc(&grid, &pop, draws, seed)?;
            let mut csv = String::from("x,value,stderr\n");
            for p in &points {
                let _ = writeln!(csv, "{},{},{}", fmt_num(p.x), p.mean, p.stderr);
            }
            write_atomic(&out.join("truthful.csv"), csv.as_bytes())?;
            let argmin = points
                .iter()
                .min_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap())
                .expect("non-empty grid");
            println!(
                "truthful: argmin at bias {} (value {:.6}) -> truthful.csv",
                fmt_num(argmin.x),
                argmin.mean
            );
        }
        AnalyzeMode::Biased => {
            let pop = PopulationSpec::default();
            let agg: Vec<f64> = vec![-6.0, -3.0, 0.0, 3.0, 6.0];
            let ind: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
            let rows = biased_coop_mc(&agg, &ind, &pop, draws, seed)?;
            let mut csv = String::from("y,x,value,stderr\n");
            for r in &rows {
                for p in &r.points {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        fmt_num(r.aggregate_bias),
                        fmt_num(p.x),
                        p.mean,
                        p.stderr
                    );
                }
            }
            write_atomic(&out.join("biased.csv"), csv.as_bytes())?;
            println!(
                "biased: {} aggregate-bias rows x {} deviations -> biased.csv",
                rows.len(),
                ind.len()
            );
        }
        AnalyzeMode::Dominant => {
            let pop = PopulationSpec::default();
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let points = dominant_strategy_check(&grid, 20.0, 0.5, &pop, draws, seed)?;
            let mut csv = String::from("x,value,stderr\n");
            for p in &points {
                let _ = writeln!(csv, "{},{},{}", fmt_num(p.x), p.mean, p.stderr);
            }
            write_atomic(&out.join("dominant.csv"), csv.as_bytes())?;
            println!(
                "dominant: rho 0 -> {:.6}, rho 1 -> {:.6} -> dominant.csv",
                points.first().expect("non-empty").mean,
                points.last().expect("non-empty").mean
            );
        }
    }
    Ok(())
}
