//! levyflow: distance-decay diagnostics for dyadic flow data.
//!
//! Exit codes: 0 success, 1 computation error, 2 input/config error.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, FlowEntry, GlobalFlags, Resolved};

/// An error carrying its exit class (2 = input/config, 1 = computation).
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self { message, code: 2 }
    }
    pub fn compute(message: String) -> Self {
        Self { message, code: 1 }
    }
}

impl From<levyflow_core::Error> for CliError {
    fn from(e: levyflow_core::Error) -> Self {
        Self {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "levyflow",
    version,
    about = "Bin dyadic flows by distance, fit power-law tails, and compare against null scenarios"
)]
struct Cli {
    /// Declarative run configuration (TOML); flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Canonical country list (one code per line).
    #[arg(long, global = true, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Historical-code remap CSV (`historical,canonical`).
    #[arg(long, global = true, value_name = "FILE")]
    remap: Option<PathBuf>,
    /// Dense labeled distance matrix CSV in km.
    #[arg(long, global = true, value_name = "FILE")]
    distance: Option<PathBuf>,
    /// Bin width in km [default: 500].
    #[arg(long, global = true)]
    width: Option<f64>,
    /// Short-distance cutoff in km [default: 5000].
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    /// Fit method: nonlinear | loglog [default: nonlinear].
    #[arg(long, global = true)]
    method: Option<String>,
    /// Output directory [default: $LEVYFLOW_OUT or the working directory].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Drop unresolvable country codes (with a warning) instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

/// A single flow input given on the command line instead of in the config.
#[derive(Args, Debug, Default)]
struct FlowArgs {
    /// Flow matrix CSV (dense labeled or `origin,destination,value`).
    #[arg(long, value_name = "FILE")]
    flow: Option<PathBuf>,
    /// Activity type label for --flow [default: flow].
    #[arg(long)]
    activity_type: Option<String>,
    /// Observation year for --flow, or `undated`.
    #[arg(long)]
    year: Option<String>,
    /// Units label for --flow [default: units].
    #[arg(long)]
    units: Option<String>,
    /// Interpret --flow as a 0-5 rank matrix (rank value = weight).
    #[arg(long)]
    rank_weights: bool,
}

impl FlowArgs {
    fn entry(&self) -> Result<Option<FlowEntry>, CliError> {
        let Some(path) = &self.flow else {
            return Ok(None);
        };
        let year = match self.year.as_deref() {
            None | Some("undated") => None,
            Some(s) => Some(s.parse::<i32>().map_err(|_| {
                CliError::input(format!("bad --year {s:?} (expected an integer or `undated`)"))
            })?),
        };
        Ok(Some(FlowEntry {
            activity_type: self.activity_type.clone().unwrap_or_else(|| "flow".into()),
            year,
            path: path.clone(),
            units: self.units.clone().unwrap_or_else(|| "units".into()),
            group: None,
            rank_weights: self.rank_weights,
        }))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bin flow matrices by distance and fit the power-law tail.
    Fit {
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Longitudinal indicators across dated matrices of one activity type.
    Series {
        /// Extrapolate the exponential total trend to these years.
        #[arg(long)]
        extrapolate: Vec<i32>,
        /// World population CSV (`year,pop`) enabling the per-capita column.
        #[arg(long, value_name = "FILE")]
        world_pop: Option<PathBuf>,
    },
    /// Compare the empirical density against geography-is-dead scenarios.
    Scenarios {
        #[command(flatten)]
        flow: FlowArgs,
        /// Skip the uniform-over-distance scenario.
        #[arg(long)]
        skip_flat: bool,
        /// Skip the uniform-over-dyads scenario.
        #[arg(long)]
        skip_dyad: bool,
        /// Enable the population scenario (needs --population-file).
        #[arg(long)]
        population: bool,
        /// Per-country population CSV (`country,pop`).
        #[arg(long, value_name = "FILE")]
        population_file: Option<PathBuf>,
        /// Dyad weighting for the population scenario: origin | product.
        #[arg(long)]
        pop_weight: Option<String>,
    },
    /// Build the THM/THC/THA index matrices from grouped config flows.
    Index {
        /// Mobility index weight in THA [default: 0.6].
        #[arg(long)]
        thm_weight: Option<f64>,
        /// Communication index weight in THA [default: 0.4].
        #[arg(long)]
        thc_weight: Option<f64>,
        /// THC component normalization: sum | max [default: sum].
        #[arg(long)]
        thc_normalization: Option<String>,
    },
    /// Generate a synthetic dataset with a known tail exponent.
    Synth {
        /// Number of countries.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Ground-truth scaling exponent.
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        /// Unit moves to sample.
        #[arg(long, default_value_t = 1_000_000)]
        moves: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of moves pinned to the first distance bin.
        #[arg(long, default_value_t = 0.0)]
        peak_mass: f64,
        /// Minimum random dyad distance in km.
        #[arg(long, default_value_t = 100.0)]
        d_min: f64,
        /// Maximum random dyad distance in km.
        #[arg(long, default_value_t = 20_000.0)]
        d_max: f64,
    },
    /// Kernel-smoothed displacement density (robustness check).
    Smooth {
        #[command(flatten)]
        flow: FlowArgs,
        /// Bandwidth in km [default: rule-of-thumb estimate].
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Local polynomial degree, 0..=2 [default: 0].
        #[arg(long, default_value_t = 0)]
        degree: usize,
        /// Number of evaluation grid points [default: 200].
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
}

fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = GlobalFlags {
        registry: cli.registry.clone(),
        remap: cli.remap.clone(),
        distance: cli.distance.clone(),
        width: cli.width,
        cutoff: cli.cutoff,
        method: cli.method.clone(),
        out: cli.out.clone(),
        lenient: cli.lenient,
    };
    Resolved::merge(flags, file)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Fit { flow } => run::cmd_fit(&cfg, flow.entry()?),
        Command::Series {
            extrapolate,
            world_pop,
        } => run::cmd_series(&cfg, &extrapolate, world_pop.as_deref()),
        Command::Scenarios {
            flow,
            skip_flat,
            skip_dyad,
            population,
            population_file,
            pop_weight,
        } => {
            let mut cfg = cfg;
            if let Some(w) = pop_weight {
                cfg.scenarios.pop_weight = Some(w);
            }
            let toggles = run::ScenarioToggles {
                flat: !skip_flat && cfg.scenarios.flat.unwrap_or(true),
                dyad: !skip_dyad && cfg.scenarios.dyad.unwrap_or(true),
                population: population || cfg.scenarios.population.unwrap_or(false),
                population_file: population_file.or_else(|| cfg.scenarios.population_file.clone()),
            };
            run::cmd_scenarios(&cfg, flow.entry()?, toggles)
        }
        Command::Index {
            thm_weight,
            thc_weight,
            thc_normalization,
        } => {
            let mut cfg = cfg;
            if thm_weight.is_some() {
                cfg.index.thm_weight = thm_weight;
            }
            if thc_weight.is_some() {
                cfg.index.thc_weight = thc_weight;
            }
            if thc_normalization.is_some() {
                cfg.index.thc_normalization = thc_normalization;
            }
            run::cmd_index(&cfg)
        }
        Command::Synth {
            n,
            beta,
            moves,
            seed,
            peak_mass,
            d_min,
            d_max,
        } => run::cmd_synth(
            &cfg,
            run::SynthArgsResolved {
                n,
                beta,
                moves,
                seed,
                peak_mass,
                d_min,
                d_max,
            },
        ),
        Command::Smooth {
            flow,
            bandwidth,
            degree,
            grid_points,
        } => run::cmd_smooth(&cfg, flow.entry()?, bandwidth, degree, grid_points),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
