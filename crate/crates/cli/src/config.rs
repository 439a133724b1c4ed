//! Run configuration: a declarative TOML file plus flag overrides, flags
//! winning. The resolved struct is the single source of truth a command
//! executes against.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use levyflow_core::{FitMethod, Normalization, PopWeight, StrictMode, Year};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_WIDTH_KM: f64 = 500.0;
pub const DEFAULT_CUTOFF_KM: f64 = 5_000.0;
pub const OUT_DIR_ENV: &str = "LEVYFLOW_OUT";

/// One flow input: where it lives and what it measures.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub activity_type: String,
    /// Observation year; omit for undated sources.
    pub year: Option<i32>,
    pub path: PathBuf,
    pub units: String,
    /// Index membership: "thm" (mobility) or "thc" (communication).
    pub group: Option<String>,
    /// Interpret the matrix as 0–5 ordinal ranks.
    #[serde(default)]
    pub rank_weights: bool,
}

impl FlowEntry {
    pub fn year_value(&self) -> Year {
        match self.year {
            Some(y) => Year::Dated(y),
            None => Year::Undated,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub thm_weight: Option<f64>,
    pub thc_weight: Option<f64>,
    pub thc_normalization: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub flat: Option<bool>,
    pub dyad: Option<bool>,
    pub population: Option<bool>,
    pub population_file: Option<PathBuf>,
    pub pop_weight: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    /// `year,pop` CSV enabling the per-capita column.
    pub world_pop: Option<PathBuf>,
    /// Years to extrapolate the exponential trend to.
    pub extrapolate: Option<Vec<i32>>,
}

/// The TOML file schema. Every field is optional; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub registry: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub distance: Option<PathBuf>,
    pub width: Option<f64>,
    pub cutoff: Option<f64>,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
    pub lenient: Option<bool>,
    #[serde(default)]
    pub flows: Vec<FlowEntry>,
    pub index: Option<IndexSection>,
    pub scenarios: Option<ScenarioSection>,
    pub series: Option<SeriesSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }
}

/// Global flag values as parsed from the command line.
#[derive(Debug, Default)]
pub struct GlobalFlags {
    pub registry: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub distance: Option<PathBuf>,
    pub width: Option<f64>,
    pub cutoff: Option<f64>,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
    pub lenient: bool,
}

/// The merged, validated run configuration.
#[derive(Debug)]
pub struct Resolved {
    pub registry: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub distance: Option<PathBuf>,
    pub width: f64,
    pub cutoff: f64,
    pub method: FitMethod,
    pub out: PathBuf,
    pub mode: StrictMode,
    pub flows: Vec<FlowEntry>,
    pub index: IndexSection,
    pub scenarios: ScenarioSection,
    pub series: SeriesSection,
}

impl Resolved {
    pub fn merge(flags: GlobalFlags, file: FileConfig) -> Result<Self, CliError> {
        let width = flags.width.or(file.width).unwrap_or(DEFAULT_WIDTH_KM);
        if !(width > 0.0) {
            return Err(CliError::input(format!(
                "bin width must be positive, got {width}"
            )));
        }
        let cutoff = flags.cutoff.or(file.cutoff).unwrap_or(DEFAULT_CUTOFF_KM);
        if !(cutoff > 0.0) {
            return Err(CliError::input(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        let method = match flags.method.or(file.method) {
            Some(s) => FitMethod::from_str(&s).map_err(CliError::from)?,
            None => FitMethod::NonlinearLs,
        };
        let out = flags
            .out
            .or(file.out)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let mode = if flags.lenient || file.lenient.unwrap_or(false) {
            StrictMode::Lenient
        } else {
            StrictMode::Strict
        };
        let index = file.index.unwrap_or(IndexSection {
            thm_weight: None,
            thc_weight: None,
            thc_normalization: None,
        });
        Ok(Self {
            registry: flags.registry.or(file.registry),
            remap: flags.remap.or(file.remap),
            distance: flags.distance.or(file.distance),
            width,
            cutoff,
            method,
            out,
            mode,
            flows: file.flows,
            index,
            scenarios: file.scenarios.unwrap_or_default(),
            series: file.series.unwrap_or_default(),
        })
    }

    pub fn registry_path(&self) -> Result<&Path, CliError> {
        self.registry
            .as_deref()
            .ok_or_else(|| CliError::input("no registry given (--registry or config)".into()))
    }

    /// The distance matrix path, with the existence check surfaced as the
    /// canonical "not found" message.
    pub fn distance_path(&self) -> Result<&Path, CliError> {
        let path = self
            .distance
            .as_deref()
            .ok_or_else(|| CliError::input("no distance matrix given (--distance or config)".into()))?;
        if !path.exists() {
            return Err(CliError::input(format!(
                "distance matrix not found: {}",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn index_weights(&self) -> Result<(f64, f64), CliError> {
        let w_m = self.index.thm_weight.unwrap_or(0.6);
        let w_c = self.index.thc_weight.unwrap_or(0.4);
        if !(w_m > 0.0) || !(w_c > 0.0) {
            return Err(CliError::input(format!(
                "index weights must be positive, got ({w_m}, {w_c})"
            )));
        }
        Ok((w_m, w_c))
    }

    pub fn thc_normalization(&self) -> Result<Normalization, CliError> {
        match self.index.thc_normalization.as_deref() {
            None => Ok(Normalization::SumToOne),
            Some(s) => Normalization::from_str(s).map_err(CliError::from),
        }
    }

    pub fn pop_weight(&self) -> Result<PopWeight, CliError> {
        match self.scenarios.pop_weight.as_deref() {
            None => Ok(PopWeight::Origin),
            Some(s) => PopWeight::from_str(s).map_err(CliError::from),
        }
    }
}
