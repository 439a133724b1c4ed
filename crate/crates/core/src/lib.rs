//! Diagnostics for the spatial structure of dyadic (country-to-country) flow
//! data: does activity fall off with distance like a heavy power-law tail?
//!
//! The pipeline: standardize flow and distance matrices onto one canonical
//! country set ([`flow`]), pool flows into fixed-width distance bins and
//! extract the tail right of the peak ([`density`]), fit `a·x^(−β)` by
//! nonlinear least squares with a log-log cross-check ([`fit`]), and compare
//! against kernel-smoothed estimates ([`smooth`]), multiplex indices
//! ([`indices`]), geography-is-dead null models ([`scenarios`]), and
//! longitudinal indicator series ([`longitudinal`]). [`synth`] generates
//! datasets with a planted exponent to validate the whole chain.

pub mod density;
pub mod error;
pub mod fit;
pub mod flow;
pub mod indices;
pub mod longitudinal;
mod numeric;
pub mod registry;
pub mod scenarios;
pub mod schema;
pub mod smooth;
pub mod synth;

pub use density::{
    bin_flows, extract_tail, short_distance_share, BinnedDensity, TailPoint, TailSegment,
};
pub use error::{Error, Result};
pub use fit::{
    fit_loglog, fit_power_law, fit_power_law_with, fit_with_method, nl_initialize, FitMethod,
    FitOptions, FitReport, PowerLawFit,
};
pub use flow::{
    load_flow_matrix, parse_long, rank_to_weight, standardize, standardize_text,
    standardize_triples, write_distance_csv, write_long_csv, DistanceMatrix, FlowMatrix, FlowMeta,
    RawMatrix, Standardized, StrictMode, Year,
};
pub use indices::{
    build_tha_index, build_thc_index, build_thm_index, IndexProvenance, IndexSpec, Normalization,
};
pub use longitudinal::{
    build_series, fit_exp_trend, fit_exp_trend_years, loglog_trend_lines, ExpTrend,
    ExpTrendReport, SeriesReport, TrendLine, YearRow,
};
pub use numeric::fmt_f64;
pub use registry::CountryRegistry;
pub use scenarios::{
    compare_to_empirical, scenario_dyad_distance, scenario_population, scenario_strict_flat,
    PopWeight, PopulationVector, ScenarioComparison, ScenarioDensity, ScenarioKind,
};
pub use smooth::{
    default_grid, epanechnikov, kernel_smooth, rot_bandwidth, SmoothOptions, SmoothedDensity,
};
pub use synth::{corrupt, sample_levy_flows, DistanceModel, SynthSpec, SynthSpecEcho};
