//! Schema identifiers stamped into every output file.
//!
//! CSV files carry `# schema: <id>` as their first line; JSON reports carry a
//! `"schema"` field. Bump the trailing version when a format changes.

pub const FLOW_LONG: &str = "levyflow.flow-long/1";
pub const DISTANCE_DENSE: &str = "levyflow.distance-dense/1";
pub const BINNED_DENSITY: &str = "levyflow.binned-density/1";
pub const TAIL: &str = "levyflow.tail/1";
pub const FIT: &str = "levyflow.fit/1";
pub const SMOOTHED: &str = "levyflow.smoothed-density/1";
pub const SCENARIO: &str = "levyflow.scenario-density/1";
pub const SCENARIO_COMPARISON: &str = "levyflow.scenario-comparison/1";
pub const SERIES: &str = "levyflow.series/1";
pub const SERIES_SUMMARY: &str = "levyflow.series-summary/1";
pub const EXP_TREND: &str = "levyflow.exp-trend/1";
pub const INDEX_PROVENANCE: &str = "levyflow.index-provenance/1";
pub const SYNTH_SPEC: &str = "levyflow.synth-spec/1";

/// The CSV comment line for a schema id.
pub fn csv_header(id: &str) -> String {
    format!("# schema: {id}")
}
