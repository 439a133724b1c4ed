//! Geography-is-dead null models.
//!
//! Three hypothetical distributions on the empirical bin grid: activity
//! uniform over distance (strict-flat), uniform over the existing country
//! dyads (dyad-distance, the reverse-u dyad-count histogram), and uniform
//! over individuals choosing destination countries (population). Comparison
//! against an empirical density reports total-variation distance and per-bin
//! gaps.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::density::{bin_count, bin_flows, BinnedDensity};
use crate::error::{Error, Result};
use crate::flow::{DistanceMatrix, FlowMatrix, FlowMeta, Year};
use crate::registry::CountryRegistry;
use crate::schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    StrictFlat,
    DyadDistance,
    Population,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioKind::StrictFlat => write!(f, "strict-flat"),
            ScenarioKind::DyadDistance => write!(f, "dyad-distance"),
            ScenarioKind::Population => write!(f, "population"),
        }
    }
}

/// A null-model distribution on the shared bin grid.
#[derive(Debug, Clone)]
pub struct ScenarioDensity {
    pub kind: ScenarioKind,
    pub binned: BinnedDensity,
}

impl ScenarioDensity {
    /// CSV emission: the binned-density schema plus a `kind` column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", schema::csv_header(schema::SCENARIO))?;
        writeln!(out, "bin_lo,bin_hi,x,mass,density,kind")?;
        self.binned
            .write_rows(&mut out, Some(&self.kind.to_string()))?;
        Ok(())
    }
}

/// Per-country population counts aligned to a registry.
#[derive(Debug, Clone)]
pub struct PopulationVector {
    registry: Arc<CountryRegistry>,
    pop: Vec<f64>,
}

impl PopulationVector {
    pub fn new(registry: Arc<CountryRegistry>, pop: Vec<f64>) -> Result<Self> {
        if pop.len() != registry.len() {
            return Err(Error::Validation(format!(
                "population vector has {} entries for {} countries",
                pop.len(),
                registry.len()
            )));
        }
        if pop.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(
                "population entries must be finite and nonnegative".into(),
            ));
        }
        if !pop.iter().any(|p| *p > 0.0) {
            return Err(Error::Validation(
                "population vector needs at least one positive entry".into(),
            ));
        }
        Ok(Self { registry, pop })
    }

    /// Parse a `country,pop` CSV. Every registry country must appear —
    /// a silently missing country would vanish from the null model.
    pub fn parse<R: Read>(reader: R, registry: &Arc<CountryRegistry>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() < 2
                || !headers[0].eq_ignore_ascii_case("country")
                || !headers[1].eq_ignore_ascii_case("pop")
            {
                return Err(Error::Config(
                    "population file must start with a `country,pop` header".into(),
                ));
            }
        }
        let mut pop = vec![f64::NAN; registry.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let label = &record[0];
            let idx = registry
                .resolve(label)
                .ok_or_else(|| Error::UnknownCountry {
                    code: label.to_owned(),
                })?;
            let v: f64 = record[1].parse().map_err(|_| Error::ParseLine {
                line: line + 2,
                message: format!("non-numeric population {:?}", &record[1]),
            })?;
            if pop[idx].is_nan() {
                pop[idx] = v;
            } else {
                pop[idx] += v;
            }
        }
        let missing: Vec<&str> = (0..registry.len())
            .filter(|&i| pop[i].is_nan())
            .map(|i| registry.code(i))
            .take(5)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "population file missing countries: {}",
                missing.join(", ")
            )));
        }
        Self::new(Arc::clone(registry), pop)
    }

    pub fn load(path: &std::path::Path, registry: &Arc<CountryRegistry>) -> Result<Self> {
        Self::parse(std::fs::File::open(path)?, registry)
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pop[i]
    }
}

/// How the population scenario weights a dyad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PopWeight {
    /// flow(i,j) = pop(i): each individual picks a destination country
    /// uniformly at random.
    #[default]
    Origin,
    /// flow(i,j) = pop(i)·pop(j): the gravity-numerator reading.
    Product,
}

impl std::str::FromStr for PopWeight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "origin" => Ok(PopWeight::Origin),
            "product" => Ok(PopWeight::Product),
            other => Err(Error::InvalidArgument(format!(
                "unknown population weighting {other:?} (expected origin or product)"
            ))),
        }
    }
}

/// Activity uniform over [0, max distance]: every full bin holds
/// width/max of the mass, the final partial bin is pro-rated.
pub fn scenario_strict_flat(dist: &DistanceMatrix, width: f64) -> Result<ScenarioDensity> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {width}"
        )));
    }
    let max = dist.max_offdiag();
    let n_bins = bin_count(max, width);
    let mut mass = vec![width / max; n_bins];
    mass[n_bins - 1] = (max - (n_bins - 1) as f64 * width) / max;
    Ok(ScenarioDensity {
        kind: ScenarioKind::StrictFlat,
        binned: BinnedDensity::from_mass(width, max, mass, 1.0),
    })
}

/// Activity uniform over the n²−n existing dyads: the dyad-count histogram.
pub fn scenario_dyad_distance(dist: &DistanceMatrix, width: f64) -> Result<ScenarioDensity> {
    let ones = FlowMatrix::from_fn(
        Arc::clone(dist.registry()),
        FlowMeta::new("dyad-uniform", Year::Undated, "count"),
        |_, _| 1.0,
    )?;
    Ok(ScenarioDensity {
        kind: ScenarioKind::DyadDistance,
        binned: bin_flows(&ones, dist, width)?,
    })
}

/// Individuals choose destinations uniformly regardless of location:
/// flow(i,j) = pop(i), or pop(i)·pop(j) under the product reading.
pub fn scenario_population(
    dist: &DistanceMatrix,
    pop: &PopulationVector,
    width: f64,
    weight: PopWeight,
) -> Result<ScenarioDensity> {
    if !pop.registry.same_countries(dist.registry()) {
        return Err(Error::RegistryMismatch);
    }
    let flow = FlowMatrix::from_fn(
        Arc::clone(dist.registry()),
        FlowMeta::new("population-uniform", Year::Undated, "persons"),
        |i, j| match weight {
            PopWeight::Origin => pop.get(i),
            PopWeight::Product => pop.get(i) * pop.get(j),
        },
    )?;
    Ok(ScenarioDensity {
        kind: ScenarioKind::Population,
        binned: bin_flows(&flow, dist, width)?,
    })
}

/// Quantified distance between a scenario and the empirical density.
#[derive(Debug, Serialize)]
pub struct ScenarioComparison {
    pub kind: ScenarioKind,
    /// Half the summed absolute per-bin mass differences, in [0, 1].
    pub tv_distance: f64,
    /// scenario mass − empirical mass, per bin.
    pub per_bin_gap: Vec<f64>,
}

/// Compare a scenario against an empirical binned density on the same grid.
pub fn compare_to_empirical(
    scenario: &ScenarioDensity,
    empirical: &BinnedDensity,
) -> Result<ScenarioComparison> {
    if scenario.binned.bin_width() != empirical.bin_width()
        || scenario.binned.n_bins() != empirical.n_bins()
    {
        return Err(Error::Validation(format!(
            "scenario grid ({} bins of {} km) does not match empirical grid ({} bins of {} km)",
            scenario.binned.n_bins(),
            scenario.binned.bin_width(),
            empirical.n_bins(),
            empirical.bin_width()
        )));
    }
    let per_bin_gap: Vec<f64> = scenario
        .binned
        .mass()
        .iter()
        .zip(empirical.mass())
        .map(|(s, e)| s - e)
        .collect();
    let tv_distance = 0.5 * per_bin_gap.iter().map(|g| g.abs()).sum::<f64>();
    Ok(ScenarioComparison {
        kind: scenario.kind,
        tv_distance,
        per_bin_gap,
    })
}
