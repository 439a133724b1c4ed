//! Dyadic flow matrices and the geodesic distance matrix.
//!
//! Source files arrive either as dense labeled CSV (header row and first
//! column carry country codes) or as long-format `origin,destination,value`
//! triples. Both are standardized onto the registry's canonical country set:
//! absent countries become zero rows/columns, historical codes fold through
//! the remap (flows merging cell-wise), and diagonal (within-country) cells
//! are zeroed with a warning counter — only transnational flows are kept.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{fmt_f64, KahanSum};
use crate::registry::CountryRegistry;
use crate::schema;

/// Observation year of a matrix. Some sources (the online-friendship ranks)
/// are undated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Year {
    Dated(i32),
    Undated,
}

impl std::fmt::Display for Year {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Year::Dated(y) => write!(f, "{y}"),
            Year::Undated => write!(f, "undated"),
        }
    }
}

impl Serialize for Year {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Year::Dated(y) => s.serialize_i32(*y),
            Year::Undated => s.serialize_str("undated"),
        }
    }
}

/// How to treat labels that resolve to no canonical country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrictMode {
    /// Unresolvable code is an error (default: silent drops corrupt totals).
    #[default]
    Strict,
    /// Drop the offending row/column and warn.
    Lenient,
}

/// Descriptive metadata attached to a flow matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMeta {
    pub activity_type: String,
    pub year: Year,
    pub units: String,
}

impl FlowMeta {
    pub fn new(activity_type: &str, year: Year, units: &str) -> Self {
        Self {
            activity_type: activity_type.to_owned(),
            year,
            units: units.to_owned(),
        }
    }
}

/// A labeled matrix exactly as it appeared in a source file, before
/// standardization.
#[derive(Debug, Clone)]
pub struct RawMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major, `row_labels.len() * col_labels.len()` entries.
    pub values: Vec<f64>,
}

impl RawMatrix {
    /// Parse a dense labeled CSV: header row of country codes (the leading
    /// corner cell is ignored), one labeled row per country. Empty cells are
    /// missing data and read as zero. Lines starting with `#` are skipped.
    pub fn parse_dense<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);

        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r?,
            None => {
                return Err(Error::ParseLine {
                    line: 1,
                    message: "empty matrix file".into(),
                })
            }
        };
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        if col_labels.is_empty() {
            return Err(Error::ParseLine {
                line: 1,
                message: "dense matrix header has no country columns".into(),
            });
        }

        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for (i, record) in records.enumerate() {
            let record = record?;
            if record.len() != col_labels.len() + 1 {
                return Err(Error::ParseLine {
                    line: i + 2,
                    message: format!(
                        "expected {} fields, got {}",
                        col_labels.len() + 1,
                        record.len()
                    ),
                });
            }
            let row_label = record[0].to_owned();
            for (j, cell) in record.iter().skip(1).enumerate() {
                let v = if cell.is_empty() {
                    0.0
                } else {
                    cell.parse::<f64>().map_err(|_| Error::ParseCell {
                        origin: row_label.clone(),
                        destination: col_labels[j].clone(),
                        message: format!("non-numeric cell {cell:?}"),
                    })?
                };
                values.push(v);
            }
            row_labels.push(row_label);
        }
        if row_labels.is_empty() {
            return Err(Error::ParseLine {
                line: 2,
                message: "dense matrix has no data rows".into(),
            });
        }
        Ok(Self {
            row_labels,
            col_labels,
            values,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.col_labels.len() + col]
    }
}

/// Parse long-format triples: header `origin,destination,value`, `#` comments
/// allowed anywhere.
pub fn parse_long<R: Read>(reader: R) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        if !is_long_header(&headers.iter().collect::<Vec<_>>()) {
            return Err(Error::ParseLine {
                line: 1,
                message: "long-format file must start with an `origin,destination,value` header"
                    .into(),
            });
        }
    }
    let mut triples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 3 {
            return Err(Error::ParseLine {
                line: i + 2,
                message: "long-format row needs three columns".into(),
            });
        }
        let v = record[2].parse::<f64>().map_err(|_| Error::ParseCell {
            origin: record[0].to_owned(),
            destination: record[1].to_owned(),
            message: format!("non-numeric value {:?}", &record[2]),
        })?;
        triples.push((record[0].to_owned(), record[1].to_owned(), v));
    }
    Ok(triples)
}

fn is_long_header(fields: &[&str]) -> bool {
    fields.len() >= 3
        && fields[0].eq_ignore_ascii_case("origin")
        && fields[1].eq_ignore_ascii_case("destination")
        && fields[2].eq_ignore_ascii_case("value")
}

/// An n×n nonnegative flow matrix aligned to a registry. Row = origin,
/// column = destination, diagonal identically zero.
#[derive(Debug, Clone)]
pub struct FlowMatrix {
    registry: Arc<CountryRegistry>,
    values: Vec<f64>,
    meta: FlowMeta,
}

/// Result of standardizing a raw matrix, with the warning counters the
/// design decisions call for.
#[derive(Debug)]
pub struct Standardized {
    pub matrix: FlowMatrix,
    /// Labels dropped in lenient mode (sorted, deduplicated).
    pub dropped: Vec<String>,
    /// Count of nonzero diagonal cells that were forced to zero.
    pub diagonal_zeroed: usize,
}

impl FlowMatrix {
    /// Construct from an already-aligned value vector, enforcing the
    /// invariants: n×n shape, finite nonnegative entries, zero diagonal.
    pub fn new(registry: Arc<CountryRegistry>, values: Vec<f64>, meta: FlowMeta) -> Result<Self> {
        let n = registry.len();
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "flow matrix has {} entries, registry dimension {n} needs {}",
                values.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite flow at ({}, {})",
                        registry.code(i),
                        registry.code(j)
                    )));
                }
                if v < 0.0 {
                    return Err(Error::NegativeValue {
                        origin: registry.code(i).to_owned(),
                        destination: registry.code(j).to_owned(),
                        value: v,
                    });
                }
                if i == j && v != 0.0 {
                    return Err(Error::Validation(format!(
                        "nonzero diagonal at {}; transnational flows only",
                        registry.code(i)
                    )));
                }
            }
        }
        Ok(Self {
            registry,
            values,
            meta,
        })
    }

    pub fn zeros(registry: Arc<CountryRegistry>, meta: FlowMeta) -> Self {
        let n = registry.len();
        Self {
            registry,
            values: vec![0.0; n * n],
            meta,
        }
    }

    /// Build from a cell function; the diagonal is forced to zero.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        registry: Arc<CountryRegistry>,
        meta: FlowMeta,
        mut f: F,
    ) -> Result<Self> {
        let n = registry.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = f(i, j);
                }
            }
        }
        Self::new(registry, values, meta)
    }

    pub fn registry(&self) -> &Arc<CountryRegistry> {
        &self.registry
    }

    pub fn n(&self) -> usize {
        self.registry.len()
    }

    pub fn activity_type(&self) -> &str {
        &self.meta.activity_type
    }

    pub fn year(&self) -> Year {
        self.meta.year
    }

    pub fn units(&self) -> &str {
        &self.meta.units
    }

    pub fn meta(&self) -> &FlowMeta {
        &self.meta
    }

    pub fn get(&self, origin: usize, destination: usize) -> f64 {
        self.values[origin * self.registry.len() + destination]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total flow volume (compensated sum over all cells).
    pub fn total(&self) -> f64 {
        let mut sum = KahanSum::new();
        for &v in &self.values {
            if v != 0.0 {
                sum.add(v);
            }
        }
        sum.value()
    }

    /// A copy with every cell scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        Ok(Self {
            registry: Arc::clone(&self.registry),
            values: self.values.iter().map(|v| v * c).collect(),
            meta: self.meta.clone(),
        })
    }

    /// A copy with different metadata (same registry and cells).
    pub fn with_meta(&self, meta: FlowMeta) -> Self {
        Self {
            registry: Arc::clone(&self.registry),
            values: self.values.clone(),
            meta,
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Align a raw labeled matrix onto the registry's canonical n×n grid.
///
/// Rows/columns for countries absent from the file stay zero; labels
/// resolving via the remap merge cell-wise into the canonical successor; the
/// diagonal is forced to zero (counted). In strict mode an unresolvable label
/// is an error; in lenient mode it is dropped and reported.
pub fn standardize(
    raw: &RawMatrix,
    registry: &Arc<CountryRegistry>,
    meta: FlowMeta,
    mode: StrictMode,
) -> Result<Standardized> {
    let n = registry.len();
    let mut dropped = Vec::new();
    let resolve_all = |labels: &[String], dropped: &mut Vec<String>| -> Result<Vec<Option<usize>>> {
        labels
            .iter()
            .map(|label| match registry.resolve(label) {
                Some(i) => Ok(Some(i)),
                None => match mode {
                    StrictMode::Strict => Err(Error::UnknownCountry {
                        code: label.clone(),
                    }),
                    StrictMode::Lenient => {
                        dropped.push(label.clone());
                        Ok(None)
                    }
                },
            })
            .collect()
    };
    let row_idx = resolve_all(&raw.row_labels, &mut dropped)?;
    let col_idx = resolve_all(&raw.col_labels, &mut dropped)?;
    dropped.sort();
    dropped.dedup();

    let mut values = vec![0.0; n * n];
    let mut diagonal_zeroed = 0usize;
    for (r, row_label) in raw.row_labels.iter().enumerate() {
        for (c, col_label) in raw.col_labels.iter().enumerate() {
            let v = raw.get(r, c);
            if !v.is_finite() {
                return Err(Error::ParseCell {
                    origin: row_label.clone(),
                    destination: col_label.clone(),
                    message: format!("non-finite value {v}"),
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeValue {
                    origin: row_label.clone(),
                    destination: col_label.clone(),
                    value: v,
                });
            }
            if let (Some(i), Some(j)) = (row_idx[r], col_idx[c]) {
                if i == j {
                    if v != 0.0 {
                        diagonal_zeroed += 1;
                    }
                } else {
                    values[i * n + j] += v;
                }
            }
        }
    }
    Ok(Standardized {
        matrix: FlowMatrix::new(Arc::clone(registry), values, meta)?,
        dropped,
        diagonal_zeroed,
    })
}

/// Standardize long-format triples onto the registry grid. Repeated dyads
/// accumulate.
pub fn standardize_triples(
    triples: &[(String, String, f64)],
    registry: &Arc<CountryRegistry>,
    meta: FlowMeta,
    mode: StrictMode,
) -> Result<Standardized> {
    let n = registry.len();
    let mut values = vec![0.0; n * n];
    let mut dropped = Vec::new();
    let mut diagonal_zeroed = 0usize;
    for (origin, destination, v) in triples {
        if !v.is_finite() {
            return Err(Error::ParseCell {
                origin: origin.clone(),
                destination: destination.clone(),
                message: format!("non-finite value {v}"),
            });
        }
        if *v < 0.0 {
            return Err(Error::NegativeValue {
                origin: origin.clone(),
                destination: destination.clone(),
                value: *v,
            });
        }
        let mut resolve = |label: &str| -> Result<Option<usize>> {
            match registry.resolve(label) {
                Some(i) => Ok(Some(i)),
                None => match mode {
                    StrictMode::Strict => Err(Error::UnknownCountry {
                        code: label.to_owned(),
                    }),
                    StrictMode::Lenient => {
                        dropped.push(label.to_owned());
                        Ok(None)
                    }
                },
            }
        };
        let (i, j) = match (resolve(origin)?, resolve(destination)?) {
            (Some(i), Some(j)) => (i, j),
            _ => continue,
        };
        if i == j {
            if *v != 0.0 {
                diagonal_zeroed += 1;
            }
        } else {
            values[i * n + j] += v;
        }
    }
    dropped.sort();
    dropped.dedup();
    Ok(Standardized {
        matrix: FlowMatrix::new(Arc::clone(registry), values, meta)?,
        dropped,
        diagonal_zeroed,
    })
}

/// Load a flow file (dense or long format, auto-detected) and standardize it.
/// Warnings (dropped labels, zeroed diagonal cells) go to the log.
pub fn load_flow_matrix(
    path: &Path,
    registry: &Arc<CountryRegistry>,
    meta: FlowMeta,
    mode: StrictMode,
) -> Result<FlowMatrix> {
    let text = std::fs::read_to_string(path)?;
    let std = standardize_text(&text, registry, meta, mode)?;
    if !std.dropped.is_empty() {
        log::warn!(
            "{}: dropped {} unresolvable labels: {}",
            path.display(),
            std.dropped.len(),
            std.dropped.join(", ")
        );
    }
    if std.diagonal_zeroed > 0 {
        log::warn!(
            "{}: zeroed {} nonzero diagonal cells (transnational flows only)",
            path.display(),
            std.diagonal_zeroed
        );
    }
    Ok(std.matrix)
}

/// Format-sniffing standardizer used by [`load_flow_matrix`] and tests.
pub fn standardize_text(
    text: &str,
    registry: &Arc<CountryRegistry>,
    meta: FlowMeta,
    mode: StrictMode,
) -> Result<Standardized> {
    let first_line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let fields: Vec<&str> = first_line.split(',').map(str::trim).collect();
    if is_long_header(&fields) {
        let triples = parse_long(text.as_bytes())?;
        standardize_triples(&triples, registry, meta, mode)
    } else {
        let raw = RawMatrix::parse_dense(text.as_bytes())?;
        standardize(&raw, registry, meta, mode)
    }
}

/// Interpret a 0–5 rank matrix (the online-friendship source) as ordinal flow
/// weights: the rank value is the weight, units become `rank-weight`.
pub fn rank_to_weight(ranks: &FlowMatrix) -> Result<FlowMatrix> {
    let n = ranks.n();
    for i in 0..n {
        let mut nonzero = 0usize;
        for j in 0..n {
            let v = ranks.get(i, j);
            if v.fract() != 0.0 || !(0.0..=5.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "rank {v} at ({}, {}) outside 0..=5",
                    ranks.registry().code(i),
                    ranks.registry().code(j)
                )));
            }
            if v != 0.0 {
                nonzero += 1;
            }
        }
        if nonzero > 5 {
            return Err(Error::Validation(format!(
                "row {} ranks {nonzero} partners; at most five allowed",
                ranks.registry().code(i)
            )));
        }
    }
    Ok(ranks.with_meta(FlowMeta {
        activity_type: ranks.activity_type().to_owned(),
        year: ranks.year(),
        units: "rank-weight".to_owned(),
    }))
}

/// Emit the canonical long-format CSV: schema line, header, one row per
/// nonzero cell in row-major order, values at 17 significant digits.
pub fn write_long_csv<W: Write>(matrix: &FlowMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{}", schema::csv_header(schema::FLOW_LONG))?;
    writeln!(out, "origin,destination,value")?;
    let n = matrix.n();
    for i in 0..n {
        for j in 0..n {
            let v = matrix.get(i, j);
            if v != 0.0 {
                writeln!(
                    out,
                    "{},{},{}",
                    matrix.registry().code(i),
                    matrix.registry().code(j),
                    fmt_f64(v)
                )?;
            }
        }
    }
    Ok(())
}

/// Emit a dense labeled distance CSV (the ingestion layout, with a schema
/// comment line the parser skips).
pub fn write_distance_csv<W: Write>(dist: &DistanceMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{}", schema::csv_header(schema::DISTANCE_DENSE))?;
    let reg = dist.registry();
    let n = reg.len();
    write!(out, "code")?;
    for j in 0..n {
        write!(out, ",{}", reg.code(j))?;
    }
    writeln!(out)?;
    for i in 0..n {
        write!(out, "{}", reg.code(i))?;
        for j in 0..n {
            if i == j {
                write!(out, ",0")?;
            } else {
                write!(out, ",{}", fmt_f64(dist.get(i, j)))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Symmetric n×n great-circle-style distances in km. The diagonal is ignored
/// by every consumer and stored as zero.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    registry: Arc<CountryRegistry>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Construct from aligned values, enforcing symmetry and positive
    /// off-diagonal entries.
    pub fn new(registry: Arc<CountryRegistry>, mut values: Vec<f64>) -> Result<Self> {
        let n = registry.len();
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "distance matrix has {} entries, registry dimension {n} needs {}",
                values.len(),
                n * n
            )));
        }
        for i in 0..n {
            values[i * n + i] = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = values[i * n + j];
                if !d.is_finite() || d <= 0.0 {
                    return Err(Error::Validation(format!(
                        "distance between {} and {} must be positive, got {d}",
                        registry.code(i),
                        registry.code(j)
                    )));
                }
                let mirror = values[j * n + i];
                if (d - mirror).abs() > 1e-12 * d.abs().max(1.0) {
                    return Err(Error::Validation(format!(
                        "asymmetric distances for ({}, {}): {d} vs {mirror}",
                        registry.code(i),
                        registry.code(j)
                    )));
                }
            }
        }
        Ok(Self { registry, values })
    }

    /// Build from a symmetric pair function (called once per unordered pair).
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        registry: Arc<CountryRegistry>,
        mut f: F,
    ) -> Result<Self> {
        let n = registry.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self::new(registry, values)
    }

    /// Load a dense labeled distance CSV and align it to the registry. Every
    /// registry pair must be covered; conflicting duplicate rows are an error.
    pub fn load(path: &Path, registry: &Arc<CountryRegistry>, mode: StrictMode) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_dense(file, registry, mode)
    }

    pub fn parse_dense<R: Read>(
        reader: R,
        registry: &Arc<CountryRegistry>,
        mode: StrictMode,
    ) -> Result<Self> {
        let raw = RawMatrix::parse_dense(reader)?;
        let n = registry.len();
        let resolve = |label: &String| -> Result<Option<usize>> {
            match registry.resolve(label) {
                Some(i) => Ok(Some(i)),
                None => match mode {
                    StrictMode::Strict => Err(Error::UnknownCountry {
                        code: label.clone(),
                    }),
                    StrictMode::Lenient => Ok(None),
                },
            }
        };
        let row_idx: Vec<Option<usize>> =
            raw.row_labels.iter().map(resolve).collect::<Result<_>>()?;
        let col_idx: Vec<Option<usize>> =
            raw.col_labels.iter().map(resolve).collect::<Result<_>>()?;

        let mut values = vec![0.0; n * n];
        let mut filled = vec![false; n * n];
        for (r, row_label) in raw.row_labels.iter().enumerate() {
            for (c, col_label) in raw.col_labels.iter().enumerate() {
                let (i, j) = match (row_idx[r], col_idx[c]) {
                    (Some(i), Some(j)) => (i, j),
                    _ => continue,
                };
                if i == j {
                    continue;
                }
                let d = raw.get(r, c);
                let cell = i * n + j;
                if filled[cell] && values[cell] != d {
                    return Err(Error::Validation(format!(
                        "conflicting distances for ({row_label}, {col_label}) after remapping: \
                         {} vs {d}",
                        values[cell]
                    )));
                }
                values[cell] = d;
                filled[cell] = true;
            }
        }
        let missing: Vec<String> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && !filled[i * n + j])
            .map(|(i, j)| format!("({}, {})", registry.code(i), registry.code(j)))
            .take(5)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "distance matrix does not cover the registry; first missing pairs: {}",
                missing.join(", ")
            )));
        }
        Self::new(Arc::clone(registry), values)
    }

    pub fn registry(&self) -> &Arc<CountryRegistry> {
        &self.registry
    }

    pub fn n(&self) -> usize {
        self.registry.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.registry.len() + j]
    }

    /// Largest off-diagonal distance; this bounds the bin grid.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.registry.len();
        let mut max = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    max = max.max(self.values[i * n + j]);
                }
            }
        }
        max
    }
}
