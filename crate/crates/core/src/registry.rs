//! Canonical country set and historical-state remapping.
//!
//! Every matrix in the pipeline is aligned to one [`CountryRegistry`]: an
//! ordered list of canonical codes plus a remap table that folds historical
//! identifiers onto their present-day equivalents. The registry fixes the
//! matrix dimension `n`; source files that cover fewer countries are expanded
//! with zeros, and files using historical codes are folded through the remap.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountryRegistry {
    codes: Vec<String>,
    index: BTreeMap<String, usize>,
    remap: BTreeMap<String, String>,
}

impl CountryRegistry {
    /// Build a registry from canonical codes and a historical→canonical map.
    ///
    /// Codes must be unique and more than one; remap targets must be canonical
    /// codes and remap keys must not collide with canonical codes.
    pub fn new(codes: Vec<String>, remap: BTreeMap<String, String>) -> Result<Self> {
        if codes.len() < 2 {
            return Err(Error::Config(format!(
                "registry needs at least 2 countries, got {}",
                codes.len()
            )));
        }
        let mut index = BTreeMap::new();
        for (i, code) in codes.iter().enumerate() {
            if code.is_empty() {
                return Err(Error::Config("empty country code in registry".into()));
            }
            if index.insert(code.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate country code {code:?}")));
            }
        }
        for (hist, canon) in &remap {
            if !index.contains_key(canon) {
                return Err(Error::Config(format!(
                    "remap target {canon:?} (for {hist:?}) is not a canonical code"
                )));
            }
            if index.contains_key(hist) {
                return Err(Error::Config(format!(
                    "remap key {hist:?} is itself a canonical code"
                )));
            }
        }
        Ok(Self {
            codes,
            index,
            remap,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn code(&self, i: usize) -> &str {
        &self.codes[i]
    }

    pub fn remap(&self) -> &BTreeMap<String, String> {
        &self.remap
    }

    /// Position of a canonical code.
    pub fn position(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Resolve a label to its canonical position, folding historical codes
    /// through the remap table.
    pub fn resolve(&self, label: &str) -> Option<usize> {
        if let Some(&i) = self.index.get(label) {
            return Some(i);
        }
        self.remap
            .get(label)
            .and_then(|canon| self.index.get(canon))
            .copied()
    }

    /// Same canonical country set, in the same order.
    pub fn same_countries(&self, other: &Self) -> bool {
        self.codes == other.codes
    }

    /// Parse a registry from readers: one code per line (blank lines and
    /// `#` comments skipped), plus an optional remap CSV with a
    /// `historical,canonical` header.
    pub fn parse<R: Read, S: Read>(codes: R, remap: Option<S>) -> Result<Arc<Self>> {
        let codes = parse_code_lines(codes)?;
        let remap = match remap {
            Some(r) => parse_remap(r)?,
            None => BTreeMap::new(),
        };
        Ok(Arc::new(Self::new(codes, remap)?))
    }

    pub fn from_files(registry_path: &Path, remap_path: Option<&Path>) -> Result<Arc<Self>> {
        let codes = std::fs::File::open(registry_path)?;
        match remap_path {
            Some(p) => Self::parse(codes, Some(std::fs::File::open(p)?)),
            None => Self::parse(codes, None::<std::fs::File>),
        }
    }
}

fn parse_code_lines<R: Read>(mut reader: R) -> Result<Vec<String>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

/// Parse the remap CSV. Conflicting duplicate keys are the spec's "ambiguous
/// remap" configuration error; exact duplicates are tolerated.
fn parse_remap<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        if headers.len() < 2
            || !headers[0].eq_ignore_ascii_case("historical")
            || !headers[1].eq_ignore_ascii_case("canonical")
        {
            return Err(Error::Config(
                "remap file must start with a `historical,canonical` header".into(),
            ));
        }
    }
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::ParseLine {
                line: line + 2,
                message: "remap row needs two columns".into(),
            });
        }
        let hist = record[0].to_owned();
        let canon = record[1].to_owned();
        if let Some(existing) = map.get(&hist) {
            if existing != &canon {
                return Err(Error::AmbiguousRemap {
                    code: hist,
                    first: existing.clone(),
                    second: canon,
                });
            }
            continue;
        }
        map.insert(hist, canon);
    }
    Ok(map)
}
