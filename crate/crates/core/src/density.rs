//! Flow-weighted displacement-length distributions.
//!
//! Dyad-level flows are pooled into fixed-width distance bins: bin k covers
//! [k·w, (k+1)·w), except that the final bin closes at the maximum
//! off-diagonal distance so the farthest dyad is always binnable. The tail —
//! the part strictly right of the global maximum — is what the power law is
//! fitted to; activity left of the peak is censored by the transnational-only
//! scope and excluded.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::{DistanceMatrix, FlowMatrix};
use crate::numeric::{fmt_f64, KahanSum};
use crate::schema;

/// Binned probability mass and density of displacement lengths.
#[derive(Debug, Clone)]
pub struct BinnedDensity {
    bin_width: f64,
    max_distance: f64,
    mass: Vec<f64>,
    density: Vec<f64>,
    total_flow: f64,
}

impl BinnedDensity {
    pub(crate) fn from_mass(
        bin_width: f64,
        max_distance: f64,
        mass: Vec<f64>,
        total_flow: f64,
    ) -> Self {
        let density = mass.iter().map(|m| m / bin_width).collect();
        Self {
            bin_width,
            max_distance,
            mass,
            density,
            total_flow,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.mass.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Upper end of the binned range (largest off-diagonal distance).
    pub fn max_distance(&self) -> f64 {
        self.max_distance
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn total_flow(&self) -> f64 {
        self.total_flow
    }

    /// `[lo, hi)` edges of bin k (the final bin closes at `max_distance`).
    pub fn edges(&self, k: usize) -> (f64, f64) {
        (k as f64 * self.bin_width, (k + 1) as f64 * self.bin_width)
    }

    /// Representative displacement for bin k: the midpoint.
    pub fn x_point(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    pub fn x_points(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.x_point(k)).collect()
    }

    /// Index of the global maximum of the mass vector; ties take the
    /// leftmost bin.
    pub fn argmax_bin(&self) -> usize {
        let mut best = 0;
        for (k, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = k;
            }
        }
        best
    }

    /// CSV emission: `bin_lo,bin_hi,x,mass,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", schema::csv_header(schema::BINNED_DENSITY))?;
        writeln!(out, "bin_lo,bin_hi,x,mass,density")?;
        self.write_rows(&mut out, None)?;
        Ok(())
    }

    pub(crate) fn write_rows<W: Write>(&self, out: &mut W, extra: Option<&str>) -> Result<()> {
        for k in 0..self.n_bins() {
            let (lo, hi) = self.edges(k);
            write!(
                out,
                "{},{},{},{},{}",
                fmt_f64(lo),
                fmt_f64(hi),
                fmt_f64(self.x_point(k)),
                fmt_f64(self.mass[k]),
                fmt_f64(self.density[k]),
            )?;
            match extra {
                Some(e) => writeln!(out, ",{e}")?,
                None => writeln!(out)?,
            }
        }
        Ok(())
    }
}

/// A tail point: bin midpoint and its density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub x: f64,
    pub density: f64,
}

/// The fit region: bins strictly right of the global maximum, zero-mass bins
/// dropped. `start_index` records where the tail region begins (argmax + 1)
/// even when that particular bin carried no mass.
#[derive(Debug, Clone)]
pub struct TailSegment {
    start_index: usize,
    points: Vec<TailPoint>,
}

impl TailSegment {
    pub fn new(start_index: usize, points: Vec<TailPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientTail {
                usable: 0,
                needed: 1,
            });
        }
        for p in &points {
            if !(p.x > 0.0) || !(p.density > 0.0) || !p.x.is_finite() || !p.density.is_finite() {
                return Err(Error::Validation(format!(
                    "tail points need positive finite x and density, got ({}, {})",
                    p.x, p.density
                )));
            }
        }
        Ok(Self {
            start_index,
            points,
        })
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn points(&self) -> &[TailPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.points.first().map(|p| p.x).unwrap_or(f64::NAN)
    }

    pub fn x_max(&self) -> f64 {
        self.points.last().map(|p| p.x).unwrap_or(f64::NAN)
    }

    /// CSV emission: `x,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", schema::csv_header(schema::TAIL))?;
        writeln!(out, "x,density")?;
        for p in &self.points {
            writeln!(out, "{},{}", fmt_f64(p.x), fmt_f64(p.density))?;
        }
        Ok(())
    }
}

/// Number of bins covering (0, max]: the smallest k with k·width ≥ max.
pub(crate) fn bin_count(max_distance: f64, width: f64) -> usize {
    debug_assert!(width > 0.0 && max_distance > 0.0);
    let mut k = (max_distance / width).ceil() as usize;
    k = k.max(1);
    while (k as f64) * width < max_distance {
        k += 1;
    }
    while k > 1 && ((k - 1) as f64) * width >= max_distance {
        k -= 1;
    }
    k
}

/// Bin index of distance `d`. floor(d/width) with an interval fix-up so the
/// result always satisfies lo ≤ d < hi (last bin: lo ≤ d), matching a linear
/// scan over the edges even when d/width rounds across an integer.
pub(crate) fn bin_index(d: f64, width: f64, n_bins: usize) -> usize {
    let mut k = ((d / width).floor() as usize).min(n_bins - 1);
    while k + 1 < n_bins && d >= (k as f64 + 1.0) * width {
        k += 1;
    }
    while k > 0 && d < k as f64 * width {
        k -= 1;
    }
    k
}

/// Pool flows into distance bins and normalize to a probability distribution.
///
/// Accumulation is compensated (Kahan) and skips zero cells in row-major
/// order; masses are per-bin sums divided by the total.
pub fn bin_flows(flow: &FlowMatrix, dist: &DistanceMatrix, width: f64) -> Result<BinnedDensity> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {width}"
        )));
    }
    if !flow.registry().same_countries(dist.registry()) {
        return Err(Error::RegistryMismatch);
    }
    let max = dist.max_offdiag();
    if max / width > 1e7 {
        return Err(Error::InvalidArgument(format!(
            "bin width {width} km yields over 10^7 bins for max distance {max} km"
        )));
    }
    let n_bins = bin_count(max, width);
    let n = flow.n();
    let mut bins = vec![KahanSum::new(); n_bins];
    let mut total = KahanSum::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let f = flow.get(i, j);
            if f == 0.0 {
                continue;
            }
            let k = bin_index(dist.get(i, j), width, n_bins);
            bins[k].add(f);
            total.add(f);
        }
    }
    let total = total.value();
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let mass: Vec<f64> = bins.iter().map(|b| b.value() / total).collect();
    Ok(BinnedDensity::from_mass(width, max, mass, total))
}

/// Extract the tail: bins strictly after the argmax-mass bin, with zero-mass
/// bins dropped. Needs ≥ 3 nonempty bins overall and ≥ 2 usable tail points.
pub fn extract_tail(binned: &BinnedDensity) -> Result<TailSegment> {
    let nonempty = binned.mass().iter().filter(|m| **m > 0.0).count();
    if nonempty < 3 {
        return Err(Error::InsufficientTail {
            usable: nonempty,
            needed: 3,
        });
    }
    let peak = binned.argmax_bin();
    let points: Vec<TailPoint> = (peak + 1..binned.n_bins())
        .filter(|&k| binned.mass()[k] > 0.0)
        .map(|k| TailPoint {
            x: binned.x_point(k),
            density: binned.density()[k],
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientTail {
            usable: points.len(),
            needed: 2,
        });
    }
    TailSegment::new(peak + 1, points)
}

/// Fraction of total flow at distances ≤ cutoff (km).
pub fn short_distance_share(
    flow: &FlowMatrix,
    dist: &DistanceMatrix,
    cutoff: f64,
) -> Result<f64> {
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cutoff must be positive, got {cutoff}"
        )));
    }
    if !flow.registry().same_countries(dist.registry()) {
        return Err(Error::RegistryMismatch);
    }
    let n = flow.n();
    let mut near = KahanSum::new();
    let mut total = KahanSum::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let f = flow.get(i, j);
            if f == 0.0 {
                continue;
            }
            total.add(f);
            if dist.get(i, j) <= cutoff {
                near.add(f);
            }
        }
    }
    if total.value() <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    Ok((near.value() / total.value()).clamp(0.0, 1.0))
}
