//! Over-time indicator series: totals, short-distance shares, per-year
//! power-law fits, log-log trend lines with absolute volume scaling, and
//! exponential growth extrapolation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::density::{bin_flows, extract_tail};
use crate::error::{Error, Result};
use crate::fit::{fit_with_method, FitMethod, PowerLawFit};
use crate::flow::{DistanceMatrix, FlowMatrix, Year};
use crate::numeric::{fmt_f64, mean_and_population_sd, ols_line};
use crate::schema;

/// One year's indicators. Fit fields are missing when the year has zero
/// total flow or its tail could not be extracted/fitted; `note` records why.
#[derive(Debug, Clone, Serialize)]
pub struct YearRow {
    pub year: i32,
    pub total: f64,
    pub share: Option<f64>,
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    /// ln(a·total): log-log trend line intercept with absolute volume scaling.
    pub line_intercept: Option<f64>,
    /// −β: log-log trend line slope.
    pub line_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_capita: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The full longitudinal report for one activity type.
#[derive(Debug, Serialize)]
pub struct SeriesReport {
    pub schema: &'static str,
    pub activity_type: String,
    pub cutoff_km: f64,
    pub width_km: f64,
    pub method: FitMethod,
    pub rows: Vec<YearRow>,
    pub share_mean: Option<f64>,
    pub share_sd: Option<f64>,
    pub r2_mean: Option<f64>,
    pub r2_sd: Option<f64>,
}

impl SeriesReport {
    /// CSV emission: one row per year.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", schema::csv_header(schema::SERIES))?;
        writeln!(
            out,
            "year,total,share,beta,r_squared,line_intercept,line_slope,per_capita"
        )?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.year,
                fmt_f64(r.total),
                opt(r.share),
                opt(r.beta),
                opt(r.r_squared),
                opt(r.line_intercept),
                opt(r.line_slope),
                opt(r.per_capita),
            )?;
        }
        Ok(())
    }
}

/// Compute per-year indicators for dated matrices of one activity type.
///
/// Years with zero total flow keep their total but report share/β/R² as
/// missing; years whose tail extraction or fit fails are flagged and excluded
/// from the fit summaries while still contributing totals and shares.
/// Summary statistics use the population standard deviation.
pub fn build_series(
    matrices: &[FlowMatrix],
    dist: &DistanceMatrix,
    cutoff: f64,
    width: f64,
    method: FitMethod,
    world_pop: Option<&BTreeMap<i32, f64>>,
) -> Result<SeriesReport> {
    if matrices.is_empty() {
        return Err(Error::InsufficientData {
            op: "series",
            needed: 1,
            got: 0,
        });
    }
    let activity_type = matrices[0].activity_type().to_owned();
    let mut dated: Vec<(i32, &FlowMatrix)> = Vec::with_capacity(matrices.len());
    for m in matrices {
        if m.activity_type() != activity_type {
            return Err(Error::Validation(format!(
                "mixed activity types in series: {:?} and {:?}",
                activity_type,
                m.activity_type()
            )));
        }
        if !m.registry().same_countries(dist.registry()) {
            return Err(Error::RegistryMismatch);
        }
        match m.year() {
            Year::Dated(y) => dated.push((y, m)),
            Year::Undated => {
                return Err(Error::Validation(
                    "series input must be dated matrices".into(),
                ))
            }
        }
    }
    dated.sort_by_key(|(y, _)| *y);
    for pair in dated.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Validation(format!(
                "duplicate year {} in series input",
                pair[0].0
            )));
        }
    }

    let mut rows = Vec::with_capacity(dated.len());
    for (year, m) in dated {
        let total = m.total();
        let per_capita = world_pop
            .and_then(|p| p.get(&year))
            .map(|pop| total / pop);
        if total <= 0.0 {
            rows.push(YearRow {
                year,
                total,
                share: None,
                beta: None,
                r_squared: None,
                line_intercept: None,
                line_slope: None,
                per_capita,
                note: Some("zero total flow".into()),
            });
            continue;
        }
        let share = crate::density::short_distance_share(m, dist, cutoff)?;
        let fit: Result<PowerLawFit> =
            bin_flows(m, dist, width).and_then(|b| extract_tail(&b)).and_then(|t| {
                fit_with_method(&t, method)
            });
        match fit {
            Ok(f) => rows.push(YearRow {
                year,
                total,
                share: Some(share),
                beta: Some(f.beta),
                r_squared: Some(f.r_squared),
                line_intercept: Some((f.a * total).ln()),
                line_slope: Some(-f.beta),
                per_capita,
                note: None,
            }),
            Err(e) => rows.push(YearRow {
                year,
                total,
                share: Some(share),
                beta: None,
                r_squared: None,
                line_intercept: None,
                line_slope: None,
                per_capita,
                note: Some(e.to_string()),
            }),
        }
    }

    let shares: Vec<f64> = rows.iter().filter_map(|r| r.share).collect();
    let r2s: Vec<f64> = rows.iter().filter_map(|r| r.r_squared).collect();
    let (share_mean, share_sd) = match mean_and_population_sd(&shares) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    let (r2_mean, r2_sd) = match mean_and_population_sd(&r2s) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    Ok(SeriesReport {
        schema: schema::SERIES_SUMMARY,
        activity_type,
        cutoff_km: cutoff,
        width_km: width,
        method,
        rows,
        share_mean,
        share_sd,
        r2_mean,
        r2_sd,
    })
}

/// An exponential trend y = c·e^(k·t) fitted by log-linear least squares.
#[derive(Debug, Clone, Serialize)]
pub struct ExpTrend {
    pub c: f64,
    pub k: f64,
    /// R² of the log-linear fit.
    pub r_squared: f64,
    /// (t, c·e^(k·t)) at the requested horizons.
    pub extrapolations: Vec<(f64, f64)>,
}

impl ExpTrend {
    pub fn value_at(&self, t: f64) -> f64 {
        self.c * (self.k * t).exp()
    }
}

/// Fit y = c·e^(k·t) to (t, y) points: OLS of ln y on t, c = exp(intercept),
/// k = slope. Needs ≥ 3 points with positive y. A constant series fits with
/// k = 0 and R² = 1 (zero-variance convention).
pub fn fit_exp_trend(points: &[(f64, f64)], extrapolate_at: &[f64]) -> Result<ExpTrend> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            op: "exponential trend",
            needed: 3,
            got: points.len(),
        });
    }
    for &(t, y) in points {
        if !(y > 0.0) || !y.is_finite() || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "exponential trend needs positive finite values, got ({t}, {y})"
            )));
        }
    }
    let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let lys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = ols_line(&ts, &lys);
    let trend = ExpTrend {
        c: line.intercept.exp(),
        k: line.slope,
        r_squared: line.r_squared,
        extrapolations: Vec::new(),
    };
    let extrapolations = extrapolate_at
        .iter()
        .map(|&t| (t, trend.value_at(t)))
        .collect();
    Ok(ExpTrend {
        extrapolations,
        ..trend
    })
}

/// Year-indexed exponential trend report. Time is encoded as t = 1 for the
/// first observed year, 2 for the next calendar year, and so on.
#[derive(Debug, Serialize)]
pub struct ExpTrendReport {
    pub schema: &'static str,
    pub activity_type: String,
    pub first_year: i32,
    pub c: f64,
    pub k: f64,
    pub r_squared: f64,
    pub extrapolations: Vec<YearValue>,
}

#[derive(Debug, Serialize)]
pub struct YearValue {
    pub year: i32,
    pub value: f64,
}

/// Fit the exponential trend to per-year totals and extrapolate to target
/// years.
pub fn fit_exp_trend_years(
    activity_type: &str,
    years: &[i32],
    values: &[f64],
    targets: &[i32],
) -> Result<ExpTrendReport> {
    if years.len() != values.len() {
        return Err(Error::Validation(
            "years and values are not aligned".into(),
        ));
    }
    if years.is_empty() {
        return Err(Error::InsufficientData {
            op: "exponential trend",
            needed: 3,
            got: 0,
        });
    }
    let first_year = *years.iter().min().unwrap();
    let encode = |y: i32| (y - first_year + 1) as f64;
    let points: Vec<(f64, f64)> = years
        .iter()
        .zip(values)
        .map(|(&y, &v)| (encode(y), v))
        .collect();
    let at: Vec<f64> = targets.iter().map(|&y| encode(y)).collect();
    let trend = fit_exp_trend(&points, &at)?;
    Ok(ExpTrendReport {
        schema: schema::EXP_TREND,
        activity_type: activity_type.to_owned(),
        first_year,
        c: trend.c,
        k: trend.k,
        r_squared: trend.r_squared,
        extrapolations: targets
            .iter()
            .zip(&trend.extrapolations)
            .map(|(&year, &(_, value))| YearValue { year, value })
            .collect(),
    })
}

/// A log-log plot line with absolute volume scaling: slope −β, intercept
/// ln(a·total).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendLine {
    pub intercept: f64,
    pub slope: f64,
}

/// Per-year plot lines from fits and totals.
pub fn loglog_trend_lines(fits: &[PowerLawFit], totals: &[f64]) -> Result<Vec<TrendLine>> {
    if fits.len() != totals.len() {
        return Err(Error::Validation(
            "fits and totals are not aligned".into(),
        ));
    }
    fits.iter()
        .zip(totals)
        .map(|(f, &t)| {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "trend line needs positive total, got {t}"
                )));
            }
            Ok(TrendLine {
                intercept: (f.a * t).ln(),
                slope: -f.beta,
            })
        })
        .collect()
}
