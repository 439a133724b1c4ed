//! Command implementations: ingestion → density → fit → reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use levyflow_core::{
    bin_flows, build_series, build_thm_index, build_tha_index, compare_to_empirical, default_grid,
    extract_tail, fit_exp_trend_years, fit_with_method, kernel_smooth, load_flow_matrix,
    rank_to_weight, sample_levy_flows, scenario_dyad_distance, scenario_population,
    scenario_strict_flat, write_distance_csv, write_long_csv, CountryRegistry, DistanceMatrix,
    DistanceModel, FitReport, FlowMatrix, FlowMeta, IndexProvenance, IndexSpec, Normalization,
    PopulationVector, ScenarioComparison, SmoothOptions, SynthSpec, SynthSpecEcho, Year,
};
use serde::Serialize;

use crate::config::{FlowEntry, Resolved};
use crate::CliError;

fn load_registry(cfg: &Resolved) -> Result<Arc<CountryRegistry>, CliError> {
    let path = cfg.registry_path()?;
    if !path.exists() {
        return Err(CliError::input(format!(
            "registry not found: {}",
            path.display()
        )));
    }
    if let Some(remap) = &cfg.remap {
        if !remap.exists() {
            return Err(CliError::input(format!(
                "remap file not found: {}",
                remap.display()
            )));
        }
    }
    Ok(CountryRegistry::from_files(path, cfg.remap.as_deref())?)
}

fn load_distance(
    cfg: &Resolved,
    registry: &Arc<CountryRegistry>,
) -> Result<DistanceMatrix, CliError> {
    let path = cfg.distance_path()?;
    Ok(DistanceMatrix::load(path, registry, cfg.mode)?)
}

fn load_flow(
    cfg: &Resolved,
    registry: &Arc<CountryRegistry>,
    entry: &FlowEntry,
) -> Result<FlowMatrix, CliError> {
    if !entry.path.exists() {
        return Err(CliError::input(format!(
            "flow file not found: {}",
            entry.path.display()
        )));
    }
    let meta = FlowMeta::new(&entry.activity_type, entry.year_value(), &entry.units);
    let matrix = load_flow_matrix(&entry.path, registry, meta, cfg.mode)?;
    if entry.rank_weights {
        Ok(rank_to_weight(&matrix)?)
    } else {
        Ok(matrix)
    }
}

/// The flow inputs a command works on: an explicit flag-provided entry wins
/// over the config list.
fn flow_entries(cfg: &Resolved, overriding: Option<FlowEntry>) -> Result<Vec<FlowEntry>, CliError> {
    match overriding {
        Some(e) => Ok(vec![e]),
        None if cfg.flows.is_empty() => Err(CliError::input(
            "no flow inputs (use --flow or a [[flows]] config entry)".into(),
        )),
        None => Ok(cfg.flows.clone()),
    }
}

fn single_flow_entry(
    cfg: &Resolved,
    overriding: Option<FlowEntry>,
) -> Result<FlowEntry, CliError> {
    let mut entries = flow_entries(cfg, overriding)?;
    if entries.len() != 1 {
        return Err(CliError::input(format!(
            "this command needs exactly one flow input, got {}",
            entries.len()
        )));
    }
    Ok(entries.remove(0))
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn file_stem(entry: &FlowEntry) -> String {
    format!("{}_{}", slug(&entry.activity_type), entry.year_value())
}

fn ensure_out(cfg: &Resolved) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::input(format!("output directory {}: {e}", cfg.out.display())))
}

fn write_out(cfg: &Resolved, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = cfg.out.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn write_json<T: Serialize>(cfg: &Resolved, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::compute(format!("serializing {name}: {e}")))?;
    text.push('\n');
    write_out(cfg, name, text.as_bytes())
}

/// `fit`: per input, binned-density CSV + tail CSV + fit JSON.
pub fn cmd_fit(cfg: &Resolved, overriding: Option<FlowEntry>) -> Result<(), CliError> {
    let entries = flow_entries(cfg, overriding)?;
    let registry = load_registry(cfg)?;
    let dist = load_distance(cfg, &registry)?;
    ensure_out(cfg)?;
    for entry in &entries {
        let flow = load_flow(cfg, &registry, entry)?;
        let binned = bin_flows(&flow, &dist, cfg.width)?;
        let mut csv = Vec::new();
        binned.write_csv(&mut csv)?;
        write_out(cfg, &format!("{}_density.csv", file_stem(entry)), &csv)?;

        let tail = extract_tail(&binned)?;
        let mut tail_csv = Vec::new();
        tail.write_csv(&mut tail_csv)?;
        write_out(cfg, &format!("{}_tail.csv", file_stem(entry)), &tail_csv)?;

        let fit = fit_with_method(&tail, cfg.method)?;
        let report = FitReport::new(flow.activity_type(), flow.year(), &fit);
        write_json(cfg, &format!("{}_fit.json", file_stem(entry)), &report)?;
    }
    Ok(())
}

fn parse_world_pop(path: &Path) -> Result<BTreeMap<i32, f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("world population {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.to_ascii_lowercase().starts_with("year") {
            continue;
        }
        let mut parts = line.split(',');
        let (y, p) = (parts.next(), parts.next());
        let parse = || -> Option<(i32, f64)> {
            Some((y?.trim().parse().ok()?, p?.trim().parse().ok()?))
        };
        let (year, pop) = parse().ok_or_else(|| {
            CliError::input(format!(
                "world population {}: bad line {}: {line:?}",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(year, pop);
    }
    Ok(map)
}

/// `series`: longitudinal CSV + summary JSON, optional exponential trend.
pub fn cmd_series(
    cfg: &Resolved,
    extrapolate: &[i32],
    world_pop: Option<&Path>,
) -> Result<(), CliError> {
    let entries = flow_entries(cfg, None)?;
    let registry = load_registry(cfg)?;
    let dist = load_distance(cfg, &registry)?;
    let matrices: Vec<FlowMatrix> = entries
        .iter()
        .map(|e| load_flow(cfg, &registry, e))
        .collect::<Result<_, _>>()?;

    let world_pop_path = world_pop.or(cfg.series.world_pop.as_deref());
    let pop_map = world_pop_path.map(parse_world_pop).transpose()?;

    let report = build_series(
        &matrices,
        &dist,
        cfg.cutoff,
        cfg.width,
        cfg.method,
        pop_map.as_ref(),
    )?;
    ensure_out(cfg)?;
    let stem = slug(&report.activity_type);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_out(cfg, &format!("{stem}_series.csv"), &csv)?;
    write_json(cfg, &format!("{stem}_series_summary.json"), &report)?;

    let mut targets: Vec<i32> = extrapolate.to_vec();
    if targets.is_empty() {
        if let Some(t) = &cfg.series.extrapolate {
            targets = t.clone();
        }
    }
    if !targets.is_empty() {
        let (years, totals): (Vec<i32>, Vec<f64>) = report
            .rows
            .iter()
            .filter(|r| r.total > 0.0)
            .map(|r| (r.year, r.total))
            .unzip();
        let trend = fit_exp_trend_years(&report.activity_type, &years, &totals, &targets)?;
        write_json(cfg, &format!("{stem}_exptrend.json"), &trend)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScenarioComparisonFile {
    schema: &'static str,
    activity_type: String,
    year: Year,
    width_km: f64,
    comparisons: Vec<ScenarioComparison>,
}

pub struct ScenarioToggles {
    pub flat: bool,
    pub dyad: bool,
    pub population: bool,
    pub population_file: Option<PathBuf>,
}

/// `scenarios`: one density CSV per enabled scenario plus a comparison JSON
/// against the empirical density.
pub fn cmd_scenarios(
    cfg: &Resolved,
    overriding: Option<FlowEntry>,
    toggles: ScenarioToggles,
) -> Result<(), CliError> {
    let entry = single_flow_entry(cfg, overriding)?;
    let registry = load_registry(cfg)?;
    let dist = load_distance(cfg, &registry)?;
    let flow = load_flow(cfg, &registry, &entry)?;
    let empirical = bin_flows(&flow, &dist, cfg.width)?;
    ensure_out(cfg)?;
    let mut csv = Vec::new();
    empirical.write_csv(&mut csv)?;
    write_out(cfg, "empirical_density.csv", &csv)?;

    let mut scenarios = Vec::new();
    if toggles.flat {
        scenarios.push(scenario_strict_flat(&dist, cfg.width)?);
    }
    if toggles.dyad {
        scenarios.push(scenario_dyad_distance(&dist, cfg.width)?);
    }
    if toggles.population {
        let pop_path = toggles.population_file.as_deref().ok_or_else(|| {
            CliError::input("population scenario enabled without population file".into())
        })?;
        if !pop_path.exists() {
            return Err(CliError::input(format!(
                "population file not found: {}",
                pop_path.display()
            )));
        }
        let pop = PopulationVector::load(pop_path, &registry)?;
        scenarios.push(scenario_population(&dist, &pop, cfg.width, cfg.pop_weight()?)?);
    }
    if scenarios.is_empty() {
        return Err(CliError::input("no scenarios enabled".into()));
    }

    let mut comparisons = Vec::new();
    for s in &scenarios {
        let mut csv = Vec::new();
        s.write_csv(&mut csv)?;
        write_out(cfg, &format!("scenario_{}.csv", s.kind), &csv)?;
        comparisons.push(compare_to_empirical(s, &empirical)?);
    }
    write_json(
        cfg,
        "scenario_comparison.json",
        &ScenarioComparisonFile {
            schema: levyflow_core::schema::SCENARIO_COMPARISON,
            activity_type: flow.activity_type().to_owned(),
            year: flow.year(),
            width_km: cfg.width,
            comparisons,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ProvenanceFile {
    schema: &'static str,
    indices: Vec<IndexProvenance>,
}

/// `index`: THM/THC/THA long-format CSVs plus one provenance JSON.
pub fn cmd_index(cfg: &Resolved) -> Result<(), CliError> {
    let registry = load_registry(cfg)?;
    let entries = flow_entries(cfg, None)?;
    let mut thm_parts: Vec<FlowMatrix> = Vec::new();
    let mut thc_parts: Vec<FlowMatrix> = Vec::new();
    for entry in &entries {
        let flow = load_flow(cfg, &registry, entry)?;
        match entry.group.as_deref() {
            Some("thm") => thm_parts.push(flow),
            Some("thc") => thc_parts.push(flow),
            Some(other) => {
                return Err(CliError::input(format!(
                    "flow {:?} has unknown group {other:?} (expected thm or thc)",
                    entry.activity_type
                )))
            }
            None => {
                return Err(CliError::input(format!(
                    "flow {:?} has no group; the index command needs group = \"thm\" or \"thc\"",
                    entry.activity_type
                )))
            }
        }
    }
    if thm_parts.is_empty() || thc_parts.is_empty() {
        return Err(CliError::input(format!(
            "index needs both groups: {} thm and {} thc inputs found",
            thm_parts.len(),
            thc_parts.len()
        )));
    }

    let thm = build_thm_index(&thm_parts)?;
    let thc_norm = cfg.thc_normalization()?;
    let thc = if thc_norm == Normalization::SumToOne {
        levyflow_core::build_thc_index(&thc_parts)?
    } else {
        let w = 1.0 / thc_parts.len() as f64;
        IndexSpec {
            components: thc_parts.iter().map(|m| (m, w)).collect(),
            normalization: thc_norm,
            label: "THC".into(),
            units: "share".into(),
        }
        .build()?
    };
    let weights = cfg.index_weights()?;
    let tha = build_tha_index(&thm, &thc, weights)?;

    ensure_out(cfg)?;
    for (name, matrix) in [("thm", &thm), ("thc", &thc), ("tha", &tha)] {
        let mut csv = Vec::new();
        write_long_csv(matrix, &mut csv)?;
        write_out(cfg, &format!("{name}.csv"), &csv)?;
    }
    let thm_refs: Vec<(&FlowMatrix, f64)> = thm_parts.iter().map(|m| (m, 1.0)).collect();
    let thc_w = 1.0 / thc_parts.len() as f64;
    let thc_refs: Vec<(&FlowMatrix, f64)> = thc_parts.iter().map(|m| (m, thc_w)).collect();
    let tha_refs: Vec<(&FlowMatrix, f64)> = vec![(&thm, weights.0), (&thc, weights.1)];
    write_json(
        cfg,
        "index_provenance.json",
        &ProvenanceFile {
            schema: levyflow_core::schema::INDEX_PROVENANCE,
            indices: vec![
                IndexProvenance::describe("THM", Normalization::None, &thm_refs),
                IndexProvenance::describe("THC", thc_norm, &thc_refs),
                IndexProvenance::describe("THA", Normalization::SumToOne, &tha_refs),
            ],
        },
    )?;
    Ok(())
}

pub struct SynthArgsResolved {
    pub n: usize,
    pub beta: f64,
    pub moves: u64,
    pub seed: u64,
    pub peak_mass: f64,
    pub d_min: f64,
    pub d_max: f64,
}

/// `synth`: generate a dataset with a planted exponent and write the
/// standard CSV formats plus a spec echo.
pub fn cmd_synth(cfg: &Resolved, args: SynthArgsResolved) -> Result<(), CliError> {
    let distance = match &cfg.distance {
        Some(_) => {
            let registry = load_registry(cfg)?;
            DistanceModel::Supplied(load_distance(cfg, &registry)?)
        }
        None => DistanceModel::UniformRandom {
            d_min: args.d_min,
            d_max: args.d_max,
        },
    };
    let spec = SynthSpec {
        n: args.n,
        distance,
        true_beta: args.beta,
        peak_mass: args.peak_mass,
        n_moves: args.moves,
        seed: args.seed,
        bin_width: cfg.width,
    };
    let (flow, dist) = sample_levy_flows(&spec)?;
    ensure_out(cfg)?;

    let mut flow_csv = Vec::new();
    write_long_csv(&flow, &mut flow_csv)?;
    write_out(cfg, "synth_flow.csv", &flow_csv)?;

    let mut dist_csv = Vec::new();
    write_distance_csv(&dist, &mut dist_csv)?;
    write_out(cfg, "synth_distance.csv", &dist_csv)?;

    let mut registry_txt = String::new();
    for code in dist.registry().codes() {
        registry_txt.push_str(code);
        registry_txt.push('\n');
    }
    write_out(cfg, "synth_registry.txt", registry_txt.as_bytes())?;

    write_json(cfg, "synth_spec.json", &SynthSpecEcho::describe(&spec))?;
    Ok(())
}

/// `smooth`: kernel-smoothed density CSV for one flow input.
pub fn cmd_smooth(
    cfg: &Resolved,
    overriding: Option<FlowEntry>,
    bandwidth: Option<f64>,
    degree: usize,
    grid_points: usize,
) -> Result<(), CliError> {
    let entry = single_flow_entry(cfg, overriding)?;
    let registry = load_registry(cfg)?;
    let dist = load_distance(cfg, &registry)?;
    let flow = load_flow(cfg, &registry, &entry)?;
    let grid = default_grid(dist.max_offdiag(), grid_points.max(2));
    let smoothed = kernel_smooth(
        &flow,
        &dist,
        &grid,
        &SmoothOptions { bandwidth, degree },
    )?;
    ensure_out(cfg)?;
    let mut csv = Vec::new();
    smoothed.write_csv(&mut csv)?;
    write_out(cfg, &format!("{}_smooth.csv", file_stem(&entry)), &csv)?;
    Ok(())
}
