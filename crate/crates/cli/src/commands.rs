//! The three subcommands as library functions.

use std::path::Path;
use std::time::Instant;

use ldpsgd::sim::critical_levels_for;
use ldpsgd::{
    critical_values, plugin_interval, plugin_release_budget, rs_interval, run_simulation,
    CriticalValueTable, Method, Mu, NoiseSource, PluginCovarianceState, RandomScalingState,
    SgdState,
};
use nalgebra::DVector;

use crate::config::{Mode, RunConfig};
use crate::dataset::{load_csv, Dataset};
use crate::error::{CliError, Result};
use crate::output::write_atomic;
use crate::report::{AnalysisSummary, CoefficientRecord, Record, Report, RunMetadata, TrajectoryRecord};

const STREAM_SGD: u64 = 1;
const STREAM_RELEASE: u64 = 2;
const STREAM_CRITICAL: u64 = 3;

fn cache_header(paths: usize, grid: usize, seed: u64) -> String {
    format!("# paths={paths} grid={grid} seed={seed}")
}

/// Critical values for `levels`, read from `cache` when it was produced with
/// the same paths, grid and seed and covers every level. Returns whether the
/// cache was used.
pub fn critical_table(
    levels: &[f64],
    paths: usize,
    grid: usize,
    seed: u64,
    cache: Option<&Path>,
) -> Result<(CriticalValueTable, bool)> {
    let header = cache_header(paths, grid, seed);
    if let Some(path) = cache {
        if let Ok(text) = std::fs::read_to_string(path) {
            if text.lines().next() == Some(header.as_str()) {
                if let Ok(table) = CriticalValueTable::from_text(&text) {
                    let covered = levels
                        .iter()
                        .all(|l| table.levels().any(|t| (t - l).abs() < 1e-12));
                    if covered {
                        return Ok((table, true));
                    }
                }
            }
        }
    }
    let mut rng = NoiseSource::new(seed, STREAM_CRITICAL);
    let table = critical_values(levels, paths, grid, &mut rng)?;
    if let Some(path) = cache {
        write_atomic(path, format!("{header}\n{}", table.to_text()).as_bytes())?;
    }
    Ok((table, false))
}

/// Runs the configured Monte Carlo design and returns the JSON-lines report.
pub fn simulate(cfg: &RunConfig) -> Result<String> {
    cfg.expect_mode(Mode::Simulate)?;
    let design = cfg.sim_design()?;
    let start = Instant::now();
    let (table, _) = critical_table(
        &design.critical_levels(),
        cfg.inference.critical_paths,
        cfg.inference.critical_grid,
        cfg.seed,
        cfg.inference.critical_cache.as_deref(),
    )?;
    let (outcomes, summary) = run_simulation(&design, &table)?;
    let metadata = RunMetadata::new(Some(start.elapsed().as_secs_f64()));
    Report::from_simulation(&outcomes, &summary, metadata).to_jsonl()
}

/// Checkpoints `⌈rows·k/count⌉` for `k = 1..=count`, deduplicated.
pub fn trajectory_checkpoints(rows: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=count.max(1))
        .map(|k| (rows * k).div_ceil(count.max(1)))
        .filter(|&n| n > 0)
        .collect();
    out.dedup();
    out
}

/// Loads the configured CSV and analyzes it.
pub fn analyze(cfg: &RunConfig, data: &Path) -> Result<Report> {
    cfg.expect_mode(Mode::Analyze)?;
    let section = cfg.analyze_section()?;
    let dataset = load_csv(data, &section.response, section.standardize, &section.categorical)?;
    analyze_dataset(cfg, &dataset)
}

/// One pass of private SGD over the rows in order, with plug-in and
/// random-scaling intervals at every trajectory checkpoint.
pub fn analyze_dataset(cfg: &RunConfig, dataset: &Dataset) -> Result<Report> {
    let section = cfg.analyze_section()?;
    let model = cfg.loss_model()?;
    let schedule = cfg.schedule()?;
    let mu = cfg.mu()?;
    let budget = ldpsgd::PrivacyBudget::from_mu(mu);
    let private = !mu.is_infinite();
    let level = cfg.inference.level;
    let dim = dataset.dim();
    let rows = dataset.rows();

    let initial = match &cfg.schedule.initial {
        Some(v) if v.len() != dim => {
            return Err(CliError::Config(format!(
                "schedule.initial has {} entries but the design has {dim} columns",
                v.len()
            )))
        }
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(dim),
    };
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("inference.level must lie in (0,1), got {level}")));
    }
    let (table, _) = critical_table(
        &critical_levels_for(&[level]),
        cfg.inference.critical_paths,
        cfg.inference.critical_grid,
        cfg.seed,
        cfg.inference.critical_cache.as_deref(),
    )?;

    let mut sgd = SgdState::new(model, schedule, budget.clone(), initial, NoiseSource::new(cfg.seed, STREAM_SGD))?;
    let mut release_rng = NoiseSource::new(cfg.seed, STREAM_RELEASE);
    let mut plugin = PluginCovarianceState::with_floors(dim, cfg.inference.kappa1, cfg.inference.kappa2)?;
    let mut rs = RandomScalingState::new(dim);
    let checkpoints = trajectory_checkpoints(rows, section.checkpoints);
    let mut next_cp = checkpoints.iter().peekable();

    let mut records = Vec::new();
    let mut last = Vec::new();
    for (i, obs) in dataset.observations().enumerate() {
        let obs = obs.map_err(|e| e.at_step(i))?;
        let factor = model.hessian_factor(sgd.theta().as_slice(), &obs).map_err(|e| e.at_step(i))?;
        let grad = sgd.step(&obs).map_err(|e| e.at_step(i))?;
        plugin.update(grad, &factor)?;
        rs.update(sgd.theta_bar(), sgd.n())?;

        if next_cp.peek().is_some_and(|&&cp| cp == i + 1) {
            next_cp.next();
            let n = sgd.n();
            let theta_bar = sgd.theta_bar();
            let sigma = plugin.sandwich(&model, &budget, &mut release_rng)?;
            let vhat = rs.vhat(theta_bar)?;
            last.clear();
            for j in 0..dim {
                let p = plugin_interval(theta_bar[j], sigma[(j, j)], n, level, private)?;
                let r = rs_interval(theta_bar[j], vhat[(j, j)], n, level, &table)?;
                records.push(Record::Trajectory(TrajectoryRecord {
                    n: i + 1,
                    j,
                    name: dataset.columns[j].clone(),
                    estimate: theta_bar[j],
                    plugin: p,
                    random_scaling: r,
                }));
                last.push(CoefficientRecord {
                    j,
                    name: dataset.columns[j].clone(),
                    estimate: theta_bar[j],
                    plugin: p,
                    random_scaling: r,
                });
            }
        }
    }
    records.extend(last.into_iter().map(Record::Coefficient));
    records.push(Record::AnalysisSummary(AnalysisSummary {
        rows,
        response: dataset.response.clone(),
        columns: dataset.columns.clone(),
        model,
        mu,
        schedule,
        level,
        seed: cfg.seed,
        plugin_label: Method::Plugin.label(private).to_string(),
        random_scaling_label: Method::RandomScaling.label(private).to_string(),
        plugin_release_budget: match mu {
            Mu::Finite(m) => Some(plugin_release_budget(m)?),
            Mu::Infinite => None,
        },
        plugin_releases: checkpoints.len(),
        critical_paths: cfg.inference.critical_paths,
        critical_grid: cfg.inference.critical_grid,
        metadata: RunMetadata::new(None),
    }));
    Ok(Report { records })
}
