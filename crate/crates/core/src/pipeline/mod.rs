//! End-to-end commands: simulate a market, prepare a dataset from a raw log,
//! run the forecasting experiment and write reports.
//!
//! Every command works inside one output directory, which must exist:
//! `raw_log.csv` and `ground_truth.json` from `simulate`, `manifest.json`
//! from `prepare`, and the report tables from `run` / `report`.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    aggregate_hourly, build_shift_dataset, filter_bidders, read_raw_log, split_train_test, write_raw_log, BidderSeries,
    DatasetError, FilterReport, HourlyAggregator, RawRow, ShiftInstance,
};
use crate::evaluation::report::{read_raw, write_figures, write_raw, write_summary};
use crate::evaluation::{hourly_profile, run_experiment, EvalReport, HourlyProfile};
use crate::par::with_jobs;
use crate::simulator::{generate_market, ground_truth, sample_bidders, GroundTruth, RawAuctionLog};

pub use config::{PrepareSection, RunConfig, RunSection};

pub const RAW_LOG_FILE: &str = "raw_log.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_ECHO_FILE: &str = "run_config.toml";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("output directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("{0}")]
    Dataset(#[from] DatasetError),
    #[error("{path}: {message}")]
    Json { path: String, message: String },
}

impl PipelineError {
    /// 2 for usage and configuration problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingDir(_) => 2,
            PipelineError::Dataset(_) | PipelineError::Json { .. } => 1,
        }
    }
}

/// Prepared dataset: filtered, split bidder series and, when requested, the
/// day/night shift tasks built from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub filter: FilterReport,
    pub dropped_hours: usize,
    pub too_short: usize,
    pub series: Vec<BidderSeries>,
    pub shift: bool,
    #[serde(default)]
    pub shift_instances: Vec<ShiftInstance>,
}

impl Manifest {
    /// Forecasting tasks: the shift tasks if the dataset was built for the
    /// shift experiment, the bidder series otherwise.
    pub fn tasks(&self) -> Vec<BidderSeries> {
        if self.shift {
            self.shift_instances.iter().map(|i| i.series.clone()).collect()
        } else {
            self.series.clone()
        }
    }

    /// Normalised daily bid shape: over the shift days if any, else over
    /// every complete day of the kept bidders.
    pub fn hourly_profile(&self) -> Option<HourlyProfile> {
        let days: Vec<Vec<f64>> = if self.shift {
            self.shift_instances.iter().map(|i| i.day_bids.clone()).collect()
        } else {
            self.series.iter().flat_map(complete_days).collect()
        };
        (!days.is_empty()).then(|| hourly_profile(days.iter().map(|d| d.as_slice())))
    }
}

fn complete_days(s: &BidderSeries) -> Vec<Vec<f64>> {
    let mut by_day: BTreeMap<i64, Vec<(i64, f64)>> = BTreeMap::new();
    for h in &s.hours {
        by_day.entry(h.hour.div_euclid(24)).or_default().push((h.hour, h.bid));
    }
    by_day
        .into_values()
        .filter(|d| d.len() == 24)
        .map(|d| d.into_iter().map(|(_, b)| b).collect())
        .collect()
}

fn require_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(PipelineError::MissingDir(dir.to_path_buf()))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| DatasetError::io(path, e).into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Samples the population and simulates the market.
pub fn simulate(cfg: &RunConfig) -> (RawAuctionLog, GroundTruth) {
    let bidders = sample_bidders(&cfg.market, &cfg.population);
    let log = generate_market(&cfg.market, &bidders);
    let truth = ground_truth(&cfg.market, &bidders, &log);
    (log, truth)
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    require_dir(out)?;
    let (log, truth) = with_jobs(cfg.run.jobs, || simulate(cfg));
    write_raw_log(&out.join(RAW_LOG_FILE), log.rows())?;
    write_json(&out.join(GROUND_TRUTH_FILE), &truth)?;
    log::info!("simulated {} bidders over {} hours", truth.bidders.len(), cfg.market.horizon_hours);
    Ok(())
}

/// Aggregation, split, filters and (optionally) shift construction.
pub fn prepare_from_rows(
    rows: impl IntoIterator<Item = RawRow>,
    top_slot: Option<&BTreeMap<String, bool>>,
    cfg: &RunConfig,
    source: &str,
) -> Manifest {
    let (series, dropped) = aggregate_hourly(rows);
    prepare_series(series, dropped.len(), top_slot, cfg, source)
}

fn prepare_series(
    series: Vec<BidderSeries>,
    dropped_hours: usize,
    top_slot: Option<&BTreeMap<String, bool>>,
    cfg: &RunConfig,
    source: &str,
) -> Manifest {
    let mut too_short = 0;
    let mut split = Vec::with_capacity(series.len());
    for mut s in series {
        if let Some(flags) = top_slot {
            s.won_top_slot = flags.get(&s.bidder_id).copied().unwrap_or(false);
        }
        match split_train_test(&s, &cfg.filter) {
            Ok(s) => split.push(s),
            Err(e) => {
                log::info!("{}: dropped: {e}", s.bidder_id);
                too_short += 1;
            }
        }
    }
    let (kept, filter) = filter_bidders(split, &cfg.filter);
    let shift_instances = if cfg.prepare.shift {
        build_shift_dataset(&kept, &cfg.shift)
    } else {
        Vec::new()
    };
    Manifest {
        source: source.to_string(),
        filter,
        dropped_hours,
        too_short,
        series: kept,
        shift: cfg.prepare.shift,
        shift_instances,
    }
}

/// In-memory simulate → aggregate → prepare, without touching the disk.
pub fn simulate_and_prepare(cfg: &RunConfig) -> (Manifest, GroundTruth) {
    with_jobs(cfg.run.jobs, || {
        let (log, truth) = simulate(cfg);
        let mut agg = HourlyAggregator::new();
        for r in log.rows() {
            agg.push(r);
        }
        let (series, dropped) = agg.finish();
        let manifest = prepare_series(series, dropped.len(), Some(&truth.won_top_slot), cfg, "simulation");
        (manifest, truth)
    })
}

pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<Manifest, PipelineError> {
    require_dir(out)?;
    // The manifest names its source as configured, so outputs do not depend
    // on where the output directory lives.
    let (raw, source) = match &cfg.prepare.raw_log {
        Some(p) => (p.clone(), p.display().to_string()),
        None => (out.join(RAW_LOG_FILE), RAW_LOG_FILE.to_string()),
    };
    let sidecar = cfg.prepare.ground_truth.clone().unwrap_or_else(|| out.join(GROUND_TRUTH_FILE));
    let flags: Option<BTreeMap<String, bool>> = if sidecar.exists() {
        let truth: GroundTruth = read_json(&sidecar)?;
        Some(truth.won_top_slot)
    } else {
        log::warn!("no ground-truth sidecar at {}; every bidder counts as a top-slot winner", sidecar.display());
        None
    };
    let manifest = with_jobs(cfg.run.jobs, || -> Result<Manifest, PipelineError> {
        let mut agg = HourlyAggregator::new();
        read_raw_log(&raw, |r| agg.push(r))?;
        let (series, dropped) = agg.finish();
        Ok(prepare_series(series, dropped.len(), flags.as_ref(), cfg, &source))
    })?;
    log::info!(
        "kept {} of {} bidders, {} shift tasks",
        manifest.filter.kept,
        manifest.filter.input + manifest.too_short,
        manifest.shift_instances.len()
    );
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Runs the configured methods and modes on the manifest's tasks.
pub fn run_manifest(manifest: &Manifest, cfg: &RunConfig) -> EvalReport {
    let tasks = manifest.tasks();
    with_jobs(cfg.run.jobs, || {
        run_experiment(&tasks, &cfg.run.methods, &cfg.run.modes, &cfg.experiment_options())
    })
}

pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<EvalReport, PipelineError> {
    require_dir(out)?;
    let manifest: Manifest = read_json(&out.join(MANIFEST_FILE))?;
    let report = run_manifest(&manifest, cfg);
    write_raw(out, &report)?;
    write_reports(cfg, out, &report, &manifest)?;
    Ok(report)
}

/// Rebuilds summaries and figure data from the raw tables of a run.
pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    require_dir(out)?;
    let manifest: Manifest = read_json(&out.join(MANIFEST_FILE))?;
    let report = read_raw(out)?;
    write_reports(cfg, out, &report, &manifest)
}

fn write_reports(cfg: &RunConfig, out: &Path, report: &EvalReport, manifest: &Manifest) -> Result<(), PipelineError> {
    let header = cfg.to_toml()?;
    let path = out.join(CONFIG_ECHO_FILE);
    std::fs::write(&path, &header).map_err(|e| DatasetError::io(&path, e))?;
    let rows = report.summary(&cfg.run.methods, &cfg.run.modes);
    write_summary(out, &rows, &header)?;
    write_figures(out, report, &rows, manifest.hourly_profile().as_ref())?;
    Ok(())
}
