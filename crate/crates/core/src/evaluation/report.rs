//! Report files: raw per-bidder tables, ranked summaries and figure data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dataset::DatasetError;

use super::experiment::{EvalReport, SummaryRow};
use super::metrics::HourlyProfile;

pub const SCORES_FILE: &str = "scores.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const FITS_FILE: &str = "fits.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_MD: &str = "summary.md";
pub const FIG_MAPE: &str = "figure_mape_box.csv";
pub const FIG_PROFILE: &str = "figure_hourly_profile.csv";
pub const FIG_PARAMS: &str = "figure_ogdbias_params.csv";
pub const FIG_SHADE: &str = "figure_shade_daily_cv.csv";
pub const FIG_PLAUSIBILITY: &str = "figure_plausibility.csv";

const HIST_BINS: usize = 20;

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_err(e: csv::Error) -> DatasetError {
    DatasetError::Csv {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T], header: &[&str]) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Raw per-bidder tables of a run.
pub fn write_raw(dir: &Path, report: &EvalReport) -> Result<(), DatasetError> {
    write_records(&dir.join(SCORES_FILE), &report.scores, &["bidder_id", "method", "mode", "mape", "n_test"])?;
    write_records(
        &dir.join(PREDICTIONS_FILE),
        &report.predictions,
        &["bidder_id", "hour", "mode", "rule", "predicted_bid", "true_bid"],
    )?;
    write_records(&dir.join(FAILURES_FILE), &report.failures, &["bidder_id", "method", "mode", "reason"])?;
    write_records(
        &dir.join(ESTIMATES_FILE),
        &report.estimates,
        &["bidder_id", "v_qr", "v_mr", "shade_ratio", "daily_cv", "ogd_plausibility", "eligible_flag"],
    )?;
    write_records(
        &dir.join(FITS_FILE),
        &report.fits,
        &["bidder_id", "method", "value", "eta", "alpha", "vis0", "train_mape"],
    )
}

pub fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Reads back the raw tables written by [`write_raw`].
pub fn read_raw(dir: &Path) -> Result<EvalReport, DatasetError> {
    Ok(EvalReport {
        scores: read_records(&dir.join(SCORES_FILE))?,
        predictions: read_records(&dir.join(PREDICTIONS_FILE))?,
        failures: read_records(&dir.join(FAILURES_FILE))?,
        estimates: read_records(&dir.join(ESTIMATES_FILE))?,
        fits: read_records(&dir.join(FITS_FILE))?,
    })
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

const SUMMARY_HEADER: [&str; 15] = [
    "mode",
    "rank",
    "method",
    "n",
    "n_failed",
    "mean",
    "stderr",
    "lb",
    "ub",
    "q1",
    "median",
    "q3",
    "whisker_lo",
    "whisker_hi",
    "n_outliers",
];

fn summary_cells(r: &SummaryRow) -> Vec<String> {
    let mut cells = vec![
        r.mode.name().to_string(),
        r.rank.map(|k| k.to_string()).unwrap_or_default(),
        r.method.name().to_string(),
        r.n_scored.to_string(),
        r.n_failed.to_string(),
    ];
    match r.stats {
        Some(s) => cells.extend(
            [s.mean_excl, s.stderr, s.ci_lo, s.ci_hi, s.q1, s.median, s.q3, s.whisker_lo, s.whisker_hi]
                .map(num)
                .into_iter()
                .chain([s.n_outliers.to_string()]),
        ),
        None => cells.extend(std::iter::repeat_n(String::new(), 10)),
    }
    cells
}

/// Summary rows sorted by mode, then rank (unranked rows last).
fn sorted_summary(rows: &[SummaryRow]) -> Vec<&SummaryRow> {
    let mut v: Vec<&SummaryRow> = rows.iter().collect();
    v.sort_by_key(|r| (r.mode, r.rank.unwrap_or(usize::MAX), r.method));
    v
}

/// Ranked summary as CSV and as an aligned markdown table headed by the
/// run configuration.
pub fn write_summary(dir: &Path, rows: &[SummaryRow], config_header: &str) -> Result<(), DatasetError> {
    let sorted = sorted_summary(rows);
    write_rows(&dir.join(SUMMARY_CSV), &SUMMARY_HEADER, sorted.iter().map(|r| summary_cells(r)))?;
    let md = summary_markdown(&sorted, config_header);
    let path = dir.join(SUMMARY_MD);
    fs::write(&path, md).map_err(|e| io_err(&path, e))
}

fn summary_markdown(rows: &[&SummaryRow], config_header: &str) -> String {
    let mut s = String::from("# Forecast evaluation\n\n## Configuration\n\n```toml\n");
    s.push_str(config_header.trim_end());
    s.push_str("\n```\n");
    let cols = ["rank", "method", "n", "failed", "mean", "stderr", "lb", "ub", "median", "outliers"];
    let mut modes: Vec<_> = rows.iter().map(|r| r.mode).collect();
    modes.dedup();
    for mode in modes {
        let table: Vec<Vec<String>> = rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| {
                let c = summary_cells(r);
                vec![
                    c[1].clone(),
                    c[2].clone(),
                    c[3].clone(),
                    c[4].clone(),
                    c[5].clone(),
                    c[6].clone(),
                    c[7].clone(),
                    c[8].clone(),
                    c[10].clone(),
                    c[14].clone(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..cols.len())
            .map(|j| table.iter().map(|r| r[j].len()).chain([cols[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let inner: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("| {} |\n", inner.join(" | "))
        };
        let _ = write!(s, "\n## {mode} (MAPE, outliers excluded)\n\n");
        s.push_str(&line(&cols.map(String::from)));
        s.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
        for r in &table {
            s.push_str(&line(r));
        }
    }
    s
}

/// Equal-width histogram over the data range.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, finite.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in finite {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

fn hist_rows(label: &str, values: &[f64]) -> Vec<Vec<String>> {
    histogram(values, HIST_BINS)
        .into_iter()
        .map(|(a, b, c)| vec![label.to_string(), num(a), num(b), c.to_string()])
        .collect()
}

/// Exact-value counts, for parameters fitted on a grid.
fn value_counts(label: &str, values: &[f64]) -> Vec<Vec<String>> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|x| **x == v[i]).count();
        rows.push(vec![label.to_string(), num(v[i]), j.to_string()]);
        i += j;
    }
    rows
}

/// Figure data derived from the raw tables.
pub fn write_figures(dir: &Path, report: &EvalReport, rows: &[SummaryRow], profile: Option<&HourlyProfile>) -> Result<(), DatasetError> {
    write_rows(
        &dir.join(FIG_MAPE),
        &["mode", "method", "q1", "median", "q3", "whisker_lo", "whisker_hi", "n_outliers"],
        sorted_summary(rows).into_iter().filter_map(|r| {
            r.stats.map(|s| {
                vec![r.mode.name().to_string(), r.method.name().to_string()]
                    .into_iter()
                    .chain([s.q1, s.median, s.q3, s.whisker_lo, s.whisker_hi].map(num))
                    .chain([s.n_outliers.to_string()])
                    .collect()
            })
        }),
    )?;
    if let Some(p) = profile {
        write_rows(
            &dir.join(FIG_PROFILE),
            &["hour", "mean", "p25", "p75", "n_days"],
            (0..p.mean.len()).map(|h| vec![h.to_string(), num(p.mean[h]), num(p.p25[h]), num(p.p75[h]), p.n.to_string()]),
        )?;
    }
    let bias: Vec<_> = report.fits.iter().filter(|f| f.alpha.is_some()).collect();
    let alphas: Vec<f64> = bias.iter().filter_map(|f| f.alpha).collect();
    let vis0s: Vec<f64> = bias.iter().filter_map(|f| f.vis0).collect();
    write_rows(
        &dir.join(FIG_PARAMS),
        &["parameter", "value", "count"],
        value_counts("alpha", &alphas).into_iter().chain(value_counts("vis0", &vis0s)),
    )?;
    let shade: Vec<f64> = report.estimates.iter().map(|e| e.shade_ratio).collect();
    let cv: Vec<f64> = report.estimates.iter().filter_map(|e| e.daily_cv).collect();
    write_rows(
        &dir.join(FIG_SHADE),
        &["quantity", "bin_lo", "bin_hi", "count"],
        hist_rows("shade_ratio", &shade).into_iter().chain(hist_rows("daily_cv", &cv)),
    )?;
    let plaus: Vec<f64> = report
        .estimates
        .iter()
        .filter(|e| e.eligible_flag)
        .filter_map(|e| e.ogd_plausibility)
        .collect();
    write_rows(
        &dir.join(FIG_PLAUSIBILITY),
        &["quantity", "bin_lo", "bin_hi", "count"],
        hist_rows("signed_neg_log10_p", &plaus),
    )
}
