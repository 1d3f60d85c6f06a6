//! Raw-log ingestion, hourly aggregation, bidder filters, train/test split
//! and the day/night covariate-shift construction.

mod aggregate;
mod filter;
mod ingest;
mod series;
mod shift;

use std::path::Path;

use thiserror::Error;

pub use aggregate::{aggregate_hourly, DroppedHour, HourlyAggregator};
pub use filter::{filter_bidders, split_train_test, FilterOptions, FilterReport};
pub use ingest::{read_raw_log, read_raw_rows, read_top_slot_flags, write_raw_log, write_raw_rows, RawRow, RAW_COLUMNS};
pub use series::{BidderSeries, HourRecord, SeriesMeta};
pub use shift::{
    build_shift_dataset, calendar_day, local_hour, screen_day, shift_instances_for, DayScreen, ShiftInstance,
    ShiftOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("series too short to split ({0} hours)")]
    TooShort(usize),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub(crate) fn from_csv_write(e: csv::Error) -> Self {
        DatasetError::Io {
            path: String::new(),
            message: e.to_string(),
        }
    }
}
