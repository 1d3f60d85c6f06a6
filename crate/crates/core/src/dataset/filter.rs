use serde::{Deserialize, Serialize};

use crate::stats;

use super::{BidderSeries, DatasetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterOptions {
    pub min_hours: usize,
    pub train_fraction: f64,
    pub min_length: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            min_hours: 100,
            train_fraction: 0.9,
            min_length: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub too_few_hours: usize,
    pub never_top_slot: usize,
    pub non_positive_bids: usize,
    pub zero_variance: usize,
    pub kept: usize,
}

/// Marks the first `⌊fraction·len⌋` hours as training data.
pub fn split_train_test(series: &BidderSeries, opts: &FilterOptions) -> Result<BidderSeries, DatasetError> {
    if series.len() < opts.min_length {
        return Err(DatasetError::TooShort(series.len()));
    }
    let mut s = series.clone();
    let end = (opts.train_fraction * s.len() as f64).floor() as usize;
    s.train_end = end.clamp(1, s.len() - 1);
    Ok(s)
}

fn has_variance(bids: &[f64]) -> bool {
    bids.len() >= 2 && stats::variance(bids) > 0.0
}

/// Keeps bidders active for enough hours, that won the top slot at least
/// once, bid only positive amounts and vary their bids in both the training
/// and the test window. The order of the checks fixes which counter a
/// dropped bidder lands in.
pub fn filter_bidders(series: Vec<BidderSeries>, opts: &FilterOptions) -> (Vec<BidderSeries>, FilterReport) {
    let mut report = FilterReport {
        input: series.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for s in series {
        if s.len() < opts.min_hours {
            report.too_few_hours += 1;
        } else if !s.won_top_slot {
            report.never_top_slot += 1;
        } else if s.hours.iter().any(|h| !(h.bid > 0.0)) {
            report.non_positive_bids += 1;
        } else if !has_variance(&s.bids()[..s.train_end]) || !has_variance(&s.bids()[s.train_end..]) {
            report.zero_variance += 1;
        } else {
            kept.push(s);
        }
    }
    report.kept = kept.len();
    (kept, report)
}
