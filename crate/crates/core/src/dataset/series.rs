use serde::{Deserialize, Serialize};

use crate::curves::HourlyCurveSet;

/// One active hour of a bidder: the hourly mean bid and the curves it faced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub hour: i64,
    pub bid: f64,
    pub curves: HourlyCurveSet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub n_auctions: u64,
    pub dropped_hours: usize,
}

/// A bidder's hourly bids aligned with the curves of each hour.
///
/// Rows `0..train_end` are the training window, the rest is test. `breaks`
/// lists row indices `k` for which the move from row `k − 1` to row `k` is
/// not a single update of the bidder (rows stitched from separate windows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderSeries {
    pub bidder_id: String,
    pub hours: Vec<HourRecord>,
    pub train_end: usize,
    pub won_top_slot: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breaks: Vec<usize>,
    #[serde(default)]
    pub meta: SeriesMeta,
}

impl BidderSeries {
    pub fn new(bidder_id: impl Into<String>, hours: Vec<HourRecord>) -> Self {
        let n = hours.len();
        BidderSeries {
            bidder_id: bidder_id.into(),
            hours,
            train_end: n,
            won_top_slot: true,
            breaks: Vec::new(),
            meta: SeriesMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn bids(&self) -> Vec<f64> {
        self.hours.iter().map(|h| h.bid).collect()
    }

    pub fn curves(&self) -> Vec<HourlyCurveSet> {
        self.hours.iter().map(|h| h.curves).collect()
    }

    pub fn train(&self) -> &[HourRecord] {
        &self.hours[..self.train_end]
    }

    pub fn test(&self) -> &[HourRecord] {
        &self.hours[self.train_end..]
    }

    pub fn test_len(&self) -> usize {
        self.hours.len() - self.train_end
    }

    pub fn mean_train_bid(&self) -> f64 {
        let t = self.train();
        t.iter().map(|h| h.bid).sum::<f64>() / t.len() as f64
    }

    /// Whether row `k − 1 → k` is a genuine one-hour update.
    pub fn is_step(&self, k: usize) -> bool {
        k >= 1 && !self.breaks.contains(&k)
    }

    /// Indices `k` in `1..end` such that `k − 1 → k` is a genuine update.
    pub fn steps(&self, end: usize) -> impl Iterator<Item = usize> + '_ {
        (1..end).filter(move |&k| self.is_step(k))
    }

    /// Copy of the first `end` rows, all of them marked as training data.
    pub fn prefix(&self, end: usize) -> BidderSeries {
        BidderSeries {
            bidder_id: self.bidder_id.clone(),
            hours: self.hours[..end].to_vec(),
            train_end: end,
            won_top_slot: self.won_top_slot,
            breaks: self.breaks.iter().copied().filter(|&k| k < end).collect(),
            meta: self.meta.clone(),
        }
    }
}
