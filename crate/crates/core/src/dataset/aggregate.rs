use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curves::{fit_hour, CurvePoint};
use crate::par::par_map;

use super::ingest::RawRow;
use super::{BidderSeries, HourRecord, SeriesMeta};

#[derive(Debug, Default)]
struct HourAcc {
    points: Vec<CurvePoint>,
    /// auction id → (bid, |multiplier − 1|) of the row closest to the
    /// realised bid.
    auctions: BTreeMap<String, (f64, f64)>,
}

/// Collects raw rows by bidder and hour; rows may arrive in any order.
#[derive(Debug, Default)]
pub struct HourlyAggregator {
    bidders: BTreeMap<String, BTreeMap<i64, HourAcc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedHour {
    pub bidder_id: String,
    pub hour: i64,
    pub reason: String,
}

impl HourlyAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RawRow) {
        let hours = match self.bidders.get_mut(&row.bidder_id) {
            Some(h) => h,
            None => self.bidders.entry(row.bidder_id.clone()).or_default(),
        };
        let acc = hours.entry(row.timestamp_hour).or_default();
        acc.points.push(CurvePoint {
            bid: row.bid,
            click_prob: row.click_prob,
            cpc: row.cpc,
        });
        let realised = row.bid / row.multiplier;
        let dist = (row.multiplier - 1.0).abs();
        acc.auctions
            .entry(row.auction_id)
            .and_modify(|e| {
                if dist < e.1 {
                    *e = (realised, dist);
                }
            })
            .or_insert((realised, dist));
    }

    /// Fits the curves of every bidder-hour. Hours whose fit is degenerate
    /// are dropped and reported.
    pub fn finish(self) -> (Vec<BidderSeries>, Vec<DroppedHour>) {
        let bidders: Vec<(String, BTreeMap<i64, HourAcc>)> = self.bidders.into_iter().collect();
        let results = par_map(&bidders, |(id, hours)| build_series(id, hours));
        let mut series = Vec::with_capacity(results.len());
        let mut dropped = Vec::new();
        for (s, d) in results {
            series.push(s);
            dropped.extend(d);
        }
        (series, dropped)
    }
}

fn build_series(id: &str, hours: &BTreeMap<i64, HourAcc>) -> (BidderSeries, Vec<DroppedHour>) {
    let mut records = Vec::with_capacity(hours.len());
    let mut dropped = Vec::new();
    let mut n_auctions = 0u64;
    for (&hour, acc) in hours {
        let mut points = acc.points.clone();
        // Sorting makes the fit independent of row order.
        points.sort_by(|a, b| {
            a.bid
                .total_cmp(&b.bid)
                .then(a.click_prob.total_cmp(&b.click_prob))
                .then(a.cpc.total_cmp(&b.cpc))
        });
        let n = acc.auctions.len();
        let bid = acc.auctions.values().map(|v| v.0).sum::<f64>() / n as f64;
        match fit_hour(hour, &points, n as u32) {
            Ok(curves) => {
                n_auctions += n as u64;
                records.push(HourRecord { hour, bid, curves });
            }
            Err(e) => {
                log::info!("bidder {id}: dropping hour {hour}: {e}");
                dropped.push(DroppedHour {
                    bidder_id: id.to_string(),
                    hour,
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut s = BidderSeries::new(id, records);
    s.meta = SeriesMeta {
        n_auctions,
        dropped_hours: dropped.len(),
    };
    (s, dropped)
}

/// Hourly mean bids and fitted curves per bidder, sorted by bidder id.
pub fn aggregate_hourly(rows: impl IntoIterator<Item = RawRow>) -> (Vec<BidderSeries>, Vec<DroppedHour>) {
    let mut agg = HourlyAggregator::new();
    for r in rows {
        agg.push(r);
    }
    agg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_for(bidder: &str, hour: i64, auction: &str, bid: f64, a: f64, half: f64, slope: f64) -> Vec<RawRow> {
        [0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 5.0]
            .iter()
            .map(|&m| {
                let b = m * bid;
                RawRow {
                    bidder_id: bidder.into(),
                    timestamp_hour: hour,
                    auction_id: auction.into(),
                    multiplier: m,
                    bid: b,
                    click_prob: a * b / (half + b),
                    cpc: slope * b,
                }
            })
            .collect()
    }

    #[test]
    fn mean_bid_over_auctions() {
        let mut rows = rows_for("x", 3, "a1", 1.0, 0.2, 2.0, 0.5);
        let (s, _) = aggregate_hourly(rows.clone());
        assert_eq!(s[0].hours[0].bid, 1.0);
        rows.extend(rows_for("x", 3, "a2", 3.0, 0.2, 2.0, 0.5));
        let (s, _) = aggregate_hourly(rows);
        assert_eq!(s[0].hours[0].bid, 2.0);
        assert_eq!(s[0].hours[0].curves.n_auctions, 2);
    }

    #[test]
    fn degenerate_hours_are_dropped() {
        let mut rows = rows_for("x", 0, "a", 10.0, 0.2, 20.0, 0.5);
        let mut zero = rows_for("x", 1, "a", 10.0, 0.2, 20.0, 0.5);
        for r in &mut zero {
            r.click_prob = 0.0;
        }
        rows.extend(zero);
        let (s, dropped) = aggregate_hourly(rows);
        assert_eq!(s[0].len(), 1);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].hour, 1);
        assert_eq!(s[0].meta.dropped_hours, 1);
    }

    #[test]
    fn permutation_invariant() {
        let mut rows = Vec::new();
        for h in 0..5 {
            rows.extend(rows_for("y", h, "a", 10.0 + h as f64, 0.2, 20.0, 0.5));
            rows.extend(rows_for("y", h, "b", 10.0 + h as f64, 0.25, 20.0, 0.6));
            rows.extend(rows_for("x", h, "a", 7.0, 0.1, 15.0, 0.4));
        }
        let (fwd, _) = aggregate_hourly(rows.clone());
        rows.reverse();
        rows.swap(3, 40);
        let (rev, _) = aggregate_hourly(rows);
        assert_eq!(fwd, rev);
        assert_eq!(fwd[0].bidder_id, "x");
    }
}
