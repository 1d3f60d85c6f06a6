//! Day/night covariate-shift tasks.
//!
//! A bidder-day qualifies when the bidder was active in all 24 hours, its
//! bids vary enough over the day, and its daytime bids are distributed
//! differently from — and on average above — all of its night bids. Each
//! qualifying day becomes a forecasting task: train on night hours, predict
//! the twelve day hours.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{self, ks_two_sample, welch_t_test};

use super::{BidderSeries, HourRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftOptions {
    /// First day hour (local clock).
    pub day_start: u32,
    /// Last day hour, inclusive.
    pub day_end: u32,
    pub ks_alpha: f64,
    pub t_alpha: f64,
    pub min_cv: f64,
    /// Bidders with fewer active hours are skipped.
    pub min_hours: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions {
            day_start: 10,
            day_end: 21,
            ks_alpha: 0.001,
            t_alpha: 0.05,
            min_cv: 0.1,
            min_hours: 100,
        }
    }
}

impl ShiftOptions {
    pub fn is_day(&self, local_hour: u32) -> bool {
        (self.day_start..=self.day_end).contains(&local_hour)
    }

    fn day_len(&self) -> usize {
        (self.day_end + 1 - self.day_start) as usize
    }
}

pub fn calendar_day(hour: i64) -> i64 {
    hour.div_euclid(24)
}

pub fn local_hour(hour: i64) -> u32 {
    hour.rem_euclid(24) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftInstance {
    pub bidder_id: String,
    pub test_day: i64,
    /// Bids of the 24 hours of the test day, midnight first.
    pub day_bids: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub t_statistic: f64,
    pub t_p: f64,
    /// Night hours as training rows, then the day hours as test rows.
    pub series: BidderSeries,
}

/// Outcome of the statistical screen for one candidate day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayScreen {
    pub cv: f64,
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub t_statistic: f64,
    pub t_p: f64,
    pub accepted: bool,
}

/// Screens a day's bids against the pooled night bids.
pub fn screen_day(all_day: &[f64], day: &[f64], night: &[f64], opts: &ShiftOptions) -> DayScreen {
    let cv = stats::coefficient_of_variation(all_day);
    let ks = ks_two_sample(day, night);
    let t = welch_t_test(day, night);
    let accepted = cv >= opts.min_cv
        && ks.p_value < opts.ks_alpha
        && t.p_value < opts.t_alpha
        && stats::mean(day) > stats::mean(night);
    DayScreen {
        cv,
        ks_statistic: ks.statistic,
        ks_p: ks.p_value,
        t_statistic: t.statistic,
        t_p: t.p_value,
        accepted,
    }
}

/// Night block of an hour: the night running into calendar day `d` (from the
/// evening before until the morning of `d`) gets id `d`.
fn night_block(hour: i64, opts: &ShiftOptions) -> i64 {
    calendar_day(hour + (24 - opts.day_end as i64 - 1))
}

/// Candidate-day enumeration and screening for one bidder.
pub fn shift_instances_for(series: &BidderSeries, opts: &ShiftOptions) -> Vec<ShiftInstance> {
    if series.len() < opts.min_hours || !series.won_top_slot || series.hours.iter().any(|h| !(h.bid > 0.0)) {
        return Vec::new();
    }
    let nights: Vec<&HourRecord> = series
        .hours
        .iter()
        .filter(|h| !opts.is_day(local_hour(h.hour)))
        .collect();
    let night_bids: Vec<f64> = nights.iter().map(|h| h.bid).collect();
    if night_bids.len() < 2 {
        return Vec::new();
    }
    let mut by_day: BTreeMap<i64, Vec<&HourRecord>> = BTreeMap::new();
    for h in &series.hours {
        by_day.entry(calendar_day(h.hour)).or_default().push(h);
    }
    let mut out = Vec::new();
    for (&day, rows) in &by_day {
        if rows.len() != 24 {
            continue;
        }
        let all: Vec<f64> = rows.iter().map(|h| h.bid).collect();
        let day_rows: Vec<&HourRecord> = rows
            .iter()
            .copied()
            .filter(|h| opts.is_day(local_hour(h.hour)))
            .collect();
        if day_rows.len() != opts.day_len() {
            continue;
        }
        let day_bids: Vec<f64> = day_rows.iter().map(|h| h.bid).collect();
        let screen = screen_day(&all, &day_bids, &night_bids, opts);
        if !screen.accepted {
            continue;
        }
        out.push(ShiftInstance {
            bidder_id: series.bidder_id.clone(),
            test_day: day,
            day_bids: all,
            ks_statistic: screen.ks_statistic,
            ks_p: screen.ks_p,
            t_statistic: screen.t_statistic,
            t_p: screen.t_p,
            series: task_series(series, &nights, &day_rows, day, opts),
        });
    }
    out
}

/// Night rows in time order with the test day's own night block moved last,
/// so training ends on the hour just before the day window; then the day
/// rows. Rows that do not follow their predecessor within one night block
/// are marked as breaks.
fn task_series(
    series: &BidderSeries,
    nights: &[&HourRecord],
    day_rows: &[&HourRecord],
    day: i64,
    opts: &ShiftOptions,
) -> BidderSeries {
    let (own, other): (Vec<&HourRecord>, Vec<&HourRecord>) =
        nights.iter().copied().partition(|h| night_block(h.hour, opts) == day);
    let mut hours: Vec<HourRecord> = other.into_iter().chain(own).map(|h| *h).collect();
    let train_end = hours.len();
    hours.extend(day_rows.iter().map(|h| **h));
    let mut breaks = Vec::new();
    for k in 1..hours.len() {
        let (prev, cur) = (hours[k - 1].hour, hours[k].hour);
        let same_block = night_block(prev, opts) == night_block(cur, opts) && cur > prev;
        let into_day = k == train_end && cur == prev + 1;
        if !(same_block || (k > train_end && cur > prev) || into_day) {
            breaks.push(k);
        }
    }
    BidderSeries {
        bidder_id: format!("{}@{}", series.bidder_id, day),
        hours,
        train_end,
        won_top_slot: series.won_top_slot,
        breaks,
        meta: series.meta.clone(),
    }
}

/// All qualifying shift tasks, ordered by bidder and day.
pub fn build_shift_dataset(series: &[BidderSeries], opts: &ShiftOptions) -> Vec<ShiftInstance> {
    crate::par::par_map(series, |s| shift_instances_for(s, opts))
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{ClickCurve, CostCurve, HourlyCurveSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal};

    fn series(days: i64, bid: impl Fn(i64) -> f64) -> BidderSeries {
        let hours = (0..days * 24)
            .map(|t| HourRecord {
                hour: t,
                bid: bid(t),
                curves: HourlyCurveSet::new(t, ClickCurve::new(0.2, 10.0), CostCurve::new(0.5), 1),
            })
            .collect();
        BidderSeries::new("s", hours)
    }

    fn wobble(t: i64) -> f64 {
        1.0 + 0.03 * ((t * 7919) % 13) as f64 / 13.0
    }

    #[test]
    fn clear_uplift_is_accepted() {
        let s = series(10, |t| if (10..=21).contains(&local_hour(t)) { 1.3 * wobble(t) } else { wobble(t) });
        let inst = shift_instances_for(&s, &ShiftOptions::default());
        assert_eq!(inst.len(), 10);
        let first = &inst[0];
        assert_eq!(first.series.test_len(), 12);
        assert!(first.ks_p < 0.001 && first.t_p < 0.05);
        // Training ends at 09:00 of the test day.
        let last_train = first.series.hours[first.series.train_end - 1].hour;
        assert_eq!(local_hour(last_train), 9);
        assert_eq!(calendar_day(last_train), first.test_day);
        assert_eq!(first.series.hours[first.series.train_end].hour, last_train + 1);
        assert_eq!(first.day_bids.len(), 24);
    }

    #[test]
    fn breaks_separate_night_blocks() {
        let s = series(5, |t| if (10..=21).contains(&local_hour(t)) { 1.3 * wobble(t) } else { wobble(t) });
        let inst = shift_instances_for(&s, &ShiftOptions::default());
        let task = &inst[1].series;
        for &k in &task.breaks {
            assert!(k < task.train_end);
        }
        for k in 1..task.len() {
            if !task.breaks.contains(&k) {
                assert_eq!(task.hours[k].hour, task.hours[k - 1].hour + 1, "row {k}");
            }
        }
        // Test day 1 has its own night block moved to the end of training.
        assert!(!task.breaks.is_empty());
    }

    #[test]
    fn lower_day_is_rejected() {
        let s = series(10, |t| if (10..=21).contains(&local_hour(t)) { 0.7 * wobble(t) } else { wobble(t) });
        assert!(shift_instances_for(&s, &ShiftOptions::default()).is_empty());
    }

    #[test]
    fn incomplete_days_are_skipped() {
        let mut s = series(10, |t| if (10..=21).contains(&local_hour(t)) { 1.3 * wobble(t) } else { wobble(t) });
        s.hours.retain(|h| h.hour != 24 * 3 + 5);
        assert_eq!(shift_instances_for(&s, &ShiftOptions::default()).len(), 9);
    }

    #[test]
    fn identical_distributions_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ln = LogNormal::new(0.0, 0.3).unwrap();
        let bids: Vec<f64> = (0..24 * 10).map(|_| ln.sample(&mut rng)).collect();
        let s = series(10, |t| bids[t as usize]);
        assert!(shift_instances_for(&s, &ShiftOptions::default()).is_empty());
    }
}
