//! Synthetic repeated-auction markets with known ground truth.
//!
//! Competition is exogenous: every bidder faces its own stream of hourly
//! click and cost curves (a base level, a diurnal cycle, hourly noise and an
//! optional daytime shift) and updates its bid with a learning rule against
//! the hour's mean curves, plus multiplicative noise. Every auction of an
//! hour is logged at twelve multiples of the realised bid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::curves::{ClickCurve, CostCurve, HourlyCurveSet};
use crate::dataset::{local_hour, RawRow};
use crate::forecast::{br_bid, BiasParams, Bounds, FittedRule, RuleKind};
use crate::par::par_map_range;
use crate::utility::{curvature_ql, visibility, BiasSign, QuasiLinearParams};

/// Bid multiples at which every auction is logged.
pub const MULTIPLIERS: [f64; 12] = [0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftScenario {
    #[default]
    None,
    DayNight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub n_bidders: usize,
    pub horizon_hours: usize,
    /// Hour index of the first simulated hour; hour 0 is midnight.
    pub start_hour: i64,
    pub auctions_per_hour: f64,
    /// Base click saturation level.
    pub curve_a: Range,
    /// Base half-saturation bid, in cents.
    pub curve_half: Range,
    /// Base cost-per-click per unit bid.
    pub curve_slope: Range,
    /// Relative amplitude of the daily cycle of the cost slope and the
    /// half-saturation bid.
    pub diurnal_amplitude: f64,
    /// Per-auction lognormal jitter of click scale and cost slope.
    pub jitter_sd: f64,
    /// Hour-to-hour lognormal noise of all three curve parameters.
    pub hour_noise_sd: f64,
    /// Random-walk drift of the log click scale and log cost slope per hour.
    pub drift_sd: f64,
    pub shift_scenario: ShiftScenario,
    /// Relative rise of the best-reply bid during day hours under the
    /// day/night scenario.
    pub day_uplift: f64,
    pub day_start: u32,
    pub day_end: u32,
    /// A bidder counts as having won the top slot if its visibility reached
    /// this level in some hour.
    pub top_slot_visibility: f64,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            n_bidders: 20,
            horizon_hours: 240,
            start_hour: 0,
            auctions_per_hour: 4.0,
            curve_a: Range::new(0.05, 0.3),
            curve_half: Range::new(20.0, 80.0),
            curve_slope: Range::new(0.3, 0.7),
            diurnal_amplitude: 0.1,
            jitter_sd: 0.1,
            hour_noise_sd: 0.2,
            drift_sd: 0.0,
            shift_scenario: ShiftScenario::None,
            day_uplift: 0.2,
            day_start: 10,
            day_end: 21,
            top_slot_visibility: 0.3,
            seed: 7,
        }
    }
}

/// How ground-truth bidders are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    /// Rules with relative weights.
    pub rules: Vec<(RuleKind, f64)>,
    /// Value per click, in cents.
    pub value: Range,
    pub bid_noise_sd: f64,
    /// Step size as a fraction of the inverse utility curvature at the
    /// best reply, for gradient rules.
    pub step_fraction: Range,
    /// FTRL: relative pull of the regulariser towards zero at the best reply.
    pub ftrl_shrink: Range,
    pub beta: f64,
    /// Spread of the initial bid around the best reply.
    pub initial_spread: f64,
    pub bias_alpha: f64,
    pub bias_vis0: f64,
    pub bias_sign: BiasSign,
    /// Bid cap as a multiple of the base best reply.
    pub cap_multiple: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            rules: vec![(RuleKind::Ogd, 1.0)],
            value: Range::new(50.0, 200.0),
            bid_noise_sd: 0.05,
            step_fraction: Range::new(0.1, 0.5),
            ftrl_shrink: Range::new(0.02, 0.08),
            beta: 0.9,
            initial_spread: 0.1,
            bias_alpha: 50.0,
            bias_vis0: 0.5,
            bias_sign: BiasSign::Repel,
            cap_multiple: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseCurves {
    pub a: f64,
    pub half: f64,
    pub slope: f64,
}

impl BaseCurves {
    pub fn curve_set(&self, hour: i64) -> HourlyCurveSet {
        HourlyCurveSet::new(hour, ClickCurve::new(self.a, self.half), CostCurve::new(self.slope), 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBidder {
    pub bidder_id: String,
    pub value: f64,
    pub rule: RuleKind,
    pub eta: Option<f64>,
    pub beta: f64,
    pub bias: Option<BiasParams>,
    pub bid_noise_sd: f64,
    pub base: BaseCurves,
    pub initial_bid: f64,
    pub bid_cap: f64,
}

impl GroundTruthBidder {
    /// The bidder's update rule as a forecaster.
    pub fn rule(&self) -> FittedRule {
        FittedRule {
            kind: self.rule,
            value: self.value,
            eta: self.eta,
            beta: self.beta,
            bias: self.bias,
            bounds: Bounds::new(self.bid_cap),
        }
    }
}

/// Best reply to the base curves; the natural bid scale of a bidder.
pub fn base_best_reply(value: f64, base: &BaseCurves) -> f64 {
    // Closed form of the maximiser of (v − s·b)·a·b/(c + b).
    let c = base.half;
    -c + (c * c + c * value / base.slope).sqrt()
}

pub fn bidder_id(i: usize) -> String {
    format!("b{:04}", i + 1)
}

/// Draws the ground-truth population.
pub fn sample_bidders(market: &MarketConfig, pop: &PopulationConfig) -> Vec<GroundTruthBidder> {
    let mut rng = ChaCha8Rng::seed_from_u64(market.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let total: f64 = pop.rules.iter().map(|r| r.1).sum();
    (0..market.n_bidders)
        .map(|i| {
            let mut u = rng.random::<f64>() * total;
            let mut rule = pop.rules.last().map_or(RuleKind::Ogd, |r| r.0);
            for &(k, w) in &pop.rules {
                if u < w {
                    rule = k;
                    break;
                }
                u -= w;
            }
            let base = BaseCurves {
                a: market.curve_a.sample(&mut rng),
                half: market.curve_half.sample(&mut rng),
                slope: market.curve_slope.sample(&mut rng),
            };
            let value = pop.value.sample(&mut rng);
            let br = base_best_reply(value, &base);
            let curv = curvature_ql(&QuasiLinearParams { value }, &base.curve_set(0), br).abs();
            let frac = pop.step_fraction.sample(&mut rng);
            let shrink = pop.ftrl_shrink.sample(&mut rng);
            let eta = match rule {
                RuleKind::Ogd | RuleKind::OgdBias | RuleKind::BrReg => Some(frac / curv),
                RuleKind::Ftrl => Some((1.0 - shrink) * (1.0 - pop.beta) / (curv * shrink)),
                _ => None,
            };
            let bias = (rule == RuleKind::OgdBias).then_some(BiasParams {
                alpha: pop.bias_alpha,
                vis0: pop.bias_vis0,
                sign: pop.bias_sign,
            });
            let initial_bid = br * (pop.initial_spread * normal.sample(&mut rng)).exp();
            GroundTruthBidder {
                bidder_id: bidder_id(i),
                value,
                rule,
                eta,
                beta: pop.beta,
                bias,
                bid_noise_sd: pop.bid_noise_sd,
                base,
                initial_bid,
                bid_cap: pop.cap_multiple * br,
            }
        })
        .collect()
}

/// One simulated hour of one bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHour {
    pub hour: i64,
    pub bid: f64,
    pub half: f64,
    /// `(click scale, cost slope)` of each auction.
    pub auctions: Vec<(f64, f64)>,
}

impl SimHour {
    /// Mean curves of the hour, which the pooled hourly fit reproduces.
    pub fn mean_curves(&self) -> HourlyCurveSet {
        let n = self.auctions.len() as f64;
        let a = self.auctions.iter().map(|x| x.0).sum::<f64>() / n;
        let s = self.auctions.iter().map(|x| x.1).sum::<f64>() / n;
        HourlyCurveSet::new(self.hour, ClickCurve::new(a, self.half), CostCurve::new(s), self.auctions.len() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBidderLog {
    pub bidder_id: String,
    pub won_top_slot: bool,
    /// Active hours only.
    pub hours: Vec<SimHour>,
}

impl SimBidderLog {
    pub fn rows(&self) -> impl Iterator<Item = RawRow> + '_ {
        self.hours.iter().flat_map(move |h| {
            h.auctions.iter().enumerate().flat_map(move |(j, &(a, s))| {
                MULTIPLIERS.iter().map(move |&m| {
                    let b = m * h.bid;
                    RawRow {
                        bidder_id: self.bidder_id.clone(),
                        timestamp_hour: h.hour,
                        auction_id: format!("{}-{}", h.hour, j),
                        multiplier: m,
                        bid: b,
                        click_prob: a * b / (h.half + b),
                        cpc: s * b,
                    }
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAuctionLog {
    pub bidders: Vec<SimBidderLog>,
}

impl RawAuctionLog {
    /// Rows ordered by bidder, hour, auction and multiplier.
    pub fn rows(&self) -> impl Iterator<Item = RawRow> + '_ {
        self.bidders.iter().flat_map(|b| b.rows())
    }
}

/// Ground truth written next to a simulated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub market: MarketConfig,
    pub bidders: Vec<GroundTruthBidder>,
    pub won_top_slot: std::collections::BTreeMap<String, bool>,
}

/// Cost-slope factor that raises the base best reply by `1 + uplift`.
pub fn day_slope_factor(value: f64, base: &BaseCurves, uplift: f64) -> f64 {
    // From the first-order condition, s = c·v / (b² + 2bc) at the best reply b.
    let c = base.half;
    let b = base_best_reply(value, base);
    let b2 = (1.0 + uplift) * b;
    (b * b + 2.0 * b * c) / (b2 * b2 + 2.0 * b2 * c)
}

/// Simulates one bidder on its own random substream.
pub fn simulate_bidder(market: &MarketConfig, bidder: &GroundTruthBidder, index: usize) -> SimBidderLog {
    let mut rng = ChaCha8Rng::seed_from_u64(market.seed);
    rng.set_stream(index as u64 + 1);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let poisson = (market.auctions_per_hour > 0.0).then(|| Poisson::new(market.auctions_per_hour).expect("positive rate"));
    let rule = bidder.rule();
    let day_factor = match market.shift_scenario {
        ShiftScenario::DayNight => day_slope_factor(bidder.value, &bidder.base, market.day_uplift),
        ShiftScenario::None => 1.0,
    };
    let floor = 1e-3 * base_best_reply(bidder.value, &bidder.base);

    let mut bid = bidder.initial_bid;
    let mut history: Vec<HourlyCurveSet> = Vec::with_capacity(market.horizon_hours);
    let mut hours = Vec::with_capacity(market.horizon_hours);
    let (mut drift_a, mut drift_s) = (0.0, 0.0);
    let mut won_top_slot = false;
    for t in 0..market.horizon_hours {
        let hour = market.start_hour + t as i64;
        let lh = local_hour(hour);
        let phase = 2.0 * PI * lh as f64 / 24.0;
        drift_a += market.drift_sd * normal.sample(&mut rng);
        drift_s += market.drift_sd * normal.sample(&mut rng);
        let mut e = [0.0; 3];
        for x in &mut e {
            *x = market.hour_noise_sd * normal.sample(&mut rng);
        }
        let is_day = (market.day_start..=market.day_end).contains(&lh);
        let shift = if is_day { day_factor } else { 1.0 };
        let a = bidder.base.a * (drift_a + e[0]).exp();
        let half = bidder.base.half * (1.0 + market.diurnal_amplitude * phase.cos()) * e[1].exp();
        let slope = bidder.base.slope * (1.0 + market.diurnal_amplitude * phase.sin()) * shift * (drift_s + e[2]).exp();

        let n = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let auctions: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let ja = (market.jitter_sd * normal.sample(&mut rng)).exp();
                let js = (market.jitter_sd * normal.sample(&mut rng)).exp();
                (a * ja, slope * js)
            })
            .collect();
        let noise = normal.sample(&mut rng);
        if auctions.is_empty() {
            // Inactive hour: no auctions, the bid carries over.
            continue;
        }
        let h = SimHour { hour, bid, half, auctions };
        let curves = h.mean_curves();
        won_top_slot |= visibility(&curves, bid) >= market.top_slot_visibility;
        history.push(curves);
        hours.push(h);
        let next = rule.next_bid(bid, &history);
        bid = (next * (bidder.bid_noise_sd * noise).exp()).max(floor);
    }
    SimBidderLog {
        bidder_id: bidder.bidder_id.clone(),
        won_top_slot,
        hours,
    }
}

/// Simulates every bidder; bidders run in parallel on independent streams,
/// so the log does not depend on the thread count.
pub fn generate_market(market: &MarketConfig, bidders: &[GroundTruthBidder]) -> RawAuctionLog {
    RawAuctionLog {
        bidders: par_map_range(bidders.len(), |i| simulate_bidder(market, &bidders[i], i)),
    }
}

/// Market with the day/night shift switched on.
pub fn generate_shift_market(market: &MarketConfig, bidders: &[GroundTruthBidder]) -> RawAuctionLog {
    let mut m = market.clone();
    m.shift_scenario = ShiftScenario::DayNight;
    generate_market(&m, bidders)
}

pub fn ground_truth(market: &MarketConfig, bidders: &[GroundTruthBidder], log: &RawAuctionLog) -> GroundTruth {
    GroundTruth {
        market: market.clone(),
        bidders: bidders.to_vec(),
        won_top_slot: log.bidders.iter().map(|b| (b.bidder_id.clone(), b.won_top_slot)).collect(),
    }
}

/// Best reply of the bidder to the curves of one hour, for diagnostics.
pub fn hour_best_reply(bidder: &GroundTruthBidder, curves: &HourlyCurveSet) -> f64 {
    br_bid(bidder.value, curves, Bounds::new(bidder.bid_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{fit_click_curve, fit_cost_curve, CurvePoint};

    fn small(n: usize, hours: usize) -> MarketConfig {
        MarketConfig {
            n_bidders: n,
            horizon_hours: hours,
            ..Default::default()
        }
    }

    #[test]
    fn frozen_noiseless_bidder_is_constant() {
        let m = small(3, 50);
        let pop = PopulationConfig {
            bid_noise_sd: 0.0,
            ..Default::default()
        };
        let mut bidders = sample_bidders(&m, &pop);
        for b in &mut bidders {
            b.eta = Some(0.0);
        }
        let log = generate_market(&m, &bidders);
        for (b, l) in bidders.iter().zip(&log.bidders) {
            assert!(l.hours.iter().all(|h| h.bid == b.initial_bid));
        }
    }

    #[test]
    fn multipliers_and_row_layout() {
        let m = small(2, 5);
        let bidders = sample_bidders(&m, &PopulationConfig::default());
        let log = generate_market(&m, &bidders);
        let rows: Vec<RawRow> = log.rows().collect();
        let n_auctions: usize = log.bidders.iter().flat_map(|b| &b.hours).map(|h| h.auctions.len()).sum();
        assert_eq!(rows.len(), 12 * n_auctions);
        for chunk in rows.chunks(12) {
            let ms: Vec<f64> = chunk.iter().map(|r| r.multiplier).collect();
            assert_eq!(ms, MULTIPLIERS.to_vec());
        }
    }

    #[test]
    fn single_auction_points_are_realisable() {
        let m = small(1, 10);
        let bidders = sample_bidders(&m, &PopulationConfig::default());
        let log = generate_market(&m, &bidders);
        let h = &log.bidders[0].hours[0];
        let (a, s) = h.auctions[0];
        let pts: Vec<CurvePoint> = MULTIPLIERS
            .iter()
            .map(|&mu| {
                let b = mu * h.bid;
                CurvePoint { bid: b, click_prob: a * b / (h.half + b), cpc: s * b }
            })
            .collect();
        let c = fit_click_curve(&pts).unwrap();
        assert!((c.a / a - 1.0).abs() < 1e-6 && (c.half / h.half - 1.0).abs() < 1e-6);
        assert!((fit_cost_curve(&pts).unwrap().slope / s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let m = small(6, 30);
        let bidders = sample_bidders(&m, &PopulationConfig::default());
        let a = crate::par::with_jobs(1, || generate_market(&m, &bidders));
        let b = crate::par::with_jobs(3, || generate_market(&m, &bidders));
        assert_eq!(a, b);
    }

    #[test]
    fn day_factor_hits_uplift() {
        let base = BaseCurves { a: 0.2, half: 40.0, slope: 0.5 };
        let f = day_slope_factor(120.0, &base, 0.2);
        let shifted = BaseCurves { slope: base.slope * f, ..base };
        let ratio = base_best_reply(120.0, &shifted) / base_best_reply(120.0, &base);
        assert!((ratio - 1.2).abs() < 1e-12);
    }

    #[test]
    fn no_uplift_no_noise_day_equals_night() {
        let m = MarketConfig {
            n_bidders: 2,
            horizon_hours: 72,
            diurnal_amplitude: 0.0,
            hour_noise_sd: 0.0,
            jitter_sd: 0.0,
            day_uplift: 0.0,
            ..Default::default()
        };
        let pop = PopulationConfig { bid_noise_sd: 0.0, ..Default::default() };
        let bidders = sample_bidders(&m, &pop);
        let plain = generate_market(&m, &bidders);
        let shifted = generate_shift_market(&m, &bidders);
        assert_eq!(plain, shifted);
    }
}
