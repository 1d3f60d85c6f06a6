use crate::dataset::{local_hour, BidderSeries, HourRecord};
use crate::forecast::{Mode, PredictionRun};

use super::BaselineError;

/// Mean bid and count per local hour of day.
pub fn seasonal_profile(hours: &[HourRecord]) -> [(f64, usize); 24] {
    let mut acc = [(0.0, 0usize); 24];
    for h in hours {
        let slot = &mut acc[local_hour(h.hour) as usize];
        slot.0 += h.bid;
        slot.1 += 1;
    }
    acc.map(|(s, n)| (if n > 0 { s / n as f64 } else { f64::NAN }, n))
}

fn lookup(profile: &[(f64, usize); 24], hour: i64) -> Result<f64, BaselineError> {
    let h = local_hour(hour);
    let (mean, n) = profile[h as usize];
    if n < 2 {
        return Err(BaselineError::InsufficientCoverage { hour: h, found: n });
    }
    Ok(mean)
}

/// Predicts the mean training bid of the matching hour of day. Step-ahead,
/// the means also include the test hours already observed.
pub fn seasonal_mean(series: &BidderSeries, mode: Mode) -> Result<PredictionRun, BaselineError> {
    let test = series.test();
    let predictions = match mode {
        Mode::Series => {
            let profile = seasonal_profile(series.train());
            test.iter().map(|h| lookup(&profile, h.hour)).collect::<Result<_, _>>()?
        }
        Mode::Stepahead => (series.train_end..series.len())
            .map(|k| lookup(&seasonal_profile(&series.hours[..k]), series.hours[k].hour))
            .collect::<Result<_, _>>()?,
    };
    Ok(PredictionRun { mode, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{ClickCurve, CostCurve, HourlyCurveSet};

    fn series(bid: impl Fn(i64) -> f64, n: i64, train_end: usize) -> BidderSeries {
        let hours = (0..n)
            .map(|t| HourRecord {
                hour: t,
                bid: bid(t),
                curves: HourlyCurveSet::new(t, ClickCurve::new(0.2, 10.0), CostCurve::new(0.5), 1),
            })
            .collect();
        let mut s = BidderSeries::new("s", hours);
        s.train_end = train_end;
        s
    }

    #[test]
    fn periodic_bids_are_exact() {
        let s = series(|t| 1.0 + (t % 24) as f64, 24 * 5, 24 * 4);
        for mode in Mode::ALL {
            let run = seasonal_mean(&s, mode).unwrap();
            for (p, h) in run.predictions.iter().zip(s.test()) {
                assert_eq!(*p, h.bid);
            }
        }
    }

    #[test]
    fn level_shift_error_is_the_shift() {
        let s = series(|t| if t < 72 { 2.0 } else { 3.0 }, 96, 72);
        let run = seasonal_mean(&s, Mode::Series).unwrap();
        assert!(run.predictions.iter().zip(s.test()).all(|(p, h)| (h.bid - p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sparse_hours_are_reported() {
        let s = series(|_| 1.0, 30, 24);
        assert_eq!(
            seasonal_mean(&s, Mode::Series),
            Err(BaselineError::InsufficientCoverage { hour: 0, found: 1 })
        );
    }
}
