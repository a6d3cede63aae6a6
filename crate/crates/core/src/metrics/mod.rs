//! Evaluation protocol: windowed APE and RMSE per horizon, glycemic strata,
//! quartiles, and autocorrelation.

mod acf;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

pub use acf::{autocorrelation, Autocorrelation, BAND_95_Z, BAND_99_Z};
pub use report::{
    build_report, render_table, write_report_csv, Cell, ForecastRecord, MetricsReport, REPORT_CSV_HEADER,
};

pub const HYPO_MGDL: f64 = 70.0;
pub const HYPER_MGDL: f64 = 180.0;
/// Forecast steps reported by default: 15, 30, 45 and 60 minutes.
pub const DEFAULT_HORIZONS: [usize; 4] = [3, 6, 9, 12];

/// Mean over the points of `|x − x̂| / x`.
pub fn ape_sample(truth: &[f64], prediction: &[f64]) -> Result<f64> {
    ensure_len("ape sample", truth.len(), prediction.len())?;
    if truth.is_empty() {
        return Err(Error::EmptyInput("ape sample"));
    }
    let mut sum = 0.0;
    for (&x, &p) in truth.iter().zip(prediction) {
        if !(x > 0.0) {
            return Err(Error::NonPositiveTruth(x));
        }
        sum += (x - p).abs() / x;
    }
    Ok(sum / truth.len() as f64)
}

/// Root of the mean over every pooled squared error; `None` when empty.
pub fn rmse_pool<'a>(samples: impl IntoIterator<Item = &'a [f64]>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for s in samples {
        sum += s.iter().sum::<f64>();
        n += s.len();
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stratum {
    Full,
    Event,
    Hypo,
    Hyper,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [Stratum::Full, Stratum::Event, Stratum::Hypo, Stratum::Hyper];

    pub fn label(self) -> &'static str {
        match self {
            Stratum::Full => "Full",
            Stratum::Event => "Event",
            Stratum::Hypo => "Hypo",
            Stratum::Hyper => "Hyper",
        }
    }
}

/// Strata of a window, decided by the last observed value (strict thresholds).
pub fn stratify(last_value: f64) -> Vec<Stratum> {
    if last_value < HYPO_MGDL {
        vec![Stratum::Full, Stratum::Event, Stratum::Hypo]
    } else if last_value > HYPER_MGDL {
        vec![Stratum::Full, Stratum::Event, Stratum::Hyper]
    } else {
        vec![Stratum::Full]
    }
}

/// Linear interpolation between order statistics at position `q·(n−1)`
/// (Hyndman–Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Quartiles {
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ape_examples() {
        assert_eq!(ape_sample(&[100.0, 200.0], &[110.0, 180.0]).unwrap(), 0.10);
        assert_eq!(ape_sample(&[90.0, 91.0], &[90.0, 91.0]).unwrap(), 0.0);
        assert!(matches!(ape_sample(&[0.0], &[1.0]), Err(Error::NonPositiveTruth(_))));
        assert!(ape_sample(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_examples() {
        let twos = [4.0, 4.0, 4.0];
        assert_eq!(rmse_pool([&twos[..], &twos[..]]), Some(2.0));
        let one = [9.0, 16.0];
        assert!((rmse_pool([&one[..]]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse_pool(std::iter::empty::<&[f64]>()), None);
    }

    #[test]
    fn strata() {
        assert_eq!(stratify(65.0), vec![Stratum::Full, Stratum::Event, Stratum::Hypo]);
        assert_eq!(stratify(120.0), vec![Stratum::Full]);
        assert_eq!(stratify(200.0), vec![Stratum::Full, Stratum::Event, Stratum::Hyper]);
        assert_eq!(stratify(70.0), vec![Stratum::Full]);
        assert_eq!(stratify(180.0), vec![Stratum::Full]);
    }

    #[test]
    fn quartile_interpolation() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        let single = Quartiles::of(&[0.3]).unwrap();
        assert_eq!((single.q1, single.median, single.q3), (0.3, 0.3, 0.3));
        assert!(Quartiles::of(&[]).is_none());
    }

    proptest! {
        #[test]
        fn ape_is_scale_invariant(
            pairs in prop::collection::vec((40.0f64..400.0, 40.0f64..400.0), 1..12),
            k in 0.1f64..10.0,
        ) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ts: Vec<f64> = t.iter().map(|x| x * k).collect();
            let ps: Vec<f64> = p.iter().map(|x| x * k).collect();
            let a = ape_sample(&t, &p).unwrap();
            let b = ape_sample(&ts, &ps).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn rmse_scales_linearly(errs in prop::collection::vec(-50.0f64..50.0, 1..30), k in 0.1f64..10.0) {
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            let sq_k: Vec<f64> = errs.iter().map(|e| (k * e) * (k * e)).collect();
            let a = rmse_pool([&sq[..]]).unwrap();
            let b = rmse_pool([&sq_k[..]]).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-9 * b.max(1.0));
        }

        #[test]
        fn quartiles_ignore_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), seed in 0u64..1000) {
            let q = Quartiles::of(&v).unwrap();
            let mut rng = crate::numerics::RngState::new(seed);
            rng.shuffle(&mut v);
            prop_assert_eq!(Quartiles::of(&v).unwrap(), q);
            prop_assert!(q.q1 <= q.median && q.median <= q.q3);
        }
    }
}
