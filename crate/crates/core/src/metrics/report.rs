use std::fmt::Write as _;
use std::io::Write;

use chrono::{DateTime, Utc};
use log::warn;
use serde::Serialize;

use super::{ape_sample, rmse_pool, stratify, Quartiles, Stratum};
use crate::error::{Error, Result};

/// One evaluated window: truth and forecast in mg/dl.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRecord {
    pub patient_id: String,
    pub anchor: DateTime<Utc>,
    /// Last observed value, which decides the strata.
    pub last_value: f64,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub horizon: usize,
    pub stratum: Stratum,
    pub count: usize,
    /// Quartiles of the per-sample APE (a fraction, not percent).
    pub ape: Option<Quartiles>,
    /// RMSE pooled over samples and steps, mg/dl.
    pub rmse: Option<f64>,
    /// Quartiles of the per-sample RMSE.
    pub rmse_spread: Option<Quartiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub horizons: Vec<usize>,
    pub cadence_secs: i64,
    /// Horizon-major, strata in [`Stratum::ALL`] order.
    pub cells: Vec<Cell>,
}

impl MetricsReport {
    pub fn cell(&self, horizon: usize, stratum: Stratum) -> Option<&Cell> {
        self.cells.iter().find(|c| c.horizon == horizon && c.stratum == stratum)
    }

    pub fn median_ape(&self, horizon: usize, stratum: Stratum) -> Option<f64> {
        self.cell(horizon, stratum)?.ape.map(|q| q.median)
    }

    pub fn minutes(&self, horizon: usize) -> i64 {
        horizon as i64 * self.cadence_secs / 60
    }
}

/// Fills every (horizon, stratum) cell. Horizon `h` scores the first `h`
/// forecast points of each window.
pub fn build_report(records: &[ForecastRecord], horizons: &[usize], cadence_secs: i64) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    if horizons.is_empty() {
        return Err(Error::Config("at least one horizon is required".into()));
    }
    let shortest = records
        .iter()
        .map(|r| r.prediction.len().min(r.truth.len()))
        .min()
        .unwrap_or(0);
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > shortest) {
        return Err(Error::Config(format!(
            "horizon {h} must lie in 1..={shortest} (forecast length)"
        )));
    }

    let strata: Vec<Vec<Stratum>> = records.iter().map(|r| stratify(r.last_value)).collect();
    let mut cells = Vec::with_capacity(horizons.len() * Stratum::ALL.len());
    for &h in horizons {
        let mut apes: Vec<Option<f64>> = Vec::with_capacity(records.len());
        let mut sq: Vec<Vec<f64>> = Vec::with_capacity(records.len());
        for r in records {
            let (t, p) = (&r.truth[..h], &r.prediction[..h]);
            apes.push(match ape_sample(t, p) {
                Ok(a) => Some(a),
                Err(e) => {
                    warn!("window of {} at {} left out of APE: {e}", r.patient_id, r.anchor);
                    None
                }
            });
            sq.push(t.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).collect());
        }
        for stratum in Stratum::ALL {
            let members: Vec<usize> = (0..records.len()).filter(|&i| strata[i].contains(&stratum)).collect();
            let ape_values: Vec<f64> = members.iter().filter_map(|&i| apes[i]).collect();
            let per_sample_rmse: Vec<f64> = members
                .iter()
                .map(|&i| (sq[i].iter().sum::<f64>() / h as f64).sqrt())
                .collect();
            cells.push(Cell {
                horizon: h,
                stratum,
                count: members.len(),
                ape: Quartiles::of(&ape_values),
                rmse: rmse_pool(members.iter().map(|&i| sq[i].as_slice())),
                rmse_spread: Quartiles::of(&per_sample_rmse),
            });
        }
    }
    Ok(MetricsReport {
        horizons: horizons.to_vec(),
        cadence_secs,
        cells,
    })
}

pub const REPORT_CSV_HEADER: &str = "method,horizon,minutes,stratum,metric,value,count";

/// Long-format rows; empty cells are written as `NA`.
pub fn write_report_csv<W: Write>(mut out: W, entries: &[(&str, &MetricsReport)]) -> std::io::Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for (method, report) in entries {
        for c in &report.cells {
            let metrics = [
                ("ape_median", c.ape.map(|q| q.median)),
                ("ape_q1", c.ape.map(|q| q.q1)),
                ("ape_q3", c.ape.map(|q| q.q3)),
                ("rmse", c.rmse),
                ("rmse_q1", c.rmse_spread.map(|q| q.q1)),
                ("rmse_q3", c.rmse_spread.map(|q| q.q3)),
            ];
            for (name, value) in metrics {
                let v = value.map_or_else(|| "NA".to_string(), |v| v.to_string());
                writeln!(
                    out,
                    "{method},{},{},{},{name},{v},{}",
                    c.horizon,
                    report.minutes(c.horizon),
                    c.stratum.label(),
                    c.count
                )?;
            }
        }
    }
    Ok(())
}

/// Aligned text: one block per stratum, one row per method, median APE (%)
/// and RMSE (mg/dl) for each horizon.
pub fn render_table(entries: &[(&str, &MetricsReport)]) -> String {
    let Some((_, first)) = entries.first() else {
        return String::new();
    };
    let name_w = entries.iter().map(|(m, _)| m.len()).max().unwrap_or(6).max(6) + 2;
    let mut s = String::new();
    for stratum in Stratum::ALL {
        let counts = entries
            .first()
            .and_then(|(_, r)| r.cell(first.horizons[0], stratum))
            .map_or(0, |c| c.count);
        let _ = writeln!(s, "{} (n = {counts})", stratum.label());
        let _ = write!(s, "{:name_w$}", "method");
        for &h in &first.horizons {
            let _ = write!(s, "{:>20}", format!("{} min", first.minutes(h)));
        }
        let _ = write!(s, "\n{:name_w$}", "");
        for _ in &first.horizons {
            let _ = write!(s, "{:>10}{:>10}", "APE %", "RMSE");
        }
        s.push('\n');
        for (method, report) in entries {
            let _ = write!(s, "{method:name_w$}");
            for &h in &first.horizons {
                let cell = report.cell(h, stratum);
                let ape = cell
                    .and_then(|c| c.ape)
                    .map_or("-".into(), |q| format!("{:.2}", 100.0 * q.median));
                let rmse = cell.and_then(|c| c.rmse).map_or("-".into(), |r| format!("{r:.2}"));
                let _ = write!(s, "{ape:>10}{rmse:>10}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record(last: f64, truth: Vec<f64>, prediction: Vec<f64>) -> ForecastRecord {
        ForecastRecord {
            patient_id: "p".into(),
            anchor: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            last_value: last,
            truth,
            prediction,
        }
    }

    fn ramp(base: f64, len: usize) -> Vec<f64> {
        (0..len).map(|i| base + i as f64).collect()
    }

    #[test]
    fn single_sample() {
        let truth = ramp(100.0, 12);
        let pred: Vec<f64> = truth.iter().map(|t| t * 1.1).collect();
        let r = build_report(&[record(120.0, truth, pred)], &[3, 6, 9, 12], 300).unwrap();
        let c = r.cell(6, Stratum::Full).unwrap();
        let q = c.ape.unwrap();
        assert!((q.median - 0.1).abs() < 1e-12);
        assert_eq!((q.q1, q.q3), (q.median, q.median));
        assert_eq!(c.count, 1);
        assert_eq!(r.cell(6, Stratum::Event).unwrap().count, 0);
        assert!(r.cell(6, Stratum::Event).unwrap().rmse.is_none());
        assert_eq!(r.minutes(6), 30);
        assert_eq!(r.cells.len(), 16);
    }

    #[test]
    fn horizon_uses_exactly_h_points() {
        // only the 7th point is wrong: invisible at h = 6, visible at h = 9
        let truth = vec![100.0; 12];
        let mut pred = truth.clone();
        pred[6] = 190.0;
        let r = build_report(&[record(100.0, truth, pred)], &[6, 9], 300).unwrap();
        assert_eq!(r.median_ape(6, Stratum::Full), Some(0.0));
        assert!((r.median_ape(9, Stratum::Full).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn strata_accounting_and_perfect_forecaster() {
        let lasts = [50.0, 65.0, 70.0, 120.0, 180.0, 181.0, 250.0];
        let records: Vec<_> = lasts.iter().map(|&l| record(l, ramp(l, 12), ramp(l, 12))).collect();
        let r = build_report(&records, &[3, 6, 9, 12], 300).unwrap();
        for h in [3, 6, 9, 12] {
            let n = |s| r.cell(h, s).unwrap().count;
            assert_eq!(n(Stratum::Hypo) + n(Stratum::Hyper), n(Stratum::Event));
            assert!(n(Stratum::Event) <= n(Stratum::Full));
            assert_eq!((n(Stratum::Hypo), n(Stratum::Hyper), n(Stratum::Full)), (2, 2, 7));
            for s in Stratum::ALL {
                let c = r.cell(h, s).unwrap();
                assert_eq!(c.ape.unwrap().median, 0.0);
                assert_eq!(c.rmse, Some(0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_report(&[], &[3], 300).is_err());
        let rec = record(100.0, vec![100.0; 6], vec![100.0; 6]);
        assert!(matches!(
            build_report(&[rec.clone()], &[12], 300),
            Err(Error::Config(_))
        ));
        assert!(build_report(&[rec], &[0], 300).is_err());
    }

    #[test]
    fn renderings() {
        let recs = vec![record(60.0, vec![100.0; 3], vec![75.0; 3])];
        let r = build_report(&recs, &[3], 300).unwrap();
        let mut csv = Vec::new();
        write_report_csv(&mut csv, &[("Persistence", &r)]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(REPORT_CSV_HEADER));
        assert!(text.contains("Persistence,3,15,Hypo,ape_median,0.25,1"));
        assert!(text.contains("Persistence,3,15,Hyper,rmse,NA,0"));
        assert_eq!(text.lines().count(), 1 + 4 * 6);
        let table = render_table(&[("Persistence", &r)]);
        assert!(table.contains("15 min"));
        assert!(table.contains("25.00"));
    }
}
