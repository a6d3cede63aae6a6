use std::ops::Range;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{extract_time_features, PatientSeries, TimeFeatures, CADENCE_SECS, GAP_TOLERANCE_SECS};
use crate::error::{Error, Result};

/// A patient's readings with precomputed calendar features. Windows are
/// views into a shared segment rather than copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub patient_id: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
    pub features: Vec<TimeFeatures>,
}

impl Segment {
    pub fn from_series(series: &PatientSeries) -> Self {
        let timestamps: Vec<_> = series.readings.iter().map(|r| r.timestamp).collect();
        Segment {
            patient_id: series.patient_id.clone(),
            features: timestamps.iter().map(|&t| extract_time_features(t)).collect(),
            values: series.readings.iter().map(|r| r.glucose).collect(),
            timestamps,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec {
    pub t0: usize,
    pub tau: usize,
    pub cadence_secs: i64,
    pub tolerance_secs: i64,
}

impl WindowSpec {
    pub fn new(t0: usize, tau: usize) -> Self {
        WindowSpec {
            t0,
            tau,
            cadence_secs: CADENCE_SECS,
            tolerance_secs: GAP_TOLERANCE_SECS,
        }
    }

    pub fn len(&self) -> usize {
        self.t0 + self.tau
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_contiguous(&self, a: DateTime<Utc>, b: DateTime<Utc>) -> bool {
        ((b - a).num_seconds() - self.cadence_secs).abs() <= self.tolerance_secs
    }
}

/// `t0` encoder readings followed by `tau` targets, all contiguous.
#[derive(Clone, Debug)]
pub struct WindowSample {
    /// Row in the model's patient table, `None` when the patient is unregistered.
    pub patient: Option<usize>,
    segment: Arc<Segment>,
    start: usize,
    t0: usize,
    tau: usize,
}

impl WindowSample {
    /// Validates that the `t0 + tau` readings from `start` are contiguous.
    pub fn new(segment: Arc<Segment>, patient: Option<usize>, start: usize, spec: &WindowSpec) -> Result<Self> {
        let end = start + spec.len();
        if spec.t0 == 0 || spec.tau == 0 {
            return Err(Error::Config("t0 and tau must be at least 1".into()));
        }
        if end > segment.len() {
            return Err(Error::InsufficientData(format!(
                "window needs {} readings from position {start}, segment has {}",
                spec.len(),
                segment.len()
            )));
        }
        for i in start + 1..end {
            let (a, b) = (segment.timestamps[i - 1], segment.timestamps[i]);
            if !spec.is_contiguous(a, b) {
                return Err(Error::Gap {
                    position: i - 1 - start,
                    seconds: (b - a).num_seconds(),
                });
            }
        }
        Ok(WindowSample {
            patient,
            segment,
            start,
            t0: spec.t0,
            tau: spec.tau,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.segment.patient_id
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Encoder readings in mg/dl, oldest first.
    pub fn history(&self) -> &[f64] {
        &self.segment.values[self.start..self.start + self.t0]
    }

    /// Future readings in mg/dl.
    pub fn targets(&self) -> &[f64] {
        &self.segment.values[self.start + self.t0..self.start + self.t0 + self.tau]
    }

    /// Calendar features for all `t0 + tau` positions.
    pub fn features(&self) -> &[TimeFeatures] {
        &self.segment.features[self.start..self.start + self.t0 + self.tau]
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.segment.timestamps[self.start..self.start + self.t0 + self.tau]
    }

    /// Time of the last observed reading.
    pub fn anchor(&self) -> DateTime<Utc> {
        self.segment.timestamps[self.start + self.t0 - 1]
    }

    /// Last observed value in mg/dl, which decides the evaluation stratum.
    pub fn last_value(&self) -> f64 {
        self.segment.values[self.start + self.t0 - 1]
    }
}

/// Maximal index ranges whose consecutive readings are contiguous.
pub fn contiguous_runs(timestamps: &[DateTime<Utc>], spec: &WindowSpec) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    if timestamps.is_empty() {
        return runs;
    }
    let mut begin = 0;
    for i in 1..timestamps.len() {
        if !spec.is_contiguous(timestamps[i - 1], timestamps[i]) {
            runs.push(begin..i);
            begin = i;
        }
    }
    runs.push(begin..timestamps.len());
    runs
}

/// Stride-1 sliding windows that never span a gap. A gapless series of
/// length `L` yields `max(0, L - t0 - tau + 1)` windows.
pub fn windowize(series: &PatientSeries, patient: Option<usize>, spec: &WindowSpec) -> Vec<WindowSample> {
    if spec.t0 == 0 || spec.tau == 0 {
        return Vec::new();
    }
    let segment = Arc::new(Segment::from_series(series));
    let need = spec.len();
    let mut out = Vec::new();
    for run in contiguous_runs(&segment.timestamps, spec) {
        if run.len() < need {
            continue;
        }
        for start in run.start..=run.end - need {
            out.push(WindowSample {
                patient,
                segment: Arc::clone(&segment),
                start,
                t0: spec.t0,
                tau: spec.tau,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Reading;
    use chrono::{Duration, TimeZone};

    fn start() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 3, 4, 6, 0, 0).unwrap()
    }

    fn ramp(len: usize) -> PatientSeries {
        let values: Vec<f64> = (0..len).map(|i| 100.0 + i as f64 * 0.5).collect();
        PatientSeries::regular("p", start(), &values)
    }

    #[test]
    fn count_formula() {
        let spec = WindowSpec::new(190, 12);
        assert_eq!(windowize(&ramp(203), None, &spec).len(), 2);
        assert_eq!(windowize(&ramp(201), None, &spec).len(), 0);
        assert_eq!(windowize(&ramp(202), None, &spec).len(), 1);
    }

    #[test]
    fn window_views() {
        let spec = WindowSpec::new(3, 2);
        let w = &windowize(&ramp(10), Some(4), &spec)[1];
        assert_eq!(w.history(), &[100.5, 101.0, 101.5]);
        assert_eq!(w.targets(), &[102.0, 102.5]);
        assert_eq!(w.features().len(), 5);
        assert_eq!(w.anchor(), start() + Duration::minutes(15));
        assert_eq!(w.last_value(), 101.5);
        assert_eq!(w.patient, Some(4));
    }

    /// Brute force: a start is valid iff every consecutive pair in its span is
    /// 5 minutes (±60 s) apart.
    fn brute_force_starts(series: &PatientSeries, t0: usize, tau: usize) -> Vec<usize> {
        let n = series.len();
        let need = t0 + tau;
        (0..n.saturating_sub(need - 1))
            .filter(|&s| {
                (s + 1..s + need).all(|i| {
                    let d = (series.readings[i].timestamp - series.readings[i - 1].timestamp).num_seconds();
                    (240..=360).contains(&d)
                })
            })
            .collect()
    }

    #[test]
    fn gap_splits_the_window_set() {
        let mut series = ramp(300);
        // 20-minute hole after position 149
        for r in &mut series.readings[150..] {
            r.timestamp += Duration::minutes(15);
        }
        let (t0, tau) = (40, 12);
        let windows = windowize(&series, None, &WindowSpec::new(t0, tau));
        let expected = brute_force_starts(&series, t0, tau);
        assert_eq!(windows.len(), expected.len());
        assert_eq!(expected.len(), 2 * (150 - t0 - tau + 1));
        for (w, s) in windows.iter().zip(&expected) {
            assert_eq!(w.timestamps()[0], series.readings[*s].timestamp);
        }
    }

    #[test]
    fn jitter_within_tolerance_is_contiguous() {
        let mut series = ramp(30);
        series.readings[10].timestamp += Duration::seconds(45);
        assert_eq!(windowize(&series, None, &WindowSpec::new(10, 5)).len(), 16);
        series.readings[10].timestamp += Duration::seconds(30);
        assert!(windowize(&series, None, &WindowSpec::new(10, 5)).len() < 16);
    }

    #[test]
    fn explicit_window_rejects_gaps() {
        let mut series = ramp(30);
        for r in &mut series.readings[5..] {
            r.timestamp += Duration::minutes(10);
        }
        let seg = Arc::new(Segment::from_series(&series));
        let spec = WindowSpec::new(8, 2);
        assert!(matches!(
            WindowSample::new(Arc::clone(&seg), None, 0, &spec),
            Err(Error::Gap {
                position: 4,
                seconds: 900
            })
        ));
        assert!(WindowSample::new(seg, None, 5, &spec).is_ok());
    }

    #[test]
    fn every_window_is_contiguous() {
        let mut readings = ramp(400).readings;
        // scattered gaps
        for (k, r) in readings.iter_mut().enumerate() {
            r.timestamp += Duration::minutes(((k / 37) * 7) as i64);
        }
        let series = PatientSeries::new("p", readings.into_iter().collect::<Vec<Reading>>());
        let spec = WindowSpec::new(12, 6);
        for w in windowize(&series, None, &spec) {
            for pair in w.timestamps().windows(2) {
                assert!(spec.is_contiguous(pair[0], pair[1]));
            }
        }
    }
}
