//! CGM ingestion, cleaning, temporal splitting, windowing and the synthetic
//! population generator.

mod clean;
mod csv_io;
mod normalize;
mod synthetic;
mod time_features;
mod window;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use clean::{clean, split_temporal, Split, MAX_JUMP_MGDL};
pub use csv_io::{load_csv, parse_timestamp, read_csv, write_csv, write_csv_to, CSV_HEADER};
pub use normalize::Normalizer;
pub use synthetic::{generate_patient, generate_synthetic, Meal, PatientProfile, SyntheticConfig};
pub use time_features::{extract_time_features, TimeFeatures};
pub use window::{contiguous_runs, windowize, Segment, WindowSample, WindowSpec};

/// Nominal CGM sampling interval.
pub const CADENCE_SECS: i64 = 300;
/// Allowed deviation from the nominal interval before two readings count as
/// non-contiguous.
pub const GAP_TOLERANCE_SECS: i64 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub timestamp: DateTime<Utc>,
    pub glucose: f64,
}

/// One patient's readings in strictly increasing time order.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientSeries {
    pub patient_id: String,
    pub readings: Vec<Reading>,
}

impl PatientSeries {
    pub fn new(patient_id: impl Into<String>, readings: Vec<Reading>) -> Self {
        PatientSeries {
            patient_id: patient_id.into(),
            readings,
        }
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.readings.iter().map(|r| r.glucose).collect()
    }

    /// Builds a series on a regular 5-minute grid starting at `start`.
    pub fn regular(patient_id: impl Into<String>, start: DateTime<Utc>, values: &[f64]) -> Self {
        let readings = values
            .iter()
            .enumerate()
            .map(|(i, &glucose)| Reading {
                timestamp: start + chrono::Duration::seconds(CADENCE_SECS * i as i64),
                glucose,
            })
            .collect();
        PatientSeries::new(patient_id, readings)
    }
}
