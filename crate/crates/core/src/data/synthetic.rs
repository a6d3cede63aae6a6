//! Synthetic CGM population.
//!
//! Each patient is a [`PatientProfile`]: a baseline level, a 24-hour
//! sinusoid, two to four daily meals at patient-specific times (shifted
//! later on weekends), each adding a rise-then-decay bump
//! `A · (t/peak) · exp(1 - t/peak)`, AR(1) sensor/physiology noise whose
//! coefficient sets how smooth the patient's trace is, and unannounced
//! excursions ("outliers") at a configurable rate. Values are rounded to
//! 0.1 mg/dl and clamped to [40, 400].
//!
//! Meal bumps and excursions rise by well under 40 mg/dl per 5 minutes, so a
//! noiseless trace survives cleaning intact.

use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use super::{PatientSeries, Reading, CADENCE_SECS};
use crate::numerics::RngState;

const MIN_MGDL: f64 = 40.0;
const MAX_MGDL: f64 = 400.0;
/// Readings covered by one excursion.
const EXCURSION_LEN: usize = 6;
const EXCURSION_SHAPE: [f64; EXCURSION_LEN] = [1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_patients: usize,
    pub n_days: usize,
    /// Expected fraction of readings disturbed by an excursion.
    pub outlier_rate: f64,
    /// Stationary standard deviation of the AR(1) noise, mg/dl.
    pub noise_std: f64,
    pub start: DateTime<Utc>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_patients: 8,
            n_days: 30,
            outlier_rate: 0.0,
            noise_std: 4.0,
            // a Monday
            start: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meal {
    /// Weekday start time, hours after midnight.
    pub hour: f64,
    /// Peak rise, mg/dl.
    pub amplitude: f64,
    /// Minutes from meal to peak.
    pub peak_minutes: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub baseline: f64,
    pub circadian_amplitude: f64,
    /// Hour at which the circadian sinusoid peaks.
    pub circadian_peak_hour: f64,
    pub meals: Vec<Meal>,
    /// Meals happen this many hours later on Saturday and Sunday.
    pub weekend_shift_hours: f64,
    /// AR(1) coefficient of the noise, in (0, 1); higher is smoother.
    pub smoothness: f64,
    pub noise_std: f64,
    pub outlier_rate: f64,
}

impl PatientProfile {
    pub fn sample(rng: &mut RngState, noise_std: f64, outlier_rate: f64) -> Self {
        let n_meals = 2 + rng.below(3);
        // Meals spread over the waking day, one per slot.
        let slot = 14.0 / n_meals as f64;
        let meals = (0..n_meals)
            .map(|k| Meal {
                hour: 6.5 + k as f64 * slot + rng.uniform_range(0.0, slot * 0.6),
                amplitude: rng.uniform_range(30.0, 80.0),
                peak_minutes: rng.uniform_range(45.0, 80.0),
            })
            .collect();
        PatientProfile {
            baseline: rng.uniform_range(100.0, 150.0),
            circadian_amplitude: rng.uniform_range(10.0, 30.0),
            circadian_peak_hour: rng.uniform_range(0.0, 24.0),
            meals,
            weekend_shift_hours: rng.uniform_range(0.5, 2.5),
            smoothness: rng.uniform_range(0.80, 0.98),
            noise_std,
            outlier_rate,
        }
    }

    fn meal_hours(&self, day: Weekday) -> impl Iterator<Item = (f64, &Meal)> + '_ {
        let shift = if matches!(day, Weekday::Sat | Weekday::Sun) {
            self.weekend_shift_hours
        } else {
            0.0
        };
        self.meals.iter().map(move |m| (m.hour + shift, m))
    }

    /// Noise-free glucose at `t`, mg/dl.
    pub fn deterministic_level(&self, t: DateTime<Utc>) -> f64 {
        let midnight = t.date_naive().and_hms_opt(0, 0, 0).unwrap().and_utc();
        let hours = (t - midnight).num_seconds() as f64 / 3600.0;
        let mut level =
            self.baseline + self.circadian_amplitude * (2.0 * PI * (hours - self.circadian_peak_hour) / 24.0).cos();
        // Yesterday's late meals still decay into today.
        for (offset, day) in [
            (-24.0, (midnight - Duration::days(1)).weekday()),
            (0.0, midnight.weekday()),
        ] {
            for (meal_hour, meal) in self.meal_hours(day) {
                let minutes = (hours - offset - meal_hour) * 60.0;
                if minutes > 0.0 {
                    let x = minutes / meal.peak_minutes;
                    level += meal.amplitude * x * (1.0 - x).exp();
                }
            }
        }
        level
    }
}

/// Generates one patient's trace.
pub fn generate_patient(
    patient_id: &str,
    profile: &PatientProfile,
    start: DateTime<Utc>,
    n_days: usize,
    rng: &mut RngState,
) -> PatientSeries {
    let n = n_days * (86_400 / CADENCE_SECS as usize);
    let innovation = profile.noise_std * (1.0 - profile.smoothness * profile.smoothness).sqrt();
    let start_prob = profile.outlier_rate / EXCURSION_LEN as f64;

    let mut noise = rng.normal(0.0, profile.noise_std);
    let mut excursion = vec![0.0; n + EXCURSION_LEN];
    let mut readings = Vec::with_capacity(n);
    for i in 0..n {
        let t = start + Duration::seconds(CADENCE_SECS * i as i64);
        if i > 0 {
            noise = profile.smoothness * noise + rng.normal(0.0, innovation);
        }
        if rng.bernoulli(start_prob) {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let amplitude = sign * rng.uniform_range(40.0, 80.0);
            for (k, shape) in EXCURSION_SHAPE.iter().enumerate() {
                excursion[i + k] += amplitude * shape;
            }
        }
        let value = profile.deterministic_level(t) + noise + excursion[i];
        let glucose = (value.clamp(MIN_MGDL, MAX_MGDL) * 10.0).round() / 10.0;
        readings.push(Reading { timestamp: t, glucose });
    }
    PatientSeries::new(patient_id, readings)
}

/// Samples `n_patients` profiles and their traces; ids are `P001`, `P002`, ...
pub fn generate_synthetic(config: &SyntheticConfig, rng: &mut RngState) -> Vec<(PatientProfile, PatientSeries)> {
    (0..config.n_patients)
        .map(|k| {
            let mut patient_rng = rng.fork();
            let profile = PatientProfile::sample(&mut patient_rng, config.noise_std, config.outlier_rate);
            let series = generate_patient(
                &format!("P{:03}", k + 1),
                &profile,
                config.start,
                config.n_days,
                &mut patient_rng,
            );
            (profile, series)
        })
        .collect()
}
