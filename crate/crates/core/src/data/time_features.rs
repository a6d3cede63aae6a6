use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};

/// Calendar features appended to every recurrent input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatures {
    /// Time of day as a fraction of 24 hours, minutes and seconds included.
    pub hour_frac: f64,
    /// Day of week / 7 with Monday = 0.
    pub dow_frac: f64,
    /// 1 on Saturday and Sunday, else 0.
    pub weekend: f64,
}

impl TimeFeatures {
    pub const WIDTH: usize = 3;

    pub fn as_array(&self) -> [f64; 3] {
        [self.hour_frac, self.dow_frac, self.weekend]
    }
}

pub fn extract_time_features(timestamp: DateTime<Utc>) -> TimeFeatures {
    let secs = timestamp.num_seconds_from_midnight() as f64;
    let day = timestamp.weekday();
    TimeFeatures {
        hour_frac: secs / 86_400.0,
        dow_frac: day.num_days_from_monday() as f64 / 7.0,
        weekend: if matches!(day, Weekday::Sat | Weekday::Sun) {
            1.0
        } else {
            0.0
        },
    }
}
