use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use log::info;

use super::{PatientSeries, Reading};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["patient_id", "timestamp", "glucose_mgdl"];

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<PatientSeries>> {
    let file = File::open(path.as_ref())?;
    let series = read_csv(file)?;
    info!(
        "parsed {} records for {} patients from {}",
        series.iter().map(PatientSeries::len).sum::<usize>(),
        series.len(),
        path.as_ref().display()
    );
    Ok(series)
}

/// Parses `patient_id,timestamp,glucose_mgdl` rows, grouping by patient
/// (output sorted by id). Rows of different patients may interleave, but each
/// patient's timestamps must be strictly increasing.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<PatientSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }

    let mut groups: BTreeMap<String, Vec<Reading>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", row.len())));
        }
        let patient = row[0].to_string();
        if patient.is_empty() {
            return Err(bad("empty patient_id".into()));
        }
        let timestamp = parse_timestamp(&row[1]).ok_or_else(|| bad(format!("invalid timestamp `{}`", &row[1])))?;
        let glucose: f64 = row[2]
            .parse()
            .map_err(|_| bad(format!("invalid glucose value `{}`", &row[2])))?;
        if !glucose.is_finite() || glucose <= 0.0 {
            return Err(bad(format!("glucose must be a positive number, got `{}`", &row[2])));
        }

        let readings = groups.entry(patient.clone()).or_default();
        if readings.last().is_some_and(|prev| prev.timestamp >= timestamp) {
            return Err(Error::NonMonotone { patient, line });
        }
        readings.push(Reading { timestamp, glucose });
    }
    Ok(groups
        .into_iter()
        .map(|(id, readings)| PatientSeries::new(id, readings))
        .collect())
}

/// Accepts RFC 3339 instants, or zone-less ISO-8601 date-times read as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc())
}

pub fn write_csv(path: impl AsRef<Path>, series: &[PatientSeries]) -> Result<usize> {
    let file = File::create(path)?;
    write_csv_to(file, series)
}

/// Writes rows in the same format [`read_csv`] accepts; returns the record count.
pub fn write_csv_to<W: Write>(writer: W, series: &[PatientSeries]) -> Result<usize> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let mut count = 0;
    for s in series {
        for r in &s.readings {
            w.write_record([
                s.patient_id.as_str(),
                &r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                &r.glucose.to_string(),
            ])?;
            count += 1;
        }
    }
    w.flush()?;
    Ok(count)
}
