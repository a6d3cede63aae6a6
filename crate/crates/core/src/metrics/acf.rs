use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

pub const BAND_95_Z: f64 = 1.96;
pub const BAND_99_Z: f64 = 2.576;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Autocorrelation {
    /// `R(0..=max_lag)`.
    pub values: Vec<f64>,
    pub n: usize,
    /// Half-widths of the 95% and 99% white-noise bands.
    pub band95: f64,
    pub band99: f64,
}

impl Autocorrelation {
    /// Lags in `1..` whose value lies outside the 99% band.
    pub fn significant_lags(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .copied()
            .enumerate()
            .skip(1)
            .filter(|(_, r)| r.abs() > self.band99)
    }

    /// Rows `patient,lag,acf,band95,band99`.
    pub fn write_rows<W: Write>(&self, mut out: W, patient: &str) -> std::io::Result<()> {
        for (lag, r) in self.values.iter().enumerate() {
            writeln!(out, "{patient},{lag},{r},{},{}", self.band95, self.band99)?;
        }
        Ok(())
    }
}

/// Sample autocorrelation with the plug-in mean and variance:
/// `R(k) = [Σ_{t<n−k} (x_t − μ)(x_{t+k} − μ) / (n − k)] / [Σ (x_t − μ)² / n]`.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = values.len();
    if n <= max_lag + 1 {
        return Err(Error::InsufficientData(format!(
            "autocorrelation to lag {max_lag} needs more than {} values, got {n}",
            max_lag + 1
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|c| c * c).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("autocorrelation series"));
    }
    let values = (0..=max_lag)
        .map(|k| {
            let cov: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
            cov / (n - k) as f64 / var
        })
        .collect();
    let root = (n as f64).sqrt();
    Ok(Autocorrelation {
        values,
        n,
        band95: BAND_95_Z / root,
        band99: BAND_99_Z / root,
    })
}
