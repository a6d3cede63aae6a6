use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autoregression on the `d`-times differenced series (AR-I): ARIMA without
/// the moving-average part, fit by ordinary least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub order: usize,
    pub differencing: usize,
    /// `coefficients[k]` multiplies lag `k + 1`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

pub const DEFAULT_AR_ORDER: usize = 10;
pub const DEFAULT_AR_DIFFERENCING: usize = 1;

fn difference(values: &[f64], d: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    for _ in 0..d {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    v
}

/// Fits on one contiguous segment.
pub fn fit_ar(values: &[f64], p: usize, d: usize) -> Result<ArModel> {
    fit_ar_segments(&[values], p, d)
}

/// Fits on several contiguous segments; no lag window crosses a segment
/// boundary.
pub fn fit_ar_segments(segments: &[&[f64]], p: usize, d: usize) -> Result<ArModel> {
    if p == 0 || d > 1 {
        return Err(Error::Config(format!(
            "AR order must be >= 1 and differencing 0 or 1 (got p={p}, d={d})"
        )));
    }
    let series: Vec<Vec<f64>> = segments.iter().map(|s| difference(s, d)).collect();
    let rows: usize = series.iter().map(|y| y.len().saturating_sub(p)).sum();
    if rows < p + 1 {
        return Err(Error::InsufficientData(format!(
            "AR({p}) with d={d} needs at least {} regression rows, got {rows}",
            p + 1
        )));
    }
    let samples = || {
        series
            .iter()
            .flat_map(move |y| (p..y.len()).map(move |t| (y[t], (1..=p).map(move |k| y[t - k]))))
    };

    // Centered normal equations: intercept follows from the means.
    let n = rows as f64;
    let mut mean_x = vec![0.0; p];
    let mut mean_y = 0.0;
    for (target, lags) in samples() {
        mean_y += target;
        for (m, v) in mean_x.iter_mut().zip(lags) {
            *m += v;
        }
    }
    mean_y /= n;
    mean_x.iter_mut().for_each(|m| *m /= n);

    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (target, lags) in samples() {
        let x: Vec<f64> = lags.zip(&mean_x).map(|(v, m)| v - m).collect();
        let yc = target - mean_y;
        for i in 0..p {
            xty[i] += x[i] * yc;
            for j in 0..p {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    // A lag column with no variance is collinear with the intercept: it gets a
    // zero coefficient (the minimum-norm solution). Other collinearity is an error.
    let active: Vec<usize> = (0..p)
        .filter(|&i| xtx[i][i] > 1e-24 * n * (1.0 + mean_x[i] * mean_x[i]))
        .collect();
    let reduced: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| active.iter().map(|&j| xtx[i][j]).collect())
        .collect();
    let rhs: Vec<f64> = active.iter().map(|&i| xty[i]).collect();
    let mut coefficients = vec![0.0; p];
    if !active.is_empty() {
        for (&i, c) in active.iter().zip(solve(reduced, rhs)?) {
            coefficients[i] = c;
        }
    }
    let intercept = mean_y - coefficients.iter().zip(&mean_x).map(|(a, m)| a * m).sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("AR coefficients".into()));
    }
    Ok(ArModel {
        order: p,
        differencing: d,
        coefficients,
        intercept,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::RankDeficient);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

impl ArModel {
    /// Recursive `tau`-step forecast from the most recent values (oldest first).
    pub fn forecast(&self, recent: &[f64], tau: usize) -> Result<Vec<f64>> {
        let need = self.order + self.differencing;
        if recent.len() < need {
            return Err(Error::InsufficientData(format!(
                "AR forecast needs {need} recent values, got {}",
                recent.len()
            )));
        }
        let mut y = difference(&recent[recent.len() - need..], self.differencing);
        let mut out = Vec::with_capacity(tau);
        let mut level = recent[recent.len() - 1];
        for _ in 0..tau {
            let next = self.intercept
                + self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * y[y.len() - 1 - k])
                    .sum::<f64>();
            y.push(next);
            if self.differencing == 1 {
                level += next;
                out.push(level);
            } else {
                out.push(next);
            }
        }
        Ok(out)
    }
}

pub fn forecast_ar(model: &ArModel, recent: &[f64], tau: usize) -> Result<Vec<f64>> {
    model.forecast(recent, tau)
}

/// The last value carried forward.
pub fn persistence_forecast(recent: &[f64], tau: usize) -> Result<Vec<f64>> {
    let last = *recent.last().ok_or(Error::EmptyInput("persistence history"))?;
    Ok(vec![last; tau])
}
