use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global z-score scaling fitted on training glucose only and stored with the
/// model, so validation and test data are scaled with the same statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Normalizer {
    pub const IDENTITY: Normalizer = Normalizer { mean: 0.0, std: 1.0 };

    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<Self> {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        // one pass, shifted by the first value
        let mut shift = None;
        for &v in values {
            let s = *shift.get_or_insert(v);
            let d = v - s;
            n += 1;
            sum += d;
            sum_sq += d * d;
        }
        if n == 0 {
            return Err(Error::EmptyInput("normalizer training values"));
        }
        let nf = n as f64;
        let mean_shifted = sum / nf;
        let var = (sum_sq / nf - mean_shifted * mean_shifted).max(0.0);
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::ZeroVariance("training glucose"));
        }
        Ok(Normalizer {
            mean: shift.unwrap_or(0.0) + mean_shifted,
            std,
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn two_point_fit() {
        let n = Normalizer::fit(&[80.0, 120.0]).unwrap();
        assert_eq!((n.mean, n.std), (100.0, 20.0));
        assert_eq!((n.apply(80.0), n.apply(120.0)), (-1.0, 1.0));
    }

    #[test]
    fn round_trip() {
        let n = Normalizer::fit(&[55.0, 140.0, 220.0, 97.0]).unwrap();
        let mut rng = RngState::new(3);
        for _ in 0..1000 {
            let x = rng.uniform_range(40.0, 400.0);
            assert!((n.invert(n.apply(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_values_fail() {
        assert!(matches!(Normalizer::fit(&[5.0, 5.0]), Err(Error::ZeroVariance(_))));
        assert!(matches!(Normalizer::fit(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn identity_is_a_no_op() {
        assert_eq!(Normalizer::IDENTITY.apply(123.25), 123.25);
        assert_eq!(Normalizer::IDENTITY.invert(-4.5), -4.5);
    }
}
