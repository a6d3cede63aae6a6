use crate::error::{ensure_len, Error, Result};

/// Mean squared error over the forecast steps, in normalized units.
pub fn per_sample_loss(prediction: &[f64], target: &[f64]) -> Result<f64> {
    ensure_len("per-sample loss", target.len(), prediction.len())?;
    if target.is_empty() {
        return Err(Error::EmptyInput("per-sample loss"));
    }
    let sum: f64 = prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / target.len() as f64)
}

/// Gradient of [`per_sample_loss`] w.r.t. the prediction, scaled by `weight`.
pub fn per_sample_loss_grad(prediction: &[f64], target: &[f64], weight: f64) -> Vec<f64> {
    let scale = 2.0 * weight / target.len() as f64;
    prediction.iter().zip(target).map(|(p, t)| scale * (p - t)).collect()
}

/// Number of samples kept out of `batch`: `⌈beta · batch⌉`, at least one.
pub fn keep_count(batch: usize, beta: f64) -> usize {
    ((beta * batch as f64).ceil() as usize).clamp(1, batch)
}

/// Mean of the lowest `⌈beta·B⌉` losses and their indices in ascending index
/// order. Ties at the boundary go to the lower index.
pub fn trimmed_batch_loss(losses: &[f64], beta: f64) -> Result<(f64, Vec<usize>)> {
    if losses.is_empty() {
        return Err(Error::EmptyInput("trimmed batch loss"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!("beta must lie in (0, 1], got {beta}")));
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(format!("loss of batch sample {i}")));
    }
    let k = keep_count(losses.len(), beta);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    let sum: f64 = kept.iter().map(|&i| losses[i]).sum();
    Ok((sum / k as f64, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn per_sample_examples() {
        assert_eq!(per_sample_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(per_sample_loss(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(per_sample_loss(&[0.5, -0.5], &[0.0, 0.0]).unwrap(), 0.25);
        assert!(per_sample_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn loss_grad_matches_difference_quotient() {
        let (p, t) = ([0.3, -1.2, 2.0], [0.0, 0.5, 1.0]);
        let g = per_sample_loss_grad(&p, &t, 0.5);
        for i in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let num = 0.5 * (per_sample_loss(&hi, &t).unwrap() - per_sample_loss(&lo, &t).unwrap()) / 2e-6;
            assert!((num - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn trimmed_examples() {
        let (loss, kept) = trimmed_batch_loss(&[1.0, 2.0, 3.0, 100.0], 0.75).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(kept, vec![0, 1, 2]);
        let (loss, kept) = trimmed_batch_loss(&[100.0, 3.0, 1.0, 2.0], 0.75).unwrap();
        assert_eq!((loss, kept), (2.0, vec![1, 2, 3]));
        assert!(trimmed_batch_loss(&[], 0.9).is_err());
        assert!(trimmed_batch_loss(&[1.0], 0.0).is_err());
        assert!(trimmed_batch_loss(&[1.0], 1.5).is_err());
    }

    #[test]
    fn ties_keep_lower_index() {
        let (_, kept) = trimmed_batch_loss(&[5.0, 1.0, 5.0, 5.0], 0.5).unwrap();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn ten_samples_keep_nine() {
        assert_eq!(keep_count(10, 0.9), 9);
        assert_eq!(keep_count(128, 0.9), 116);
        assert_eq!(keep_count(3, 0.01), 1);
    }

    proptest! {
        #[test]
        fn beta_one_is_the_plain_mean(losses in prop::collection::vec(0.0f64..1e3, 1..64)) {
            let (loss, kept) = trimmed_batch_loss(&losses, 1.0).unwrap();
            let mean = losses.iter().sum::<f64>() / losses.len() as f64;
            prop_assert_eq!(loss, mean);
            prop_assert_eq!(kept.len(), losses.len());
        }

        #[test]
        fn trimmed_never_exceeds_mean(losses in prop::collection::vec(0.0f64..1e3, 1..64), beta in 0.05f64..1.0) {
            let (loss, kept) = trimmed_batch_loss(&losses, beta).unwrap();
            let mean = losses.iter().sum::<f64>() / losses.len() as f64;
            prop_assert!(loss <= mean * (1.0 + 1e-12));
            prop_assert_eq!(kept.len(), keep_count(losses.len(), beta));
        }

        #[test]
        fn monotone_in_kept_and_blind_to_trimmed(
            losses in prop::collection::vec(0.0f64..1e3, 2..40),
            beta in 0.3f64..0.95,
            bump in 0.0f64..50.0,
        ) {
            let (base, kept) = trimmed_batch_loss(&losses, beta).unwrap();
            for i in 0..losses.len() {
                let mut up = losses.clone();
                up[i] += bump;
                let (after, _) = trimmed_batch_loss(&up, beta).unwrap();
                if kept.contains(&i) {
                    prop_assert!(after >= base - 1e-12);
                } else {
                    prop_assert_eq!(after, base);
                }
            }
        }
    }
}
