use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};
use crate::numerics::{init_normal, ParamSet, RngState, Tensor1, Tensor2};

/// `z = tanh(W h)`: compresses the final encoder state into the decoder's
/// initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryProjection {
    pub weight: Tensor2,
}

impl SummaryProjection {
    pub fn init(decoder_dim: usize, encoder_dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(SummaryProjection {
            weight: init_normal(decoder_dim, encoder_dim, rng)?,
        })
    }

    pub fn forward(&self, h_last: &[f64]) -> Result<Tensor1> {
        ensure_len("summary input", self.weight.cols(), h_last.len())?;
        Ok(self.weight.matvec(h_last).into_iter().map(f64::tanh).collect())
    }

    /// Returns the gradient w.r.t. `h_last`; `z` is the forward output.
    pub fn backward(&self, h_last: &[f64], z: &[f64], dz: &[f64], grads: &mut SummaryProjection) -> Result<Tensor1> {
        ensure_len("summary upstream gradient", self.weight.rows(), dz.len())?;
        ensure_len("summary output", self.weight.rows(), z.len())?;
        let d_pre: Vec<f64> = dz.iter().zip(z).map(|(g, z)| g * (1.0 - z * z)).collect();
        grads.weight.add_outer(&d_pre, h_last);
        let mut dh = vec![0.0; self.weight.cols()];
        self.weight.matvec_t_acc(&d_pre, &mut dh);
        Ok(dh)
    }
}

impl ParamSet for SummaryProjection {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice()]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, grad_check};

    #[test]
    fn zero_weight_gives_zero() {
        let p = SummaryProjection {
            weight: Tensor2::zeros(3, 4),
        };
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn scalar_case() {
        let p = SummaryProjection {
            weight: Tensor2::from_vec(1, 1, vec![1.0]).unwrap(),
        };
        let z = p.forward(&[0.5]).unwrap();
        assert!((z[0] - 0.462_117_157_260_009_8).abs() < 1e-15);
    }

    #[test]
    fn output_stays_inside_unit_interval() {
        let mut rng = RngState::new(2);
        let p = SummaryProjection::init(6, 10, &mut rng).unwrap();
        for _ in 0..50 {
            let h: Vec<f64> = (0..10).map(|_| rng.uniform_range(-30.0, 30.0)).collect();
            assert!(p.forward(&h).unwrap().iter().all(|z| z.abs() < 1.0));
        }
    }

    #[test]
    fn rejects_wrong_width() {
        let p = SummaryProjection {
            weight: Tensor2::zeros(2, 3),
        };
        assert!(p.forward(&[1.0]).is_err());
    }

    #[test]
    fn zero_weight_gradients() {
        let p = SummaryProjection {
            weight: Tensor2::zeros(2, 3),
        };
        let h = [0.5, -1.0, 2.0];
        let z = p.forward(&h).unwrap();
        let dz = [3.0, -2.0];
        let mut g = p.zeros_like();
        let dh = p.backward(&h, &z, &dz, &mut g).unwrap();
        assert_eq!(dh, vec![0.0; 3]);
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(g.weight.get(r, c), dz[r] * h[c]);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngState::new(12);
        let p = SummaryProjection::init(4, 6, &mut rng).unwrap();
        let h: Vec<f64> = (0..6).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let w: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let z = p.forward(&h).unwrap();
        let mut g = p.zeros_like();
        let dh = p.backward(&h, &z, &w, &mut g).unwrap();
        let err = grad_check(
            |q| {
                let mut pp = p.clone();
                pp.set_flat(q).unwrap();
                dot(&pp.forward(&h).unwrap(), &w)
            },
            &p.to_flat(),
            &g.to_flat(),
        )
        .unwrap();
        assert!(err < 1e-4);
        let err = grad_check(|q| dot(&p.forward(q).unwrap(), &w), &h, &dh).unwrap();
        assert!(err < 1e-4);
    }
}
