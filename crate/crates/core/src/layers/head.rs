use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};
use crate::numerics::{dot, init_normal, init_normal_vec, ParamSet, RngState, Tensor1, Tensor2};

/// One tanh hidden layer followed by a linear scalar output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardHead {
    pub w_hidden: Tensor2,
    pub b_hidden: Tensor1,
    pub w_out: Tensor1,
    pub b_out: f64,
}

#[derive(Clone, Debug)]
pub struct HeadCache {
    input: Tensor1,
    hidden: Tensor1,
}

impl FeedforwardHead {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        FeedforwardHead {
            w_hidden: Tensor2::zeros(hidden_dim, input_dim),
            b_hidden: vec![0.0; hidden_dim],
            w_out: vec![0.0; hidden_dim],
            b_out: 0.0,
        }
    }

    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(FeedforwardHead {
            w_hidden: init_normal(hidden_dim, input_dim, rng)?,
            b_hidden: init_normal_vec(hidden_dim, rng)?,
            w_out: init_normal_vec(hidden_dim, rng)?,
            b_out: rng.normal(0.0, crate::numerics::INIT_STD),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(f64, HeadCache)> {
        ensure_len("feedforward head input", self.input_dim(), input.len())?;
        let mut hidden = self.b_hidden.clone();
        self.w_hidden.matvec_acc(input, &mut hidden);
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        let out = dot(&self.w_out, &hidden) + self.b_out;
        Ok((
            out,
            HeadCache {
                input: input.to_vec(),
                hidden,
            },
        ))
    }

    /// Returns the gradient w.r.t. the input vector.
    pub fn backward(&self, cache: &HeadCache, d_out: f64, grads: &mut FeedforwardHead) -> Tensor1 {
        grads.b_out += d_out;
        let mut d_pre = Vec::with_capacity(cache.hidden.len());
        for ((g, &h), &w) in grads.w_out.iter_mut().zip(&cache.hidden).zip(&self.w_out) {
            *g += d_out * h;
            d_pre.push(d_out * w * (1.0 - h * h));
        }
        for (g, d) in grads.b_hidden.iter_mut().zip(&d_pre) {
            *g += d;
        }
        grads.w_hidden.add_outer(&d_pre, &cache.input);
        let mut d_in = vec![0.0; self.input_dim()];
        self.w_hidden.matvec_t_acc(&d_pre, &mut d_in);
        d_in
    }
}

impl ParamSet for FeedforwardHead {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_hidden.as_slice(),
            &self.b_hidden,
            &self.w_out,
            std::slice::from_ref(&self.b_out),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_hidden.as_mut_slice(),
            &mut self.b_hidden,
            &mut self.w_out,
            std::slice::from_mut(&mut self.b_out),
        ]
    }
}
