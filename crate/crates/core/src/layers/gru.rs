use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};
use crate::numerics::{init_normal, init_normal_vec, sigmoid, ParamSet, RngState, Tensor1, Tensor2};

/// Gated recurrent unit with the reset gate applied to the hidden state
/// before the candidate's recurrent projection:
///
/// ```text
/// u  = σ(W_u x + U_u h + b_u)
/// r  = σ(W_r x + U_r h + b_r)
/// c  = tanh(W_c x + U_c (r ⊙ h) + b_c)
/// h' = (1 - u) ⊙ h + u ⊙ c
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub w_update: Tensor2,
    pub w_reset: Tensor2,
    pub w_candidate: Tensor2,
    pub u_update: Tensor2,
    pub u_reset: Tensor2,
    pub u_candidate: Tensor2,
    pub b_update: Tensor1,
    pub b_reset: Tensor1,
    pub b_candidate: Tensor1,
}

/// Intermediates of one forward step, consumed by [`GruCellParams::backward`].
#[derive(Clone, Debug)]
pub struct GruCache {
    x: Tensor1,
    h_prev: Tensor1,
    update: Tensor1,
    reset: Tensor1,
    candidate: Tensor1,
    reset_h: Tensor1,
}

/// Gradients flowing out of one backward step.
#[derive(Clone, Debug)]
pub struct GruInputGrads {
    pub dx: Tensor1,
    pub dh_prev: Tensor1,
}

impl GruCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor2::zeros(hidden_dim, input_dim);
        let u = || Tensor2::zeros(hidden_dim, hidden_dim);
        GruCellParams {
            w_update: w(),
            w_reset: w(),
            w_candidate: w(),
            u_update: u(),
            u_reset: u(),
            u_candidate: u(),
            b_update: vec![0.0; hidden_dim],
            b_reset: vec![0.0; hidden_dim],
            b_candidate: vec![0.0; hidden_dim],
        }
    }

    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(GruCellParams {
            w_update: init_normal(hidden_dim, input_dim, rng)?,
            w_reset: init_normal(hidden_dim, input_dim, rng)?,
            w_candidate: init_normal(hidden_dim, input_dim, rng)?,
            u_update: init_normal(hidden_dim, hidden_dim, rng)?,
            u_reset: init_normal(hidden_dim, hidden_dim, rng)?,
            u_candidate: init_normal(hidden_dim, hidden_dim, rng)?,
            b_update: init_normal_vec(hidden_dim, rng)?,
            b_reset: init_normal_vec(hidden_dim, rng)?,
            b_candidate: init_normal_vec(hidden_dim, rng)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_update.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_update.rows()
    }

    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> Result<(Tensor1, GruCache)> {
        ensure_len("gru input", self.input_dim(), x.len())?;
        ensure_len("gru hidden state", self.hidden_dim(), h_prev.len())?;

        let gate = |w: &Tensor2, u: &Tensor2, b: &[f64]| {
            let mut pre = b.to_vec();
            w.matvec_acc(x, &mut pre);
            u.matvec_acc(h_prev, &mut pre);
            pre.into_iter().map(sigmoid).collect::<Vec<_>>()
        };
        let update = gate(&self.w_update, &self.u_update, &self.b_update);
        let reset = gate(&self.w_reset, &self.u_reset, &self.b_reset);

        let reset_h: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut cand = self.b_candidate.clone();
        self.w_candidate.matvec_acc(x, &mut cand);
        self.u_candidate.matvec_acc(&reset_h, &mut cand);
        for c in &mut cand {
            *c = c.tanh();
        }

        let h_next = (0..h_prev.len())
            .map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * cand[i])
            .collect();
        let cache = GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            update,
            reset,
            candidate: cand,
            reset_h,
        };
        Ok((h_next, cache))
    }

    /// Back-propagates `dh_next` through one step, accumulating parameter
    /// gradients into `grads`.
    pub fn backward(&self, cache: &GruCache, dh_next: &[f64], grads: &mut GruCellParams) -> Result<GruInputGrads> {
        let hidden = self.hidden_dim();
        ensure_len("gru upstream gradient", hidden, dh_next.len())?;
        ensure_len("gru cache", hidden, cache.h_prev.len())?;

        let mut dx = vec![0.0; self.input_dim()];
        let mut dh_prev = vec![0.0; hidden];

        let mut d_update_pre = vec![0.0; hidden];
        let mut d_cand_pre = vec![0.0; hidden];
        for i in 0..hidden {
            let u = cache.update[i];
            let c = cache.candidate[i];
            dh_prev[i] = dh_next[i] * (1.0 - u);
            d_update_pre[i] = dh_next[i] * (c - cache.h_prev[i]) * u * (1.0 - u);
            d_cand_pre[i] = dh_next[i] * u * (1.0 - c * c);
        }

        grads.w_candidate.add_outer(&d_cand_pre, &cache.x);
        grads.u_candidate.add_outer(&d_cand_pre, &cache.reset_h);
        add_assign(&mut grads.b_candidate, &d_cand_pre);
        self.w_candidate.matvec_t_acc(&d_cand_pre, &mut dx);
        let mut d_reset_h = vec![0.0; hidden];
        self.u_candidate.matvec_t_acc(&d_cand_pre, &mut d_reset_h);

        let mut d_reset_pre = vec![0.0; hidden];
        for i in 0..hidden {
            let r = cache.reset[i];
            dh_prev[i] += d_reset_h[i] * r;
            d_reset_pre[i] = d_reset_h[i] * cache.h_prev[i] * r * (1.0 - r);
        }

        grads.w_update.add_outer(&d_update_pre, &cache.x);
        grads.u_update.add_outer(&d_update_pre, &cache.h_prev);
        add_assign(&mut grads.b_update, &d_update_pre);
        self.w_update.matvec_t_acc(&d_update_pre, &mut dx);
        self.u_update.matvec_t_acc(&d_update_pre, &mut dh_prev);

        grads.w_reset.add_outer(&d_reset_pre, &cache.x);
        grads.u_reset.add_outer(&d_reset_pre, &cache.h_prev);
        add_assign(&mut grads.b_reset, &d_reset_pre);
        self.w_reset.matvec_t_acc(&d_reset_pre, &mut dx);
        self.u_reset.matvec_t_acc(&d_reset_pre, &mut dh_prev);

        Ok(GruInputGrads { dx, dh_prev })
    }
}

pub(crate) fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl ParamSet for GruCellParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_update.as_slice(),
            self.w_reset.as_slice(),
            self.w_candidate.as_slice(),
            self.u_update.as_slice(),
            self.u_reset.as_slice(),
            self.u_candidate.as_slice(),
            &self.b_update,
            &self.b_reset,
            &self.b_candidate,
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_update.as_mut_slice(),
            self.w_reset.as_mut_slice(),
            self.w_candidate.as_mut_slice(),
            self.u_update.as_mut_slice(),
            self.u_reset.as_mut_slice(),
            self.u_candidate.as_mut_slice(),
            &mut self.b_update,
            &mut self.b_reset,
            &mut self.b_candidate,
        ]
    }
}
