//! Multi-head additive attention over the encoder states.
//!
//! For head `k`, the score of encoder position `j` against decoder state `s`
//! is `e_kj = tanh(r_kᵀ W_k [h_j || s])`, normalized by a softmax over `j`.
//! The context is `a = tanh(1/K · Σ_k Σ_j α_kj h_j)`.
//!
//! Since `r_kᵀ W_k` collapses to a single vector `v_k = W_kᵀ r_k`, each call
//! computes `v_k` once and scores every position with a dot product.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{dot, init_normal, init_normal_vec, stable_softmax, ParamSet, RngState, Tensor1, Tensor2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    /// `attn_hidden × (N + D)`
    pub projection: Tensor2,
    /// `attn_hidden`
    pub score: Tensor1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub heads: Vec<AttentionHead>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    s_prev: Tensor1,
    collapsed: Vec<Tensor1>,
    scores: Vec<Tensor1>,
    weights: Vec<Tensor1>,
    context: Tensor1,
}

/// Output of one attention call.
#[derive(Clone, Debug)]
pub struct AttentionOutput {
    pub context: Tensor1,
    /// `K × t0`; every row sums to one.
    pub weights: Vec<Tensor1>,
}

impl AttentionParams {
    pub fn init(
        heads: usize,
        hidden: usize,
        encoder_dim: usize,
        decoder_dim: usize,
        rng: &mut RngState,
    ) -> Result<Self> {
        if heads == 0 {
            return Err(Error::Config("attention needs at least one head".into()));
        }
        let heads = (0..heads)
            .map(|_| {
                Ok(AttentionHead {
                    projection: init_normal(hidden, encoder_dim + decoder_dim, rng)?,
                    score: init_normal_vec(hidden, rng)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AttentionParams { heads })
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    fn input_dim(&self) -> usize {
        self.heads.first().map_or(0, |h| h.projection.cols())
    }

    pub fn forward(&self, states: &[Tensor1], s_prev: &[f64]) -> Result<(AttentionOutput, AttentionCache)> {
        if self.heads.is_empty() {
            return Err(Error::Config("attention needs at least one head".into()));
        }
        if states.is_empty() {
            return Err(Error::EmptyInput("attention encoder states"));
        }
        let n = states[0].len();
        ensure_len("attention input width", self.input_dim(), n + s_prev.len())?;

        let mut collapsed = Vec::with_capacity(self.heads.len());
        let mut scores = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let mut v = vec![0.0; n + s_prev.len()];
            head.projection.matvec_t_acc(&head.score, &mut v);
            let from_state = dot(&v[n..], s_prev);
            let e: Vec<f64> = states.iter().map(|h| (dot(&v[..n], h) + from_state).tanh()).collect();
            collapsed.push(v);
            scores.push(e);
        }
        let weights = scores.iter().map(|e| stable_softmax(e)).collect::<Result<Vec<_>>>()?;
        let context = combine(states, &weights);
        let cache = AttentionCache {
            s_prev: s_prev.to_vec(),
            collapsed,
            scores,
            weights: weights.clone(),
            context: context.clone(),
        };
        Ok((AttentionOutput { context, weights }, cache))
    }

    /// Accumulates gradients into `grads` and `d_states`; returns the
    /// gradient w.r.t. the decoder state.
    pub fn backward(
        &self,
        states: &[Tensor1],
        cache: &AttentionCache,
        d_context: &[f64],
        d_states: &mut [Tensor1],
        grads: &mut AttentionParams,
    ) -> Result<Tensor1> {
        if cache.weights.len() != self.heads.len() || cache.weights.iter().any(|w| w.len() != states.len()) {
            return Err(Error::MissingCache("attention"));
        }
        let n = states[0].len();
        ensure_len("attention upstream gradient", n, d_context.len())?;
        let k_inv = 1.0 / self.heads.len() as f64;

        let d_pre: Vec<f64> = d_context
            .iter()
            .zip(&cache.context)
            .map(|(g, a)| g * (1.0 - a * a))
            .collect();
        let mut ds = vec![0.0; cache.s_prev.len()];

        for (k, head) in self.heads.iter().enumerate() {
            let alpha = &cache.weights[k];
            let e = &cache.scores[k];
            let v = &cache.collapsed[k];

            let d_alpha: Vec<f64> = states.iter().map(|h| k_inv * dot(h, &d_pre)).collect();
            let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();

            let mut dv = vec![0.0; v.len()];
            let mut du_total = 0.0;
            for (j, h) in states.iter().enumerate() {
                let de = alpha[j] * (d_alpha[j] - mean);
                let du = de * (1.0 - e[j] * e[j]);
                du_total += du;
                let dh = &mut d_states[j];
                for i in 0..n {
                    dh[i] += k_inv * alpha[j] * d_pre[i] + du * v[i];
                    dv[i] += du * h[i];
                }
            }
            for (i, s) in cache.s_prev.iter().enumerate() {
                dv[n + i] += du_total * s;
                ds[i] += du_total * v[n + i];
            }

            let g = &mut grads.heads[k];
            g.projection.add_outer(&head.score, &dv);
            head.projection.matvec_acc(&dv, &mut g.score);
        }
        Ok(ds)
    }
}

/// `tanh(1/K Σ_k Σ_j α_kj h_j)`
pub fn combine(states: &[Tensor1], weights: &[Tensor1]) -> Tensor1 {
    let n = states[0].len();
    let k_inv = 1.0 / weights.len() as f64;
    let mut acc = vec![0.0; n];
    for alpha in weights {
        for (h, &a) in states.iter().zip(alpha) {
            for (o, x) in acc.iter_mut().zip(h) {
                *o += k_inv * a * x;
            }
        }
    }
    acc.into_iter().map(f64::tanh).collect()
}

/// Context vector from raw per-head scores, bypassing the learned scorer.
pub fn context_from_scores(states: &[Tensor1], scores: &[Tensor1]) -> Result<Tensor1> {
    if scores.is_empty() {
        return Err(Error::Config("attention needs at least one head".into()));
    }
    if states.is_empty() {
        return Err(Error::EmptyInput("attention encoder states"));
    }
    let weights = scores
        .iter()
        .map(|e| {
            ensure_len("attention scores", states.len(), e.len())?;
            stable_softmax(e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(states, &weights))
}

impl ParamSet for AttentionParams {
    fn slices(&self) -> Vec<&[f64]> {
        self.heads
            .iter()
            .flat_map(|h| [h.projection.as_slice(), h.score.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.heads
            .iter_mut()
            .flat_map(|h| [h.projection.as_mut_slice(), h.score.as_mut_slice()])
            .collect()
    }
}
