use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::layers::gru::{GruCache, GruCellParams};
use crate::numerics::{ParamSet, RngState, Tensor1};

/// Bidirectional GRU encoder. Position `j` of the output is
/// `[forward state after j+1 steps || backward state after t0-j reverse steps]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiGruParams {
    pub fwd: GruCellParams,
    pub bwd: GruCellParams,
}

#[derive(Clone, Debug)]
pub struct BiGruCache {
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
}

impl BiGruParams {
    pub fn init(input_dim: usize, hidden_per_direction: usize, rng: &mut RngState) -> Result<Self> {
        Ok(BiGruParams {
            fwd: GruCellParams::init(input_dim, hidden_per_direction, rng)?,
            bwd: GruCellParams::init(input_dim, hidden_per_direction, rng)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.fwd.input_dim()
    }

    pub fn hidden_per_direction(&self) -> usize {
        self.fwd.hidden_dim()
    }

    /// Width of each concatenated state.
    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }

    pub fn encode(&self, inputs: &[Tensor1]) -> Result<(Vec<Tensor1>, BiGruCache)> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("encoder sequence"));
        }
        let len = inputs.len();
        let e = self.fwd.hidden_dim();

        let mut fwd_cache = Vec::with_capacity(len);
        let mut states: Vec<Tensor1> = Vec::with_capacity(len);
        let mut h = vec![0.0; e];
        for x in inputs {
            let (next, cache) = self.fwd.forward(x, &h)?;
            let mut state = Vec::with_capacity(self.output_dim());
            state.extend_from_slice(&next);
            states.push(state);
            fwd_cache.push(cache);
            h = next;
        }

        let mut bwd_cache = Vec::with_capacity(len);
        let mut h = vec![0.0; self.bwd.hidden_dim()];
        for j in (0..len).rev() {
            let (next, cache) = self.bwd.forward(&inputs[j], &h)?;
            states[j].extend_from_slice(&next);
            bwd_cache.push(cache);
            h = next;
        }
        bwd_cache.reverse();

        Ok((
            states,
            BiGruCache {
                fwd: fwd_cache,
                bwd: bwd_cache,
            },
        ))
    }

    /// Final state of each direction: `[forward after t0 steps || backward after t0 steps]`.
    pub fn final_state(&self, states: &[Tensor1]) -> Result<Tensor1> {
        let (first, last) = match (states.first(), states.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::EmptyInput("encoder states")),
        };
        let e = self.fwd.hidden_dim();
        let mut out = last[..e].to_vec();
        out.extend_from_slice(&first[e..]);
        Ok(out)
    }

    /// Folds a gradient w.r.t. [`final_state`](Self::final_state) into the
    /// per-position gradients.
    pub fn add_final_state_grad(&self, d_final: &[f64], d_states: &mut [Tensor1]) {
        let e = self.fwd.hidden_dim();
        let len = d_states.len();
        for (d, g) in d_states[len - 1][..e].iter_mut().zip(&d_final[..e]) {
            *d += g;
        }
        for (d, g) in d_states[0][e..].iter_mut().zip(&d_final[e..]) {
            *d += g;
        }
    }

    /// Back-propagation through time in both directions. Returns the
    /// gradient w.r.t. every input vector.
    pub fn backward(&self, cache: &BiGruCache, d_states: &[Tensor1], grads: &mut BiGruParams) -> Result<Vec<Tensor1>> {
        let len = cache.fwd.len();
        if len == 0 || cache.bwd.len() != len {
            return Err(Error::MissingCache("bidirectional encoder"));
        }
        ensure_len("encoder state gradients", len, d_states.len())?;
        let e = self.fwd.hidden_dim();
        let mut d_inputs = vec![vec![0.0; self.input_dim()]; len];

        let mut carry = vec![0.0; e];
        for j in (0..len).rev() {
            ensure_len("encoder state gradient width", self.output_dim(), d_states[j].len())?;
            let dh: Vec<f64> = d_states[j][..e].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let g = self.fwd.backward(&cache.fwd[j], &dh, &mut grads.fwd)?;
            d_inputs[j] = g.dx;
            carry = g.dh_prev;
        }

        let mut carry = vec![0.0; self.bwd.hidden_dim()];
        for j in 0..len {
            let dh: Vec<f64> = d_states[j][e..].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let g = self.bwd.backward(&cache.bwd[j], &dh, &mut grads.bwd)?;
            for (d, v) in d_inputs[j].iter_mut().zip(&g.dx) {
                *d += v;
            }
            carry = g.dh_prev;
        }
        Ok(d_inputs)
    }
}

impl ParamSet for BiGruParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.fwd.slices();
        v.extend(self.bwd.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.fwd.slices_mut();
        v.extend(self.bwd.slices_mut());
        v
    }
}
