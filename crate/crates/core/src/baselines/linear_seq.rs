use serde::{Deserialize, Serialize};

use crate::data::{Normalizer, WindowSample};
use crate::error::{ensure_len, Error, Result};
use crate::layers::{BiGruCache, BiGruParams, SummaryProjection};
use crate::numerics::{init_normal, init_normal_vec, ParamSet, RngState, Tensor1, Tensor2};
use crate::training::{SampleForward, Trainable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSeqConfig {
    pub t0: usize,
    pub tau: usize,
    pub enc_hidden: usize,
    pub summary_dim: usize,
}

/// Encoder, summary projection and a linear map from the summary to the
/// intercept and slope of a degree-one forecast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSeqParams {
    pub encoder: BiGruParams,
    pub summary: SummaryProjection,
    /// Rows: intercept, slope.
    pub coef: Tensor2,
    pub coef_bias: Tensor1,
}

impl ParamSet for LinearSeqParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.encoder.slices();
        v.extend(self.summary.slices());
        v.push(self.coef.as_slice());
        v.push(&self.coef_bias);
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder.slices_mut();
        v.extend(self.summary.slices_mut());
        v.push(self.coef.as_mut_slice());
        v.push(&mut self.coef_bias);
        v
    }
}

/// Non-personalized baseline: `x̂_{T+i} = a + b·i` with `(a, b)` read off the
/// encoded history. Sees glucose only.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSeqModel {
    pub config: LinearSeqConfig,
    pub normalizer: Normalizer,
    pub params: LinearSeqParams,
}

#[derive(Clone, Debug)]
pub struct LinearSeqTrace {
    encoder: BiGruCache,
    h_final: Tensor1,
    z: Tensor1,
}

impl LinearSeqModel {
    pub fn new(config: LinearSeqConfig, normalizer: Normalizer, rng: &mut RngState) -> Result<Self> {
        if config.t0 == 0 || config.tau == 0 || config.enc_hidden == 0 || config.summary_dim == 0 {
            return Err(Error::Config("LinearSeq dimensions must be at least 1".into()));
        }
        let encoder = BiGruParams::init(1, config.enc_hidden, rng)?;
        let summary = SummaryProjection::init(config.summary_dim, 2 * config.enc_hidden, rng)?;
        let coef = init_normal(2, config.summary_dim, rng)?;
        let coef_bias = init_normal_vec(2, rng)?;
        Ok(LinearSeqModel {
            config,
            normalizer,
            params: LinearSeqParams {
                encoder,
                summary,
                coef,
                coef_bias,
            },
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.num_params()
    }

    fn run(&self, history: &[f64]) -> Result<([f64; 2], LinearSeqTrace)> {
        ensure_len("LinearSeq history", self.config.t0, history.len())?;
        let inputs: Vec<Tensor1> = history.iter().map(|&x| vec![self.normalizer.apply(x)]).collect();
        let (states, encoder) = self.params.encoder.encode(&inputs)?;
        let h_final = self.params.encoder.final_state(&states)?;
        let z = self.params.summary.forward(&h_final)?;
        let mut ab = self.params.coef_bias.clone();
        self.params.coef.matvec_acc(&z, &mut ab);
        Ok(([ab[0], ab[1]], LinearSeqTrace { encoder, h_final, z }))
    }

    /// Intercept and slope in normalized units.
    pub fn coefficients(&self, history: &[f64]) -> Result<(f64, f64)> {
        let ([a, b], _) = self.run(history)?;
        Ok((a, b))
    }

    fn expand(&self, a: f64, b: f64) -> Vec<f64> {
        (1..=self.config.tau).map(|i| a + b * i as f64).collect()
    }

    /// Forecast in mg/dl from `t0` raw readings.
    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.coefficients(history)?;
        Ok(self
            .expand(a, b)
            .into_iter()
            .map(|z| self.normalizer.invert(z))
            .collect())
    }
}

impl Trainable for LinearSeqModel {
    type Params = LinearSeqParams;
    type Trace = LinearSeqTrace;

    fn params(&self) -> &LinearSeqParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut LinearSeqParams {
        &mut self.params
    }

    fn forward_sample(
        &self,
        window: &WindowSample,
        _teacher_forcing: f64,
        _rng: &mut RngState,
    ) -> Result<SampleForward<LinearSeqTrace>> {
        let ([a, b], trace) = self.run(window.history())?;
        Ok(SampleForward {
            predictions: self.expand(a, b),
            targets: window.targets().iter().map(|&v| self.normalizer.apply(v)).collect(),
            trace,
        })
    }

    fn backward_sample(
        &self,
        trace: &LinearSeqTrace,
        d_predictions: &[f64],
        grads: &mut LinearSeqParams,
    ) -> Result<()> {
        ensure_len("LinearSeq prediction gradient", self.config.tau, d_predictions.len())?;
        let da: f64 = d_predictions.iter().sum();
        let db: f64 = d_predictions.iter().enumerate().map(|(i, d)| (i + 1) as f64 * d).sum();
        let d_ab = [da, db];
        grads.coef.add_outer(&d_ab, &trace.z);
        grads.coef_bias[0] += da;
        grads.coef_bias[1] += db;
        let mut dz = vec![0.0; self.config.summary_dim];
        self.params.coef.matvec_t_acc(&d_ab, &mut dz);
        let dh = self
            .params
            .summary
            .backward(&trace.h_final, &trace.z, &dz, &mut grads.summary)?;
        let mut d_states = vec![vec![0.0; 2 * self.config.enc_hidden]; self.config.t0];
        self.params.encoder.add_final_state_grad(&dh, &mut d_states);
        self.params
            .encoder
            .backward(&trace.encoder, &d_states, &mut grads.encoder)?;
        Ok(())
    }
}
