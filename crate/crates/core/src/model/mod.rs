//! The personalized encoder-decoder forecaster.
//!
//! Encoder input at position `j`: `[x_j || g(v) || time_j]`.
//! Decoder step `i` (1-based), with attention:
//!
//! ```text
//! a_i  = attention(H, s_{i-1})
//! s_i  = GRU([a_i || g(v) || x̂_{i-1} || time_{T+i}], s_{i-1})
//! x̂_i = Q([a_i || s_i || g(v) || x̂_{i-1} || time_{T+i}])
//! ```
//!
//! and without attention `s_i = GRU([g(v) || x̂_{i-1} || time_{T+i}], s_{i-1})`,
//! `x̂_i = Q([s_i || g(v) || time_{T+i}])`. `s_0 = tanh(W_z h_final)` and
//! `x̂_0 = x_T`. Disabled components (embedding, time features, attention)
//! are omitted from the inputs, not zeroed, so parameter counts shrink.
//! All values inside the network are z-scored with the stored
//! [`Normalizer`].

mod io;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::data::{extract_time_features, Normalizer, Reading, TimeFeatures, WindowSample, WindowSpec};
use crate::error::{ensure_len, Error, Result};
use crate::layers::{
    AttentionCache, AttentionParams, BiGruCache, BiGruParams, EmbeddingTable, FeedforwardHead, GruCache, GruCellParams,
    HeadCache, SummaryProjection,
};
use crate::numerics::{ParamSet, RngState, Tensor1};

pub use io::{from_json, load_model, save_model, to_json, MODEL_FORMAT, MODEL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder length (readings conditioning the forecast).
    pub t0: usize,
    /// Forecast steps.
    pub tau: usize,
    /// Hidden units per encoder direction.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub embed_dim: usize,
    pub attn_heads: usize,
    pub attn_hidden: usize,
    pub head_hidden: usize,
    pub use_attention: bool,
    pub use_embedding: bool,
    pub use_time_features: bool,
    pub cadence_secs: i64,
    pub gap_tolerance_secs: i64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            t0: 190,
            tau: 12,
            enc_hidden: 120,
            dec_hidden: 30,
            embed_dim: 5,
            attn_heads: 4,
            attn_hidden: 64,
            head_hidden: 60,
            use_attention: true,
            use_embedding: true,
            use_time_features: true,
            cadence_secs: crate::data::CADENCE_SECS,
            gap_tolerance_secs: crate::data::GAP_TOLERANCE_SECS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t0", self.t0),
            ("tau", self.tau),
            ("enc_hidden", self.enc_hidden),
            ("dec_hidden", self.dec_hidden),
            ("head_hidden", self.head_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.use_embedding && self.embed_dim == 0 {
            return Err(Error::Config(
                "embed_dim must be at least 1 when embeddings are on".into(),
            ));
        }
        if self.use_attention && (self.attn_heads == 0 || self.attn_hidden == 0) {
            return Err(Error::Config(
                "attention needs attn_heads >= 1 and attn_hidden >= 1".into(),
            ));
        }
        if self.cadence_secs <= 0 || self.gap_tolerance_secs < 0 {
            return Err(Error::Config(
                "cadence must be positive and tolerance non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            t0: self.t0,
            tau: self.tau,
            cadence_secs: self.cadence_secs,
            tolerance_secs: self.gap_tolerance_secs,
        }
    }

    fn embed_width(&self) -> usize {
        if self.use_embedding {
            self.embed_dim
        } else {
            0
        }
    }

    fn time_width(&self) -> usize {
        if self.use_time_features {
            TimeFeatures::WIDTH
        } else {
            0
        }
    }

    /// Width `N` of one concatenated encoder state.
    pub fn encoder_state_dim(&self) -> usize {
        2 * self.enc_hidden
    }

    pub fn encoder_input_dim(&self) -> usize {
        1 + self.embed_width() + self.time_width()
    }

    fn context_width(&self) -> usize {
        if self.use_attention {
            self.encoder_state_dim()
        } else {
            0
        }
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.context_width() + self.embed_width() + 1 + self.time_width()
    }

    pub fn head_input_dim(&self) -> usize {
        if self.use_attention {
            self.context_width() + self.dec_hidden + self.embed_width() + 1 + self.time_width()
        } else {
            self.dec_hidden + self.embed_width() + self.time_width()
        }
    }
}

/// All learnable tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: BiGruParams,
    pub summary: SummaryProjection,
    pub decoder: GruCellParams,
    pub attention: Option<AttentionParams>,
    pub embedding: Option<EmbeddingTable>,
    pub head: FeedforwardHead,
}

impl ModelParams {
    pub fn init(config: &ModelConfig, n_patients: usize, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let n = config.encoder_state_dim();
        let encoder = BiGruParams::init(config.encoder_input_dim(), config.enc_hidden, rng)?;
        let summary = SummaryProjection::init(config.dec_hidden, n, rng)?;
        let decoder = GruCellParams::init(config.decoder_input_dim(), config.dec_hidden, rng)?;
        let attention = if config.use_attention {
            Some(AttentionParams::init(
                config.attn_heads,
                config.attn_hidden,
                n,
                config.dec_hidden,
                rng,
            )?)
        } else {
            None
        };
        let embedding = if config.use_embedding {
            if n_patients == 0 {
                return Err(Error::Config("embeddings need at least one registered patient".into()));
            }
            Some(EmbeddingTable::init(n_patients, config.embed_dim, rng)?)
        } else {
            None
        };
        let head = FeedforwardHead::init(config.head_input_dim(), config.head_hidden, rng)?;
        Ok(ModelParams {
            encoder,
            summary,
            decoder,
            attention,
            embedding,
            head,
        })
    }

    /// Tensor names, shapes and data in serialization order.
    pub fn named_tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        push_gru(&mut out, "encoder.fwd", &self.encoder.fwd);
        push_gru(&mut out, "encoder.bwd", &self.encoder.bwd);
        out.push((
            "summary.weight".into(),
            self.summary.weight.shape(),
            self.summary.weight.as_slice(),
        ));
        push_gru(&mut out, "decoder", &self.decoder);
        if let Some(att) = &self.attention {
            for (k, h) in att.heads.iter().enumerate() {
                out.push((
                    format!("attention.{k}.projection"),
                    h.projection.shape(),
                    h.projection.as_slice(),
                ));
                out.push((format!("attention.{k}.score"), (1, h.score.len()), &h.score));
            }
        }
        if let Some(e) = &self.embedding {
            out.push(("embedding.table".into(), e.table.shape(), e.table.as_slice()));
        }
        let q = &self.head;
        out.push(("head.w_hidden".into(), q.w_hidden.shape(), q.w_hidden.as_slice()));
        out.push(("head.b_hidden".into(), (1, q.b_hidden.len()), &q.b_hidden));
        out.push(("head.w_out".into(), (1, q.w_out.len()), &q.w_out));
        out.push(("head.b_out".into(), (1, 1), std::slice::from_ref(&q.b_out)));
        out
    }
}

impl ParamSet for ModelParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.encoder.slices();
        v.extend(self.summary.slices());
        v.extend(self.decoder.slices());
        if let Some(a) = &self.attention {
            v.extend(a.slices());
        }
        if let Some(e) = &self.embedding {
            v.extend(e.slices());
        }
        v.extend(self.head.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder.slices_mut();
        v.extend(self.summary.slices_mut());
        v.extend(self.decoder.slices_mut());
        if let Some(a) = &mut self.attention {
            v.extend(a.slices_mut());
        }
        if let Some(e) = &mut self.embedding {
            v.extend(e.slices_mut());
        }
        v.extend(self.head.slices_mut());
        v
    }
}

/// What the network sees for one forecast: raw history plus calendar
/// features for the `t0` observed and `tau` future positions.
#[derive(Clone, Copy, Debug)]
pub struct ModelInput<'a> {
    pub patient: Option<usize>,
    pub history: &'a [f64],
    pub features: &'a [TimeFeatures],
}

impl<'a> From<&'a WindowSample> for ModelInput<'a> {
    fn from(w: &'a WindowSample) -> Self {
        ModelInput {
            patient: w.patient,
            history: w.history(),
            features: w.features(),
        }
    }
}

/// Teacher forcing for one roll-out: normalized truths and which steps
/// consume them instead of the previous prediction.
#[derive(Clone, Copy, Debug)]
pub struct TeacherForcing<'a> {
    pub targets: &'a [f64],
    pub mask: &'a [bool],
}

/// Output of one decoder step.
#[derive(Clone, Debug)]
pub struct DecoderStep {
    pub state: Tensor1,
    /// Normalized prediction.
    pub prediction: f64,
    pub attention: Option<Vec<Tensor1>>,
}

#[derive(Clone, Debug)]
struct StepCache {
    attention: Option<AttentionCache>,
    gru: GruCache,
    head: HeadCache,
}

/// Everything a backward pass needs from one roll-out, plus instrumentation.
#[derive(Clone, Debug)]
pub struct RolloutTrace {
    embedding: Option<(Option<usize>, Tensor1)>,
    encoder: BiGruCache,
    states: Vec<Tensor1>,
    h_final: Tensor1,
    z: Tensor1,
    steps: Vec<StepCache>,
    /// Normalized predictions, one per step.
    pub predictions: Vec<f64>,
    /// Normalized previous-value input consumed at each step.
    pub consumed: Vec<f64>,
    /// Whether each step consumed a teacher value.
    pub forced: Vec<bool>,
    /// Attention weights per step (`K × t0` each) when attention is on.
    pub attention: Vec<Vec<Tensor1>>,
}

impl RolloutTrace {
    pub fn decoder_calls(&self) -> usize {
        self.steps.len()
    }
}

/// A de-normalized forecast.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub patient_id: String,
    pub anchor: DateTime<Utc>,
    /// Predicted glucose for `T+1 ..= T+tau`, mg/dl.
    pub values: Vec<f64>,
    pub timestamps: Vec<DateTime<Utc>>,
    /// Per step, per head attention weights over the encoder positions.
    pub attention: Option<Vec<Vec<Tensor1>>>,
}

/// A trained forecaster: architecture, scaling, patient table and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    /// Patient ids, indexed like the embedding rows.
    pub patients: Vec<String>,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, normalizer: Normalizer, patients: Vec<String>, rng: &mut RngState) -> Result<Self> {
        let params = ModelParams::init(&config, patients.len(), rng)?;
        Ok(Model {
            config,
            normalizer,
            patients,
            params,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.num_params()
    }

    pub fn patient_index(&self, patient_id: &str) -> Option<usize> {
        self.patients.iter().position(|p| p == patient_id)
    }

    /// Embedding vector for a patient, or the mean row when `cold_start` is
    /// set and the patient is unregistered.
    fn resolve_embedding(&self, patient: Option<usize>, cold_start: bool) -> Result<Option<(Option<usize>, Tensor1)>> {
        let Some(table) = &self.params.embedding else {
            return Ok(None);
        };
        match patient {
            Some(v) if v < table.num_patients() => Ok(Some((Some(v), table.lookup(v)?.to_vec()))),
            _ if cold_start => Ok(Some((None, table.mean_row()))),
            Some(v) => Err(Error::UnknownPatient(format!("#{v}"))),
            None => Err(Error::UnknownPatient("unregistered patient".into())),
        }
    }

    fn push_time(&self, out: &mut Vec<f64>, f: &TimeFeatures) {
        if self.config.use_time_features {
            out.extend_from_slice(&f.as_array());
        }
    }

    fn push_embedding(out: &mut Vec<f64>, emb: &Option<(Option<usize>, Tensor1)>) {
        if let Some((_, g)) = emb {
            out.extend_from_slice(g);
        }
    }

    fn encode(&self, input: &ModelInput, emb: &Option<(Option<usize>, Tensor1)>) -> Result<(Vec<Tensor1>, BiGruCache)> {
        let c = &self.config;
        ensure_len("history length", c.t0, input.history.len())?;
        ensure_len("time feature count", c.t0 + c.tau, input.features.len())?;
        let inputs: Vec<Tensor1> = input
            .history
            .iter()
            .zip(input.features)
            .map(|(&x, f)| {
                let mut v = Vec::with_capacity(c.encoder_input_dim());
                v.push(self.normalizer.apply(x));
                Self::push_embedding(&mut v, emb);
                self.push_time(&mut v, f);
                v
            })
            .collect();
        self.params.encoder.encode(&inputs)
    }

    fn step_cached(
        &self,
        s_prev: &[f64],
        x_prev: f64,
        emb: &Option<(Option<usize>, Tensor1)>,
        time: &TimeFeatures,
        states: &[Tensor1],
    ) -> Result<(DecoderStep, StepCache)> {
        let c = &self.config;
        ensure_len("decoder state", c.dec_hidden, s_prev.len())?;
        let (context, attn_cache, weights) = match &self.params.attention {
            Some(att) => {
                let (out, cache) = att.forward(states, s_prev)?;
                (Some(out.context), Some(cache), Some(out.weights))
            }
            None => (None, None, None),
        };

        let mut dec_in = Vec::with_capacity(c.decoder_input_dim());
        if let Some(a) = &context {
            dec_in.extend_from_slice(a);
        }
        Self::push_embedding(&mut dec_in, emb);
        dec_in.push(x_prev);
        self.push_time(&mut dec_in, time);
        let (state, gru) = self.params.decoder.forward(&dec_in, s_prev)?;

        let mut q_in = Vec::with_capacity(c.head_input_dim());
        if let Some(a) = &context {
            q_in.extend_from_slice(a);
        }
        q_in.extend_from_slice(&state);
        Self::push_embedding(&mut q_in, emb);
        if context.is_some() {
            q_in.push(x_prev);
        }
        self.push_time(&mut q_in, time);
        let (prediction, head) = self.params.head.forward(&q_in)?;

        Ok((
            DecoderStep {
                state,
                prediction,
                attention: weights,
            },
            StepCache {
                attention: attn_cache,
                gru,
                head,
            },
        ))
    }

    /// One decoder step in normalized space. `embedding` must be given iff
    /// embeddings are on; `time` iff time features are on.
    pub fn decoder_step(
        &self,
        s_prev: &[f64],
        x_prev: f64,
        embedding: Option<&[f64]>,
        time: Option<&TimeFeatures>,
        encoder_states: &[Tensor1],
    ) -> Result<DecoderStep> {
        let c = &self.config;
        if embedding.is_some() != c.use_embedding {
            return Err(Error::dims(
                "decoder embedding input",
                c.embed_width(),
                embedding.map_or(0, <[f64]>::len),
            ));
        }
        if let Some(g) = embedding {
            ensure_len("decoder embedding input", c.embed_dim, g.len())?;
        }
        if time.is_some() != c.use_time_features {
            return Err(Error::dims(
                "decoder time features",
                c.time_width(),
                time.map_or(0, |_| 3),
            ));
        }
        let emb = embedding.map(|g| (None, g.to_vec()));
        let zero_time = TimeFeatures {
            hour_frac: 0.0,
            dow_frac: 0.0,
            weekend: 0.0,
        };
        Ok(self
            .step_cached(s_prev, x_prev, &emb, time.unwrap_or(&zero_time), encoder_states)?
            .0)
    }

    /// Runs the encoder and the `tau`-step roll-out, keeping every cache.
    pub fn rollout(
        &self,
        input: &ModelInput,
        teacher: Option<TeacherForcing>,
        cold_start: bool,
    ) -> Result<RolloutTrace> {
        let c = &self.config;
        if let Some(t) = &teacher {
            ensure_len("teacher targets", c.tau, t.targets.len())?;
            ensure_len("teacher mask", c.tau, t.mask.len())?;
        }
        let emb = self.resolve_embedding(input.patient, cold_start)?;
        let (states, encoder) = self.encode(input, &emb)?;
        let h_final = self.params.encoder.final_state(&states)?;
        let z = self.params.summary.forward(&h_final)?;

        let mut s = z.clone();
        let mut x_prev = self.normalizer.apply(input.history[c.t0 - 1]);
        let mut steps = Vec::with_capacity(c.tau);
        let mut predictions = Vec::with_capacity(c.tau);
        let mut consumed = Vec::with_capacity(c.tau);
        let mut forced = Vec::with_capacity(c.tau);
        let mut attention = Vec::new();
        for i in 0..c.tau {
            let is_forced = i > 0 && teacher.is_some_and(|t| t.mask[i]);
            if is_forced {
                x_prev = teacher.expect("checked").targets[i - 1];
            }
            consumed.push(x_prev);
            forced.push(is_forced);
            let (step, cache) = self.step_cached(&s, x_prev, &emb, &input.features[c.t0 + i], &states)?;
            if !step.prediction.is_finite() {
                return Err(Error::NonFinite(format!("prediction at step {}", i + 1)));
            }
            if let Some(w) = step.attention {
                attention.push(w);
            }
            predictions.push(step.prediction);
            x_prev = step.prediction;
            s = step.state;
            steps.push(cache);
        }
        Ok(RolloutTrace {
            embedding: emb,
            encoder,
            states,
            h_final,
            z,
            steps,
            predictions,
            consumed,
            forced,
            attention,
        })
    }

    /// Normalized predictions only.
    pub fn predict_normalized(&self, input: &ModelInput, cold_start: bool) -> Result<Vec<f64>> {
        Ok(self.rollout(input, None, cold_start)?.predictions)
    }

    /// Accumulates into `grads` the gradient of a scalar loss whose gradient
    /// w.r.t. the normalized predictions is `d_predictions`.
    pub fn backward(&self, trace: &RolloutTrace, d_predictions: &[f64], grads: &mut ModelParams) -> Result<()> {
        let c = &self.config;
        let tau = trace.steps.len();
        if tau == 0 {
            return Err(Error::MissingCache("model roll-out"));
        }
        ensure_len("prediction gradient", tau, d_predictions.len())?;
        let n = c.encoder_state_dim();
        let d = c.dec_hidden;
        let e = c.embed_width();
        let use_att = c.use_attention;

        let mut d_states = vec![vec![0.0; n]; trace.states.len()];
        let mut d_embedding = vec![0.0; e];
        let mut ds_carry = vec![0.0; d];
        let mut dx_carry = 0.0;

        for i in (0..tau).rev() {
            let step = &trace.steps[i];
            let d_pred = d_predictions[i] + dx_carry;
            let dq = self.params.head.backward(&step.head, d_pred, &mut grads.head);

            // Head input: [a? | s | g? | x_prev (attention only) | time?]
            let mut off = 0;
            let mut d_context = vec![0.0; if use_att { n } else { 0 }];
            if use_att {
                d_context.copy_from_slice(&dq[..n]);
                off += n;
            }
            let mut ds: Vec<f64> = dq[off..off + d].iter().zip(&ds_carry).map(|(a, b)| a + b).collect();
            off += d;
            add_into(&mut d_embedding, &dq[off..off + e]);
            off += e;
            let mut dx_prev = if use_att { dq[off] } else { 0.0 };

            // Decoder input: [a? | g? | x_prev | time?]
            let g = self.params.decoder.backward(&step.gru, &ds, &mut grads.decoder)?;
            let mut off = 0;
            if use_att {
                add_into(&mut d_context, &g.dx[..n]);
                off += n;
            }
            add_into(&mut d_embedding, &g.dx[off..off + e]);
            off += e;
            dx_prev += g.dx[off];
            ds = g.dh_prev;

            if let (Some(att), Some(cache)) = (&self.params.attention, &step.attention) {
                let grads_att = grads
                    .attention
                    .as_mut()
                    .ok_or(Error::MissingCache("attention gradients"))?;
                let ds_att = att.backward(&trace.states, cache, &d_context, &mut d_states, grads_att)?;
                add_into(&mut ds, &ds_att);
            } else if use_att {
                return Err(Error::MissingCache("attention step"));
            }

            ds_carry = ds;
            // x̂_0 is the observed x_T and forced inputs are data: no gradient.
            dx_carry = if i > 0 && !trace.forced[i] { dx_prev } else { 0.0 };
        }

        let dh_final = self
            .params
            .summary
            .backward(&trace.h_final, &trace.z, &ds_carry, &mut grads.summary)?;
        self.params.encoder.add_final_state_grad(&dh_final, &mut d_states);
        let d_inputs = self
            .params
            .encoder
            .backward(&trace.encoder, &d_states, &mut grads.encoder)?;

        if let Some((patient, _)) = &trace.embedding {
            for d_in in &d_inputs {
                add_into(&mut d_embedding, &d_in[1..1 + e]);
            }
            if let (Some(v), Some(table), Some(g_table)) = (patient, &self.params.embedding, grads.embedding.as_mut()) {
                table.backward(*v, &d_embedding, g_table)?;
            }
        }
        Ok(())
    }

    /// Forecast for a window, de-normalized to mg/dl.
    pub fn forecast(&self, window: &WindowSample) -> Result<Forecast> {
        self.forecast_with(window, false)
    }

    pub fn forecast_with(&self, window: &WindowSample, cold_start: bool) -> Result<Forecast> {
        let trace = self.rollout(&ModelInput::from(window), None, cold_start)?;
        let future = window.timestamps()[self.config.t0..].to_vec();
        Ok(self.make_forecast(window.patient_id(), window.anchor(), future, trace))
    }

    /// Forecast from the most recent `t0` readings of a patient. The readings
    /// must be contiguous; future timestamps follow the nominal cadence.
    pub fn forecast_from_readings(&self, patient_id: &str, readings: &[Reading], cold_start: bool) -> Result<Forecast> {
        let c = &self.config;
        if readings.len() < c.t0 {
            return Err(Error::InsufficientData(format!(
                "forecast needs {} contiguous readings, only {} available ({} short)",
                c.t0,
                readings.len(),
                c.t0 - readings.len()
            )));
        }
        let recent = &readings[readings.len() - c.t0..];
        let spec = c.window_spec();
        for (k, pair) in recent.windows(2).enumerate() {
            if !spec.is_contiguous(pair[0].timestamp, pair[1].timestamp) {
                return Err(Error::Gap {
                    position: k,
                    seconds: (pair[1].timestamp - pair[0].timestamp).num_seconds(),
                });
            }
        }
        let anchor = recent[c.t0 - 1].timestamp;
        let future: Vec<DateTime<Utc>> = (1..=c.tau as i64)
            .map(|i| anchor + Duration::seconds(c.cadence_secs * i))
            .collect();
        let features: Vec<TimeFeatures> = recent
            .iter()
            .map(|r| r.timestamp)
            .chain(future.iter().copied())
            .map(extract_time_features)
            .collect();
        let history: Vec<f64> = recent.iter().map(|r| r.glucose).collect();
        let patient = self.patient_index(patient_id);
        if patient.is_none() && !cold_start && c.use_embedding {
            return Err(Error::UnknownPatient(patient_id.to_string()));
        }
        let input = ModelInput {
            patient,
            history: &history,
            features: &features,
        };
        let trace = self.rollout(&input, None, cold_start)?;
        Ok(self.make_forecast(patient_id, anchor, future, trace))
    }

    fn make_forecast(
        &self,
        patient_id: &str,
        anchor: DateTime<Utc>,
        timestamps: Vec<DateTime<Utc>>,
        trace: RolloutTrace,
    ) -> Forecast {
        Forecast {
            patient_id: patient_id.to_string(),
            anchor,
            values: trace.predictions.iter().map(|&z| self.normalizer.invert(z)).collect(),
            timestamps,
            attention: if self.config.use_attention {
                Some(trace.attention)
            } else {
                None
            },
        }
    }
}

type NamedTensor<'a> = (String, (usize, usize), &'a [f64]);

fn push_gru<'a>(out: &mut Vec<NamedTensor<'a>>, prefix: &str, p: &'a GruCellParams) {
    let h = p.hidden_dim();
    out.push((format!("{prefix}.w_update"), p.w_update.shape(), p.w_update.as_slice()));
    out.push((format!("{prefix}.w_reset"), p.w_reset.shape(), p.w_reset.as_slice()));
    out.push((
        format!("{prefix}.w_candidate"),
        p.w_candidate.shape(),
        p.w_candidate.as_slice(),
    ));
    out.push((format!("{prefix}.u_update"), p.u_update.shape(), p.u_update.as_slice()));
    out.push((format!("{prefix}.u_reset"), p.u_reset.shape(), p.u_reset.as_slice()));
    out.push((
        format!("{prefix}.u_candidate"),
        p.u_candidate.shape(),
        p.u_candidate.as_slice(),
    ));
    out.push((format!("{prefix}.b_update"), (1, h), &p.b_update));
    out.push((format!("{prefix}.b_reset"), (1, h), &p.b_reset));
    out.push((format!("{prefix}.b_candidate"), (1, h), &p.b_candidate));
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests;
