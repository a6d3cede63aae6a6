//! Mini-batch training with a trimmed loss, decaying element-wise gradient
//! clipping, RAdam, optional teacher forcing and early stopping.

mod loss;
mod optimizer;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::{Model, ModelInput, RolloutTrace, TeacherForcing};
use crate::numerics::{ParamSet, RngState};

pub use loss::{keep_count, per_sample_loss, per_sample_loss_grad, trimmed_batch_loss};
pub use optimizer::{clip_gradients, clip_threshold, optimizer_step, AdamConfig, OptimizerState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Fraction of each batch kept by the trimmed loss; 1 is plain MSE.
    pub beta: f64,
    pub clip_init: f64,
    /// Per-epoch multiplicative decay of the clip threshold.
    pub clip_decay: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub rectified: bool,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Teacher forcing probability moves linearly from start to end over
    /// `teacher_forcing_epochs` epochs, then stays at end.
    pub teacher_forcing_start: f64,
    pub teacher_forcing_end: f64,
    pub teacher_forcing_epochs: usize,
    /// Use every `train_stride`-th training window (1 = all).
    pub train_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 0.9,
            clip_init: 2.0,
            clip_decay: 0.99,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            rectified: true,
            batch_size: 128,
            max_epochs: 100,
            patience: 10,
            teacher_forcing_start: 0.0,
            teacher_forcing_end: 0.0,
            teacher_forcing_epochs: 0,
            train_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return fail(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if !(self.clip_init > 0.0) {
            return fail(format!("clip_init must be positive, got {}", self.clip_init));
        }
        if !(self.clip_decay > 0.0 && self.clip_decay <= 1.0) {
            return fail(format!("clip_decay must lie in (0, 1], got {}", self.clip_decay));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        for (name, p) in [
            ("teacher_forcing_start", self.teacher_forcing_start),
            ("teacher_forcing_end", self.teacher_forcing_end),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.train_stride == 0 {
            return fail("batch_size, max_epochs and train_stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
            rectified: self.rectified,
        }
    }

    pub fn clip_at(&self, epoch: usize) -> f64 {
        clip_threshold(self.clip_init, self.clip_decay, epoch)
    }

    pub fn teacher_forcing_at(&self, epoch: usize) -> f64 {
        if epoch >= self.teacher_forcing_epochs {
            return self.teacher_forcing_end;
        }
        let f = epoch as f64 / self.teacher_forcing_epochs as f64;
        self.teacher_forcing_start + f * (self.teacher_forcing_end - self.teacher_forcing_start)
    }
}

/// One sample's forward pass: normalized predictions and targets plus
/// whatever the backward pass needs.
pub struct SampleForward<T> {
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub trace: T,
}

/// A sequence forecaster the generic trainer can fit.
pub trait Trainable: Clone {
    type Params: ParamSet;
    type Trace;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;

    fn forward_sample(
        &self,
        window: &WindowSample,
        teacher_forcing: f64,
        rng: &mut RngState,
    ) -> Result<SampleForward<Self::Trace>>;

    /// Accumulates parameter gradients given `d loss / d predictions`.
    fn backward_sample(&self, trace: &Self::Trace, d_predictions: &[f64], grads: &mut Self::Params) -> Result<()>;
}

impl Trainable for Model {
    type Params = crate::model::ModelParams;
    type Trace = RolloutTrace;

    fn params(&self) -> &Self::Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Self::Params {
        &mut self.params
    }

    fn forward_sample(
        &self,
        window: &WindowSample,
        teacher_forcing: f64,
        rng: &mut RngState,
    ) -> Result<SampleForward<RolloutTrace>> {
        let targets: Vec<f64> = window.targets().iter().map(|&v| self.normalizer.apply(v)).collect();
        let mask: Vec<bool> = if teacher_forcing > 0.0 {
            (0..targets.len()).map(|_| rng.bernoulli(teacher_forcing)).collect()
        } else {
            Vec::new()
        };
        let teacher = (!mask.is_empty()).then_some(TeacherForcing {
            targets: &targets,
            mask: &mask,
        });
        let trace = self.rollout(&ModelInput::from(window), teacher, false)?;
        Ok(SampleForward {
            predictions: trace.predictions.clone(),
            targets,
            trace,
        })
    }

    fn backward_sample(&self, trace: &RolloutTrace, d_predictions: &[f64], grads: &mut Self::Params) -> Result<()> {
        self.backward(trace, d_predictions, grads)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Trimmed batch loss.
    pub loss: f64,
    /// Batch positions that contributed gradient.
    pub kept: Vec<usize>,
}

/// One optimizer update on `batch`: forward all samples, keep the lowest
/// `⌈beta·B⌉` losses, backpropagate the kept ones in ascending batch order,
/// clip at `clip`, step.
pub fn train_step<M: Trainable>(
    model: &mut M,
    batch: &[&WindowSample],
    config: &TrainConfig,
    clip: f64,
    teacher_forcing: f64,
    state: &mut OptimizerState<M::Params>,
    rng: &mut RngState,
) -> Result<StepOutcome> {
    let forwards = batch
        .iter()
        .map(|w| model.forward_sample(w, teacher_forcing, rng))
        .collect::<Result<Vec<_>>>()?;
    let losses = forwards
        .iter()
        .map(|f| per_sample_loss(&f.predictions, &f.targets))
        .collect::<Result<Vec<_>>>()?;
    let (loss, kept) = trimmed_batch_loss(&losses, config.beta)?;

    let weight = 1.0 / kept.len() as f64;
    let mut grads = model.params().zeros_like();
    for &i in &kept {
        let f = &forwards[i];
        let d = per_sample_loss_grad(&f.predictions, &f.targets, weight);
        model.backward_sample(&f.trace, &d, &mut grads)?;
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    clip_gradients(&mut grads, clip);
    optimizer_step(model.params_mut(), &grads, state, &config.adam())?;
    Ok(StepOutcome { loss, kept })
}

/// Untrimmed mean per-sample MSE without teacher forcing.
pub fn evaluation_loss<M: Trainable>(model: &M, windows: &[WindowSample]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("validation windows"));
    }
    let mut rng = RngState::new(0);
    let mut sum = 0.0;
    for w in windows {
        let f = model.forward_sample(w, 0.0, &mut rng)?;
        sum += per_sample_loss(&f.predictions, &f.targets)?;
    }
    Ok(sum / windows.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean trimmed batch loss.
    pub train_loss: f64,
    /// Untrimmed validation MSE.
    pub val_loss: f64,
    pub clip_threshold: f64,
    pub teacher_forcing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Fits `model` in place and leaves it at the best validation epoch.
pub fn fit<M: Trainable>(
    model: &mut M,
    train: &[WindowSample],
    val: &[WindowSample],
    config: &TrainConfig,
    rng: &mut RngState,
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training windows"));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation windows"));
    }
    let pool: Vec<&WindowSample> = train.iter().step_by(config.train_stride).collect();
    info!(
        "training on {} of {} windows, {} validation windows",
        pool.len(),
        train.len(),
        val.len()
    );

    let mut state = OptimizerState::new(model.params());
    let mut best = model.params().clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        let clip = config.clip_at(epoch);
        let tf = config.teacher_forcing_at(epoch);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| pool[i]).collect();
            let out = train_step(model, &batch, config, clip, tf, &mut state, rng)?;
            loss_sum += out.loss;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;
        let val_loss = evaluation_loss(model, val)?;
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} clip {clip:.4}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            clip_threshold: clip,
            teacher_forcing: tf,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = model.params().clone();
        } else if epoch - best_epoch >= config.patience {
            stopped_early = true;
            info!("early stop after epoch {epoch}; best epoch {best_epoch}");
            break;
        }
    }
    *model.params_mut() = best;
    info!("best validation loss {best_val:.6} at epoch {best_epoch}");
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}
