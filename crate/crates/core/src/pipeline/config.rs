use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{LinearSeqConfig, DEFAULT_AR_DIFFERENCING, DEFAULT_AR_ORDER};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_HORIZONS;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Everything a run needs, as one flat TOML document. Missing keys take the
/// defaults below; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,

    pub t0: usize,
    pub tau: usize,
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

    pub beta: f64,
    pub clip_init: f64,
    pub clip_decay: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub rectified: bool,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub teacher_forcing_start: f64,
    pub teacher_forcing_end: f64,
    pub teacher_forcing_epochs: usize,
    pub train_stride: usize,

    pub ar_order: usize,
    pub ar_differencing: usize,
    pub horizons: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_parts(&ModelConfig::default(), &TrainConfig::default(), 42)
    }
}

impl RunConfig {
    pub fn from_parts(m: &ModelConfig, t: &TrainConfig, seed: u64) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed,
            t0: m.t0,
            tau: m.tau,
            enc_hidden: m.enc_hidden,
            dec_hidden: m.dec_hidden,
            embed_dim: m.embed_dim,
            attn_heads: m.attn_heads,
            attn_hidden: m.attn_hidden,
            head_hidden: m.head_hidden,
            use_attention: m.use_attention,
            use_embedding: m.use_embedding,
            use_time_features: m.use_time_features,
            cadence_secs: m.cadence_secs,
            gap_tolerance_secs: m.gap_tolerance_secs,
            beta: t.beta,
            clip_init: t.clip_init,
            clip_decay: t.clip_decay,
            learning_rate: t.learning_rate,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_epsilon: t.adam_epsilon,
            rectified: t.rectified,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            teacher_forcing_start: t.teacher_forcing_start,
            teacher_forcing_end: t.teacher_forcing_end,
            teacher_forcing_epochs: t.teacher_forcing_epochs,
            train_stride: t.train_stride,
            ar_order: DEFAULT_AR_ORDER,
            ar_differencing: DEFAULT_AR_DIFFERENCING,
            horizons: DEFAULT_HORIZONS.to_vec(),
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            t0: self.t0,
            tau: self.tau,
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            embed_dim: self.embed_dim,
            attn_heads: self.attn_heads,
            attn_hidden: self.attn_hidden,
            head_hidden: self.head_hidden,
            use_attention: self.use_attention,
            use_embedding: self.use_embedding,
            use_time_features: self.use_time_features,
            cadence_secs: self.cadence_secs,
            gap_tolerance_secs: self.gap_tolerance_secs,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            beta: self.beta,
            clip_init: self.clip_init,
            clip_decay: self.clip_decay,
            learning_rate: self.learning_rate,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            rectified: self.rectified,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            teacher_forcing_start: self.teacher_forcing_start,
            teacher_forcing_end: self.teacher_forcing_end,
            teacher_forcing_epochs: self.teacher_forcing_epochs,
            train_stride: self.train_stride,
        }
    }

    /// The LinearSeq baseline shares the encoder size and uses the decoder
    /// width for its summary.
    pub fn linear_seq(&self) -> LinearSeqConfig {
        LinearSeqConfig {
            t0: self.t0,
            tau: self.tau,
            enc_hidden: self.enc_hidden,
            summary_dim: self.dec_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.model().validate()?;
        self.train().validate()?;
        if self.ar_order == 0 || self.ar_differencing > 1 {
            return Err(Error::Config("ar_order must be >= 1 and ar_differencing 0 or 1".into()));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if let Some(h) = self.horizons.iter().find(|&&h| h == 0 || h > self.tau) {
            return Err(Error::Config(format!("horizon {h} must lie in 1..={}", self.tau)));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert_eq!(
            (c.t0, c.tau, c.beta, c.clip_init, c.clip_decay),
            (190, 12, 0.9, 2.0, 0.99)
        );
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml_str("version = 1\nbeta = 1.0\nt0 = 24\n").unwrap();
        assert_eq!((c.beta, c.t0, c.tau), (1.0, 24, 12));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::from_toml_str("dropout = 0.5\n").is_err());
        assert!(RunConfig::from_toml_str("version = 2\n").is_err());
        assert!(RunConfig::from_toml_str("horizons = [3, 13]\n").is_err());
        assert!(RunConfig::from_toml_str("beta = 0.0\n").is_err());
    }
}
