//! The shared driver: clean → split → windowize → normalize, then train or
//! fit each method and score every method on the same test windows.

mod config;

use std::collections::BTreeMap;

use log::{info, warn};

use crate::baselines::{fit_ar_segments, persistence_forecast, ArModel, LinearSeqModel};
use crate::data::{
    clean, contiguous_runs, split_temporal, windowize, Normalizer, PatientSeries, WindowSample, WindowSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{build_report, ForecastRecord, MetricsReport};
use crate::model::Model;
use crate::numerics::RngState;
use crate::training::{fit, TrainConfig, TrainReport};

pub use config::{RunConfig, CONFIG_VERSION};

/// Windows of every split, with patients indexed by `patients`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub patients: Vec<String>,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    /// Cleaned training splits, used for normalization and AR fitting.
    pub train_series: Vec<PatientSeries>,
}

impl Dataset {
    /// Cleans and splits each patient, then windowizes each split separately.
    /// With `registry`, patient indices come from it (unlisted patients get
    /// `None`); otherwise every patient with a usable split is registered in
    /// input order.
    pub fn build(series: &[PatientSeries], spec: &WindowSpec, registry: Option<&[String]>) -> Result<Dataset> {
        let mut patients: Vec<String> = registry.map(<[String]>::to_vec).unwrap_or_default();
        let mut out = Dataset {
            patients: Vec::new(),
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            train_series: Vec::new(),
        };
        for s in series {
            let cleaned = clean(s);
            let removed = s.len() - cleaned.len();
            if removed > 0 {
                info!("patient {}: cleaning removed {removed} readings", s.patient_id);
            }
            let Some(split) = split_temporal(&cleaned) else {
                continue;
            };
            let index = match registry {
                Some(_) => patients.iter().position(|p| p == &s.patient_id),
                None => {
                    patients.push(s.patient_id.clone());
                    Some(patients.len() - 1)
                }
            };
            out.train.extend(windowize(&split.train, index, spec));
            out.val.extend(windowize(&split.val, index, spec));
            out.test.extend(windowize(&split.test, index, spec));
            out.train_series.push(split.train);
        }
        out.patients = patients;
        info!(
            "{} patients: {} train, {} validation, {} test windows",
            out.train_series.len(),
            out.train.len(),
            out.val.len(),
            out.test.len()
        );
        Ok(out)
    }

    /// z-score statistics over all training glucose values.
    pub fn fit_normalizer(&self) -> Result<Normalizer> {
        Normalizer::fit(
            self.train_series
                .iter()
                .flat_map(|s| s.readings.iter().map(|r| &r.glucose)),
        )
    }

    fn require(&self) -> Result<()> {
        if self.train.is_empty() || self.val.is_empty() || self.test.is_empty() {
            return Err(Error::InsufficientData(format!(
                "need windows in every split (train {}, val {}, test {}); the encoder length may exceed the split lengths",
                self.train.len(),
                self.val.len(),
                self.test.len()
            )));
        }
        Ok(())
    }
}

/// Applies `forecaster` to every window and pairs forecasts with truths.
pub fn forecast_records<F>(windows: &[WindowSample], mut forecaster: F) -> Result<Vec<ForecastRecord>>
where
    F: FnMut(&WindowSample) -> Result<Vec<f64>>,
{
    windows
        .iter()
        .map(|w| {
            Ok(ForecastRecord {
                patient_id: w.patient_id().to_string(),
                anchor: w.anchor(),
                last_value: w.last_value(),
                truth: w.targets().to_vec(),
                prediction: forecaster(w)?,
            })
        })
        .collect()
}

pub fn evaluate<F>(
    windows: &[WindowSample],
    horizons: &[usize],
    cadence_secs: i64,
    forecaster: F,
) -> Result<MetricsReport>
where
    F: FnMut(&WindowSample) -> Result<Vec<f64>>,
{
    build_report(&forecast_records(windows, forecaster)?, horizons, cadence_secs)
}

pub fn evaluate_model(
    model: &Model,
    windows: &[WindowSample],
    horizons: &[usize],
    cold_start: bool,
) -> Result<MetricsReport> {
    evaluate(windows, horizons, model.config.cadence_secs, |w| {
        Ok(model.forecast_with(w, cold_start)?.values)
    })
}

/// Independent streams for initialization and shuffling, both derived from
/// the run seed, so runs that differ only in training settings share both.
fn seeded(seed: u64) -> (RngState, RngState) {
    let mut master = RngState::new(seed);
    (master.fork(), master.fork())
}

/// Builds a model for the dataset and fits it.
pub fn train_model(dataset: &Dataset, config: &RunConfig, train: &TrainConfig) -> Result<(Model, TrainReport)> {
    dataset.require()?;
    let normalizer = dataset.fit_normalizer()?;
    let (mut init_rng, mut shuffle_rng) = seeded(config.seed);
    let mut model = Model::new(config.model(), normalizer, dataset.patients.clone(), &mut init_rng)?;
    info!("model has {} parameters", model.parameter_count());
    let report = fit(&mut model, &dataset.train, &dataset.val, train, &mut shuffle_rng)?;
    Ok((model, report))
}

pub fn train_linear_seq(dataset: &Dataset, config: &RunConfig) -> Result<(LinearSeqModel, TrainReport)> {
    dataset.require()?;
    let normalizer = dataset.fit_normalizer()?;
    let (mut init_rng, mut shuffle_rng) = seeded(config.seed);
    let mut model = LinearSeqModel::new(config.linear_seq(), normalizer, &mut init_rng)?;
    let train = TrainConfig {
        beta: 1.0,
        ..config.train()
    };
    let report = fit(&mut model, &dataset.train, &dataset.val, &train, &mut shuffle_rng)?;
    Ok((model, report))
}

/// One AR-I model per patient, fit on that patient's training runs, plus a
/// pooled fallback for patients whose own fit fails.
pub struct ArBank {
    per_patient: BTreeMap<String, ArModel>,
    pooled: ArModel,
}

impl ArBank {
    pub fn fit(dataset: &Dataset, spec: &WindowSpec, p: usize, d: usize) -> Result<ArBank> {
        let mut all_runs: Vec<Vec<f64>> = Vec::new();
        let mut per_patient = BTreeMap::new();
        for s in &dataset.train_series {
            let timestamps: Vec<_> = s.readings.iter().map(|r| r.timestamp).collect();
            let values = s.values();
            let runs: Vec<Vec<f64>> = contiguous_runs(&timestamps, spec)
                .into_iter()
                .map(|r| values[r].to_vec())
                .collect();
            let refs: Vec<&[f64]> = runs.iter().map(Vec::as_slice).collect();
            match fit_ar_segments(&refs, p, d) {
                Ok(m) => {
                    per_patient.insert(s.patient_id.clone(), m);
                }
                Err(e) => warn!(
                    "AR-I fit for patient {} failed ({e}); using the pooled model",
                    s.patient_id
                ),
            }
            all_runs.extend(runs);
        }
        let refs: Vec<&[f64]> = all_runs.iter().map(Vec::as_slice).collect();
        let pooled = fit_ar_segments(&refs, p, d)?;
        Ok(ArBank { per_patient, pooled })
    }

    pub fn model_for(&self, patient_id: &str) -> &ArModel {
        self.per_patient.get(patient_id).unwrap_or(&self.pooled)
    }
}

pub const METHOD_ROBUST: &str = "Ours-Robust";
pub const METHOD_MSE: &str = "Ours-MSE";
pub const METHOD_LINEAR_SEQ: &str = "LinearSeq";
pub const METHOD_AR: &str = "AR-I";
pub const METHOD_PERSISTENCE: &str = "Persistence";

/// One row group of a comparison; failures are kept, not dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodResult {
    pub method: String,
    pub outcome: std::result::Result<MetricsReport, String>,
    pub parameters: Option<usize>,
}

/// Trains or fits every method on the same dataset and scores them on the
/// same test windows.
pub fn compare(dataset: &Dataset, config: &RunConfig) -> Result<Vec<MethodResult>> {
    config.validate()?;
    dataset.require()?;
    let spec = config.model().window_spec();
    let horizons = &config.horizons;
    let cadence = config.cadence_secs;
    let mut results = Vec::new();
    let mut push = |method: &str, outcome: Result<(MetricsReport, Option<usize>)>| {
        let (outcome, parameters) = match outcome {
            Ok((r, p)) => (Ok(r), p),
            Err(e) => {
                warn!("{method} failed: {e}");
                (Err(e.to_string()), None)
            }
        };
        results.push(MethodResult {
            method: method.to_string(),
            outcome,
            parameters,
        });
    };

    for (method, beta) in [(METHOD_ROBUST, config.beta), (METHOD_MSE, 1.0)] {
        info!("training {method}");
        let train = TrainConfig { beta, ..config.train() };
        push(
            method,
            train_model(dataset, config, &train).and_then(|(m, _)| {
                Ok((
                    evaluate_model(&m, &dataset.test, horizons, false)?,
                    Some(m.parameter_count()),
                ))
            }),
        );
    }

    info!("training {METHOD_LINEAR_SEQ}");
    push(
        METHOD_LINEAR_SEQ,
        train_linear_seq(dataset, config).and_then(|(m, _)| {
            let r = evaluate(&dataset.test, horizons, cadence, |w| m.forecast(w.history()))?;
            Ok((r, Some(m.parameter_count())))
        }),
    );

    push(
        METHOD_AR,
        ArBank::fit(dataset, &spec, config.ar_order, config.ar_differencing).and_then(|bank| {
            let r = evaluate(&dataset.test, horizons, cadence, |w| {
                bank.model_for(w.patient_id()).forecast(w.history(), w.tau())
            })?;
            Ok((r, Some(config.ar_order + 1)))
        }),
    );

    push(
        METHOD_PERSISTENCE,
        evaluate(&dataset.test, horizons, cadence, |w| {
            persistence_forecast(w.history(), w.tau())
        })
        .map(|r| (r, None)),
    );
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn small_config() -> RunConfig {
        RunConfig {
            t0: 12,
            tau: 6,
            enc_hidden: 3,
            dec_hidden: 3,
            embed_dim: 2,
            attn_heads: 1,
            attn_hidden: 3,
            head_hidden: 4,
            max_epochs: 2,
            batch_size: 64,
            train_stride: 4,
            ar_order: 3,
            horizons: vec![3, 6],
            ..RunConfig::default()
        }
    }

    fn data(n_days: usize) -> Vec<PatientSeries> {
        let cfg = SyntheticConfig {
            n_patients: 3,
            n_days,
            outlier_rate: 0.02,
            ..SyntheticConfig::default()
        };
        generate_synthetic(&cfg, &mut RngState::new(9))
            .into_iter()
            .map(|(_, s)| s)
            .collect()
    }

    #[test]
    fn dataset_splits_and_registry() {
        let series = data(2);
        let spec = WindowSpec::new(12, 6);
        let ds = Dataset::build(&series, &spec, None).unwrap();
        assert_eq!(ds.patients, vec!["P001", "P002", "P003"]);
        assert!(ds.test.iter().all(|w| w.patient.is_some()));
        // the normalizer sees training values only
        let train_values: Vec<f64> = ds.train_series.iter().flat_map(|s| s.values()).collect();
        assert_eq!(ds.fit_normalizer().unwrap(), Normalizer::fit(&train_values).unwrap());

        let registry = vec!["P002".to_string()];
        let ds2 = Dataset::build(&series, &spec, Some(&registry)).unwrap();
        assert_eq!(ds2.patients, registry);
        assert!(ds2
            .test
            .iter()
            .all(|w| (w.patient_id() == "P002") == (w.patient == Some(0))));
    }

    #[test]
    fn compare_rows_and_determinism() {
        let series = data(3);
        let config = small_config();
        let ds = Dataset::build(&series, &config.model().window_spec(), None).unwrap();
        let a = compare(&ds, &config).unwrap();
        let names: Vec<&str> = a.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            names,
            vec![
                METHOD_ROBUST,
                METHOD_MSE,
                METHOD_LINEAR_SEQ,
                METHOD_AR,
                METHOD_PERSISTENCE
            ]
        );
        assert!(a.iter().all(|r| r.outcome.is_ok()));
        let b = compare(&ds, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_long_encoder_is_reported() {
        let series = data(1);
        let config = RunConfig::default();
        let ds = Dataset::build(&series, &config.model().window_spec(), None).unwrap();
        assert!(matches!(
            train_model(&ds, &config, &config.train()),
            Err(Error::InsufficientData(_))
        ));
    }
}
