//! Shared fixtures for the criterion benches in `benches/`.

use glucast::data::{generate_synthetic, windowize, Normalizer, SyntheticConfig, WindowSample};
use glucast::model::{Model, ModelConfig};
use glucast::numerics::RngState;

/// Windows of one synthetic patient, one day long, at the given lengths.
pub fn windows(config: &ModelConfig) -> Vec<WindowSample> {
    let synth = SyntheticConfig {
        n_patients: 1,
        n_days: 2,
        ..SyntheticConfig::default()
    };
    let (_, series) = generate_synthetic(&synth, &mut RngState::new(7)).remove(0);
    windowize(&series, Some(0), &config.window_spec())
}

pub fn model(config: ModelConfig) -> Model {
    Model::new(
        config,
        Normalizer { mean: 140.0, std: 40.0 },
        vec!["P001".into()],
        &mut RngState::new(3),
    )
    .expect("valid benchmark config")
}
