use glucast::data::{generate_synthetic, load_csv, write_csv, PatientSeries, SyntheticConfig};
use glucast::model::{load_model, save_model};
use glucast::numerics::RngState;
use glucast::pipeline::{evaluate_model, train_model, Dataset, RunConfig};

const SMALL: &str = "t0 = 24
tau = 12
enc_hidden = 4
dec_hidden = 4
embed_dim = 2
attn_heads = 2
attn_hidden = 4
head_hidden = 6
max_epochs = 2
train_stride = 8
";

fn series(seed: u64) -> Vec<PatientSeries> {
    let config = SyntheticConfig {
        n_patients: 2,
        n_days: 4,
        outlier_rate: 0.02,
        ..SyntheticConfig::default()
    };
    generate_synthetic(&config, &mut RngState::new(seed))
        .into_iter()
        .map(|(_, s)| s)
        .collect()
}

#[test]
fn csv_train_save_load_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let written = series(3);
    write_csv(&data, &written).unwrap();
    let loaded = load_csv(&data).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(loaded[0].values(), written[0].values());

    let config = RunConfig::from_toml_str(SMALL).unwrap();
    let spec = config.model().window_spec();
    let dataset = Dataset::build(&loaded, &spec, None).unwrap();
    let (model, report) = train_model(&dataset, &config, &config.train()).unwrap();
    assert_eq!(report.epochs_run(), 2);

    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let reloaded = load_model(&path).unwrap();
    let a = evaluate_model(&model, &dataset.test, &config.horizons, false).unwrap();
    let b = evaluate_model(&reloaded, &dataset.test, &config.horizons, false).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.horizons, vec![3, 6, 9, 12]);

    // the registry stored with the model reproduces the same test windows
    let again = Dataset::build(&loaded, &spec, Some(&reloaded.patients)).unwrap();
    assert_eq!(again.test.len(), dataset.test.len());
}

#[test]
fn same_seed_same_model() {
    let config = RunConfig::from_toml_str(SMALL).unwrap();
    let data = series(4);
    let dataset = Dataset::build(&data, &config.model().window_spec(), None).unwrap();
    let (a, _) = train_model(&dataset, &config, &config.train()).unwrap();
    let (b, _) = train_model(&dataset, &config, &config.train()).unwrap();
    assert_eq!(
        glucast::model::to_json(&a).unwrap(),
        glucast::model::to_json(&b).unwrap()
    );
}
