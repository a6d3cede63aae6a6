use std::sync::Arc;

use chrono::TimeZone;

use super::*;
use crate::data::{windowize, PatientSeries, Segment};
use crate::numerics::{dot, grad_check, sigmoid};

fn tiny_config() -> ModelConfig {
    ModelConfig {
        t0: 8,
        tau: 3,
        enc_hidden: 3,
        dec_hidden: 4,
        embed_dim: 2,
        attn_heads: 2,
        attn_hidden: 3,
        head_hidden: 5,
        ..ModelConfig::default()
    }
}

fn start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 3, 21, 0, 0).unwrap()
}

fn wavy_series(id: &str, len: usize, phase: f64) -> PatientSeries {
    let values: Vec<f64> = (0..len)
        .map(|i| 130.0 + 40.0 * ((i as f64 + phase) * 0.3).sin())
        .collect();
    PatientSeries::regular(id, start(), &values)
}

fn tiny_model(config: ModelConfig, seed: u64) -> Model {
    let normalizer = Normalizer { mean: 130.0, std: 30.0 };
    let mut rng = RngState::new(seed);
    let mut model = Model::new(config, normalizer, vec!["a".into(), "b".into()], &mut rng).unwrap();
    // Larger weights than the default init so every path is exercised.
    let flat: Vec<f64> = (0..model.parameter_count()).map(|_| rng.normal(0.0, 0.5)).collect();
    model.params.set_flat(&flat).unwrap();
    model
}

fn first_window(model: &Model, patient: Option<usize>) -> WindowSample {
    let series = wavy_series("a", 40, 1.0);
    windowize(&series, patient, &model.config.window_spec()).swap_remove(3)
}

#[test]
fn zero_params_decoder_step() {
    let mut model = tiny_model(tiny_config(), 1);
    let zeros = vec![0.0; model.parameter_count()];
    model.params.set_flat(&zeros).unwrap();
    let states = vec![vec![0.3; 6]; 8];
    let s_prev = [0.4, -0.2, 1.0, 0.0];
    let tf = extract_time_features(start());
    let step = model
        .decoder_step(&s_prev, 0.7, Some(&[0.1, 0.2]), Some(&tf), &states)
        .unwrap();
    // u = 0.5 and c = 0, so the state halves; the head outputs 0.
    assert_eq!(step.state, vec![0.2, -0.1, 0.5, 0.0]);
    assert_eq!(step.prediction, 0.0);
    // zero scores give uniform attention
    for head in step.attention.unwrap() {
        for w in head {
            assert!((w - 0.125).abs() < 1e-15);
        }
    }
}

#[test]
fn decoder_step_rejects_mismatched_inputs() {
    let model = tiny_model(tiny_config(), 2);
    let states = vec![vec![0.0; 6]; 8];
    let tf = extract_time_features(start());
    assert!(model.decoder_step(&[0.0; 4], 0.0, None, Some(&tf), &states).is_err());
    assert!(model
        .decoder_step(&[0.0; 4], 0.0, Some(&[0.0, 0.0]), None, &states)
        .is_err());
    assert!(model
        .decoder_step(&[0.0; 3], 0.0, Some(&[0.0, 0.0]), Some(&tf), &states)
        .is_err());
}

/// Scalar re-implementation of one decoder step for K = 1 and t0 = 2, written
/// from the defining equations rather than the layer code.
#[test]
fn single_head_step_matches_scalar_oracle() {
    let config = ModelConfig {
        t0: 2,
        tau: 1,
        enc_hidden: 1,
        dec_hidden: 1,
        attn_heads: 1,
        attn_hidden: 1,
        head_hidden: 1,
        use_embedding: false,
        use_time_features: false,
        ..ModelConfig::default()
    };
    let model = tiny_model(config, 5);
    let p = &model.params;
    let states = vec![vec![0.2, -0.5], vec![0.7, 0.1]];
    let s_prev = 0.3;
    let x_prev = -0.4;
    let step = model.decoder_step(&[s_prev], x_prev, None, None, &states).unwrap();

    let att = &p.attention.as_ref().unwrap().heads[0];
    let w = att.projection.row(0);
    let r = att.score[0];
    let score = |h: &[f64]| (r * (w[0] * h[0] + w[1] * h[1] + w[2] * s_prev)).tanh();
    let (e0, e1) = (score(&states[0]), score(&states[1]));
    let (a0, a1) = (e0.exp() / (e0.exp() + e1.exp()), e1.exp() / (e0.exp() + e1.exp()));
    let ctx = [
        (a0 * states[0][0] + a1 * states[1][0]).tanh(),
        (a0 * states[0][1] + a1 * states[1][1]).tanh(),
    ];

    let d = &p.decoder;
    let x = [ctx[0], ctx[1], x_prev];
    let lin = |m: &crate::numerics::Tensor2| m.row(0).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
    let u = sigmoid(lin(&d.w_update) + d.u_update.get(0, 0) * s_prev + d.b_update[0]);
    let rr = sigmoid(lin(&d.w_reset) + d.u_reset.get(0, 0) * s_prev + d.b_reset[0]);
    let c = (lin(&d.w_candidate) + d.u_candidate.get(0, 0) * rr * s_prev + d.b_candidate[0]).tanh();
    let s = (1.0 - u) * s_prev + u * c;

    let q = &p.head;
    let q_in = [ctx[0], ctx[1], s, x_prev];
    let hidden = (dot(q.w_hidden.row(0), &q_in) + q.b_hidden[0]).tanh();
    let pred = q.w_out[0] * hidden + q.b_out;

    assert!((step.state[0] - s).abs() < 1e-14);
    assert!((step.prediction - pred).abs() < 1e-14);
    let weights = &step.attention.unwrap()[0];
    assert!((weights[0] - a0).abs() < 1e-14 && (weights[1] - a1).abs() < 1e-14);
}

#[test]
fn rollout_composes_layers() {
    let model = tiny_model(tiny_config(), 6);
    let w = first_window(&model, Some(1));
    let trace = model.rollout(&ModelInput::from(&w), None, false).unwrap();
    assert_eq!(trace.decoder_calls(), 3);

    // Recompose from the public pieces.
    let g = model.params.embedding.as_ref().unwrap().lookup(1).unwrap().to_vec();
    let inputs: Vec<Tensor1> = w
        .history()
        .iter()
        .zip(w.features())
        .map(|(&x, f)| {
            let mut v = vec![model.normalizer.apply(x)];
            v.extend(&g);
            v.extend(f.as_array());
            v
        })
        .collect();
    let (states, _) = model.params.encoder.encode(&inputs).unwrap();
    let h_final = model.params.encoder.final_state(&states).unwrap();
    let mut s = model.params.summary.forward(&h_final).unwrap();
    let mut x = model.normalizer.apply(w.last_value());
    for i in 0..3 {
        let step = model
            .decoder_step(&s, x, Some(&g), Some(&w.features()[8 + i]), &states)
            .unwrap();
        assert_eq!(step.prediction, trace.predictions[i]);
        assert_eq!(trace.consumed[i], x);
        s = step.state;
        x = step.prediction;
    }
}

fn check_gradients(config: ModelConfig, teacher_mask: Option<&[bool]>, seed: u64) {
    let model = tiny_model(config.clone(), seed);
    let patient = config.use_embedding.then_some(1);
    let w = first_window(&model, patient);
    let targets: Vec<f64> = w.targets().iter().map(|&v| model.normalizer.apply(v)).collect();
    let weights = [0.7, -1.3, 0.4];
    let teacher = teacher_mask.map(|mask| TeacherForcing {
        targets: &targets,
        mask,
    });

    let trace = model.rollout(&ModelInput::from(&w), teacher, false).unwrap();
    let mut grads = model.params.zeros_like();
    model.backward(&trace, &weights, &mut grads).unwrap();

    let flat = model.params.to_flat();
    let mut probe = model.clone();
    let worst = grad_check(
        |p| {
            probe.params.set_flat(p).unwrap();
            let t = probe.rollout(&ModelInput::from(&w), teacher, false).unwrap();
            dot(&t.predictions, &weights)
        },
        &flat,
        &grads.to_flat(),
    )
    .unwrap();
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn full_model_gradient() {
    check_gradients(tiny_config(), None, 21);
}

#[test]
fn gradient_with_teacher_forcing() {
    check_gradients(tiny_config(), Some(&[false, true, false]), 22);
}

#[test]
fn gradient_without_attention() {
    let config = ModelConfig {
        use_attention: false,
        ..tiny_config()
    };
    check_gradients(config, None, 23);
}

#[test]
fn gradient_without_embedding_or_time() {
    let config = ModelConfig {
        use_embedding: false,
        use_time_features: false,
        ..tiny_config()
    };
    check_gradients(config, None, 24);
}

#[test]
fn embedding_gradient_touches_one_row() {
    let model = tiny_model(tiny_config(), 8);
    let w = first_window(&model, Some(1));
    let trace = model.rollout(&ModelInput::from(&w), None, false).unwrap();
    let mut grads = model.params.zeros_like();
    model.backward(&trace, &[1.0, 1.0, 1.0], &mut grads).unwrap();
    let table = &grads.embedding.unwrap().table;
    assert!(table.row(0).iter().all(|&g| g == 0.0));
    assert!(table.row(1).iter().any(|&g| g != 0.0));
}

#[test]
fn teacher_forcing_consumes_truths() {
    let model = tiny_model(tiny_config(), 9);
    let w = first_window(&model, Some(0));
    let targets: Vec<f64> = w.targets().iter().map(|&v| model.normalizer.apply(v)).collect();
    let input = ModelInput::from(&w);

    let all = [true, true, true];
    let forced = model
        .rollout(
            &input,
            Some(TeacherForcing {
                targets: &targets,
                mask: &all,
            }),
            false,
        )
        .unwrap();
    assert_eq!(forced.consumed[0], model.normalizer.apply(w.last_value()));
    assert_eq!(&forced.consumed[1..], &targets[..2]);
    assert_eq!(forced.forced, vec![false, true, true]);

    let none = [false; 3];
    let free = model
        .rollout(
            &input,
            Some(TeacherForcing {
                targets: &targets,
                mask: &none,
            }),
            false,
        )
        .unwrap();
    assert_eq!(&free.consumed[1..], &free.predictions[..2]);
    assert_eq!(free.predictions, model.predict_normalized(&input, false).unwrap());
}

/// Closed-form count, derived by hand from the layer shapes.
fn expected_count(c: &ModelConfig, patients: usize) -> usize {
    let gru = |i: usize, h: usize| 3 * (h * i + h * h + h);
    let e = if c.use_embedding { c.embed_dim } else { 0 };
    let t = if c.use_time_features { 3 } else { 0 };
    let n = 2 * c.enc_hidden;
    let att_w = if c.use_attention { n } else { 0 };
    let head_in = if c.use_attention {
        n + c.dec_hidden + e + 1 + t
    } else {
        c.dec_hidden + e + t
    };
    2 * gru(1 + e + t, c.enc_hidden)
        + c.dec_hidden * n
        + gru(att_w + e + 1 + t, c.dec_hidden)
        + if c.use_attention {
            c.attn_heads * (c.attn_hidden * (n + c.dec_hidden) + c.attn_hidden)
        } else {
            0
        }
        + if c.use_embedding { patients * c.embed_dim } else { 0 }
        + c.head_hidden * head_in
        + 2 * c.head_hidden
        + 1
}

#[test]
fn parameter_count_accounting() {
    for (att, emb, time) in [
        (true, true, true),
        (false, true, true),
        (true, false, true),
        (true, true, false),
    ] {
        let config = ModelConfig {
            use_attention: att,
            use_embedding: emb,
            use_time_features: time,
            ..ModelConfig::default()
        };
        let model = Model::new(
            config.clone(),
            Normalizer::IDENTITY,
            vec!["a".into(); 12],
            &mut RngState::new(1),
        )
        .unwrap();
        assert_eq!(model.parameter_count(), expected_count(&config, 12));
    }
    let full = expected_count(&ModelConfig::default(), 12);
    let no_att = expected_count(
        &ModelConfig {
            use_attention: false,
            ..ModelConfig::default()
        },
        12,
    );
    assert!(no_att < full);
}

#[test]
fn cold_start_uses_mean_embedding() {
    let model = tiny_model(tiny_config(), 10);
    let w = first_window(&model, None);
    assert!(matches!(model.forecast(&w), Err(Error::UnknownPatient(_))));
    let cold = model.forecast_with(&w, true).unwrap();

    let mut averaged = model.clone();
    let mean = model.params.embedding.as_ref().unwrap().mean_row();
    let table = &mut averaged.params.embedding.as_mut().unwrap().table;
    table.row_mut(0).copy_from_slice(&mean);
    let w0 = first_window(&model, Some(0));
    assert_eq!(averaged.forecast(&w0).unwrap().values, cold.values);
}

#[test]
fn forecast_is_denormalized() {
    let model = tiny_model(tiny_config(), 11);
    let w = first_window(&model, Some(0));
    let f = model.forecast(&w).unwrap();
    let z = model.predict_normalized(&ModelInput::from(&w), false).unwrap();
    for (v, z) in f.values.iter().zip(&z) {
        assert_eq!(*v, z * 30.0 + 130.0);
    }
    assert_eq!(f.timestamps, w.timestamps()[8..].to_vec());
    assert_eq!(f.attention.unwrap().len(), 3);
}

#[test]
fn forecast_from_readings_matches_window() {
    let model = tiny_model(tiny_config(), 12);
    let series = wavy_series("a", 8, 0.0);
    let f = model.forecast_from_readings("a", &series.readings, false).unwrap();
    let seg = Arc::new(Segment::from_series(&wavy_series("a", 11, 0.0)));
    let w = WindowSample::new(seg, Some(0), 0, &model.config.window_spec()).unwrap();
    assert_eq!(f.values, model.forecast(&w).unwrap().values);
}

#[test]
fn forecast_from_readings_errors() {
    let model = tiny_model(tiny_config(), 13);
    let short = wavy_series("a", 5, 0.0);
    match model.forecast_from_readings("a", &short.readings, false) {
        Err(Error::InsufficientData(msg)) => assert!(msg.contains("3 short")),
        other => panic!("unexpected {other:?}"),
    }
    let mut gappy = wavy_series("a", 10, 0.0);
    for r in &mut gappy.readings[6..] {
        r.timestamp += Duration::minutes(20);
    }
    assert!(matches!(
        model.forecast_from_readings("a", &gappy.readings, false),
        Err(Error::Gap { position: 3, .. })
    ));
    let ok = wavy_series("zz", 10, 0.0);
    assert!(matches!(
        model.forecast_from_readings("zz", &ok.readings, false),
        Err(Error::UnknownPatient(_))
    ));
    assert!(model.forecast_from_readings("zz", &ok.readings, true).is_ok());
}

#[test]
fn save_load_round_trip_is_byte_identical() {
    let model = tiny_model(tiny_config(), 14);
    let text = to_json(&model).unwrap();
    let loaded = from_json(&text).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(to_json(&loaded).unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let again = load_model(&path).unwrap();
    let w = first_window(&model, Some(1));
    assert_eq!(again.forecast(&w).unwrap(), model.forecast(&w).unwrap());
}

#[test]
fn truncated_file_names_the_section() {
    let text = to_json(&tiny_model(tiny_config(), 15)).unwrap();
    let cut = text.find("decoder.u_reset").unwrap() + 60;
    match from_json(&text[..cut]) {
        Err(Error::ModelFormat(msg)) => {
            assert!(msg.contains("truncated"), "{msg}");
            assert!(msg.contains("`tensors`"), "{msg}");
            assert!(msg.contains("decoder.u_reset"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let cut = text.find("\"normalizer\"").unwrap() + 20;
    match from_json(&text[..cut]) {
        Err(Error::ModelFormat(msg)) => assert!(msg.contains("`normalizer`"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejects_bad_files() {
    let text = to_json(&tiny_model(tiny_config(), 16)).unwrap();
    let version = text.replacen("\"version\": 1", "\"version\": 9", 1);
    assert!(matches!(from_json(&version), Err(Error::ModelFormat(m)) if m.contains("version 9")));
    let unknown = text.replacen("\"t0\": 8", "\"t0\": 8,\n    \"dropout\": 0.1", 1);
    assert!(matches!(from_json(&unknown), Err(Error::ModelFormat(m)) if m.contains("dropout")));
    let shape = text
        .replacen("\"t0\": 8", "\"t0\": 8", 1)
        .replacen("\"enc_hidden\": 3", "\"enc_hidden\": 4", 1);
    assert!(matches!(from_json(&shape), Err(Error::ModelFormat(m)) if m.contains("encoder.fwd.w_update")));
}

#[test]
fn config_validation() {
    let bad = ModelConfig {
        attn_heads: 0,
        ..tiny_config()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let fine = ModelConfig {
        attn_heads: 0,
        use_attention: false,
        ..tiny_config()
    };
    assert!(fine.validate().is_ok());
    assert!(Model::new(tiny_config(), Normalizer::IDENTITY, vec![], &mut RngState::new(0)).is_err());
}
