use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use log::{info, warn};
use serde::Serialize;

use glucast::data::{clean, generate_synthetic, load_csv, parse_timestamp, write_csv, PatientSeries, SyntheticConfig};
use glucast::metrics::{autocorrelation, render_table, write_report_csv, MetricsReport, Stratum};
use glucast::model::{load_model, save_model, ModelConfig};
use glucast::numerics::RngState;
use glucast::pipeline::{compare as compare_methods, evaluate_model, train_model, Dataset, RunConfig};
use glucast::training::TrainReport;

use crate::failure::{CliResult, Context, Failure};
use crate::{AcfArgs, CompareArgs, EvaluateArgs, ForecastArgs, GenerateArgs, Overrides, TrainArgs};

/// `<path>.<suffix>`, next to the artifact it describes.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Writes the effective configuration next to an output artifact.
fn write_echo(out: &Path, command: &str, body: &impl Serialize) -> CliResult {
    let path = sibling(out, ".config.toml");
    let text = toml::to_string(body).map_err(Failure::runtime)?;
    std::fs::write(
        &path,
        format!("# effective configuration of `glucast {command}`\n{text}"),
    )
    .context(format!("writing {}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .context(format!("creating {}", path.display()))
}

fn load_data(path: &Path) -> CliResult<Vec<PatientSeries>> {
    let series = load_csv(path).context(format!("reading {}", path.display()))?;
    if series.is_empty() {
        return Err(Failure::runtime(anyhow!("{} holds no readings", path.display())));
    }
    Ok(series)
}

fn resolve(o: &Overrides) -> CliResult<RunConfig> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::usage(anyhow!("config {}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = o.seed {
        c.seed = seed;
    }
    if let Some(beta) = o.beta {
        c.beta = beta;
    }
    if let Some(n) = o.max_epochs {
        c.max_epochs = n;
    }
    if let Some(n) = o.train_stride {
        c.train_stride = n;
    }
    c.use_attention &= !o.no_attention;
    c.use_embedding &= !o.no_embedding;
    c.use_time_features &= !o.no_time_features;
    c.validate().map_err(Failure::usage)?;
    Ok(c)
}

#[derive(Serialize)]
struct GenerateEcho<'a> {
    command: &'a str,
    seed: u64,
    records: usize,
    synthetic: &'a SyntheticConfig,
}

pub fn generate(a: &GenerateArgs) -> CliResult {
    if !(0.0..1.0).contains(&a.outlier_rate) || !(a.noise_std >= 0.0) {
        return Err(Failure::usage(anyhow!(
            "--outlier-rate must lie in [0, 1) and --noise-std be >= 0"
        )));
    }
    let config = SyntheticConfig {
        n_patients: a.patients as usize,
        n_days: a.days as usize,
        outlier_rate: a.outlier_rate,
        noise_std: a.noise_std,
        ..SyntheticConfig::default()
    };
    let series: Vec<PatientSeries> = generate_synthetic(&config, &mut RngState::new(a.seed))
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let records =
        write_csv(&a.out, &series).map_err(|e| Failure::usage(anyhow!("writing {}: {e}", a.out.display())))?;
    write_echo(
        &a.out,
        "generate",
        &GenerateEcho {
            command: "generate",
            seed: a.seed,
            records,
            synthetic: &config,
        },
    )
    .map_err(|f| Failure::usage(f.error))?;
    println!(
        "wrote {records} records for {} patients to {}",
        series.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AcfEcho<'a> {
    command: &'a str,
    input: &'a Path,
    max_lag: usize,
}

pub fn analyze_acf(a: &AcfArgs) -> CliResult {
    let series = load_data(&a.input)?;
    let mut out = create(&a.out)?;
    writeln!(out, "patient,lag,acf,band95,band99")?;
    let mut done = 0;
    println!(
        "{:<10}{:>8}{:>10}{:>12}{:>10}",
        "patient", "n", "band99", "min acf", "at lag"
    );
    for s in &series {
        // the cleaned series, with any gaps closed up
        let values = clean(s).values();
        match autocorrelation(&values, a.max_lag) {
            Ok(acf) => {
                acf.write_rows(&mut out, &s.patient_id)?;
                let (lag, min) = acf
                    .values
                    .iter()
                    .copied()
                    .enumerate()
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap_or((0, 1.0));
                println!(
                    "{:<10}{:>8}{:>10.4}{:>12.4}{:>10}",
                    s.patient_id, acf.n, acf.band99, min, lag
                );
                done += 1;
            }
            Err(e) => warn!("patient {} skipped: {e}", s.patient_id),
        }
    }
    out.flush()?;
    write_echo(
        &a.out,
        "analyze-acf",
        &AcfEcho {
            command: "analyze-acf",
            input: &a.input,
            max_lag: a.max_lag,
        },
    )?;
    if done == 0 {
        return Err(Failure::runtime(anyhow!("no patient had a usable series")));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    command: &'a str,
    data: &'a Path,
    parameters: usize,
    config: &'a RunConfig,
    report: &'a TrainReport,
}

pub fn train(a: &TrainArgs) -> CliResult {
    let config = resolve(&a.overrides)?;
    let series = load_data(&a.data)?;
    let dataset = Dataset::build(&series, &config.model().window_spec(), None)?;
    let (model, report) = train_model(&dataset, &config, &config.train())?;
    save_model(&model, &a.model_out).context(format!("writing {}", a.model_out.display()))?;
    let summary = TrainSummary {
        command: "train",
        data: &a.data,
        parameters: model.parameter_count(),
        config: &config,
        report: &report,
    };
    let report_path = sibling(&a.model_out, ".report.json");
    let json = serde_json::to_string_pretty(&summary).map_err(Failure::runtime)?;
    std::fs::write(&report_path, json + "\n").context(format!("writing {}", report_path.display()))?;
    write_echo(&a.model_out, "train", &config)?;
    println!("parameters: {}", model.parameter_count());
    println!(
        "epochs run: {} (best {}, validation MSE {:.6}{})",
        report.epochs_run(),
        report.best_epoch,
        report.best_val_loss,
        if report.stopped_early { ", stopped early" } else { "" }
    );
    println!("model written to {}", a.model_out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvaluateEcho<'a> {
    command: &'a str,
    model_file: &'a Path,
    data: &'a Path,
    horizons: &'a [usize],
    cold_start: bool,
    model: &'a ModelConfig,
}

fn print_table(entries: &[(&str, &MetricsReport)]) {
    print!("{}", render_table(entries));
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    let model = load_model(&a.model).context(format!("reading {}", a.model.display()))?;
    let tau = model.config.tau;
    if a.horizons.is_empty() || a.horizons.iter().any(|&h| h == 0 || h > tau) {
        return Err(Failure::usage(anyhow!("horizons must lie in 1..={tau} for this model")));
    }
    let series = load_data(&a.data)?;
    let dataset = Dataset::build(&series, &model.config.window_spec(), Some(&model.patients))?;
    let mut windows = dataset.test;
    if model.config.use_embedding && !a.cold_start {
        let before = windows.len();
        windows.retain(|w| w.patient.is_some());
        if windows.len() < before {
            warn!(
                "{} test windows belong to patients the model has not seen; pass --cold-start to score them",
                before - windows.len()
            );
        }
    }
    if windows.is_empty() {
        return Err(Failure::runtime(anyhow!("no test windows to evaluate")));
    }
    info!("evaluating on {} test windows", windows.len());
    let report = evaluate_model(&model, &windows, &a.horizons, a.cold_start)?;
    let mut out = create(&a.out)?;
    write_report_csv(&mut out, &[("model", &report)])?;
    out.flush()?;
    write_echo(
        &a.out,
        "evaluate",
        &EvaluateEcho {
            command: "evaluate",
            model_file: &a.model,
            data: &a.data,
            horizons: &a.horizons,
            cold_start: a.cold_start,
            model: &model.config,
        },
    )?;
    print_table(&[("model", &report)]);
    Ok(())
}

pub fn compare(a: &CompareArgs) -> CliResult {
    let config = resolve(&a.overrides)?;
    let series = load_data(&a.data)?;
    let dataset = Dataset::build(&series, &config.model().window_spec(), None)?;
    let results = compare_methods(&dataset, &config)?;
    let ok: Vec<(&str, &MetricsReport)> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|rep| (r.method.as_str(), rep)))
        .collect();
    let mut out = create(&a.out)?;
    write_report_csv(&mut out, &ok)?;
    let failed: Vec<(&str, &str)> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.method.as_str(), e.as_str())))
        .collect();
    for (method, _) in &failed {
        writeln!(out, "{method},NA,NA,NA,failed,NA,0")?;
    }
    out.flush()?;
    write_echo(&a.out, "compare", &config)?;
    print_table(&ok);
    for r in &results {
        if let Some(p) = r.parameters {
            println!("{}: {p} parameters", r.method);
        }
    }
    if let Some((method, count)) = ok.first().map(|(m, r)| (m, r.cell(config.horizons[0], Stratum::Full))) {
        info!("{method}: {} test windows", count.map_or(0, |c| c.count));
    }
    for (method, error) in &failed {
        println!("{method}: FAILED ({error})");
    }
    if !failed.is_empty() {
        return Err(Failure::runtime(anyhow!(
            "{} of {} methods failed",
            failed.len(),
            results.len()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ForecastEcho<'a> {
    command: &'a str,
    model_file: &'a Path,
    data: &'a Path,
    patient: &'a str,
    at: &'a str,
    cold_start: bool,
}

pub fn forecast(a: &ForecastArgs) -> CliResult {
    let at = parse_timestamp(&a.at).ok_or_else(|| Failure::usage(anyhow!("cannot parse --at `{}`", a.at)))?;
    let model = load_model(&a.model).context(format!("reading {}", a.model.display()))?;
    let series = load_data(&a.data)?;
    let Some(s) = series.iter().find(|s| s.patient_id == a.patient) else {
        return Err(Failure::runtime(anyhow!(
            "patient {} has no readings in {}",
            a.patient,
            a.data.display()
        )));
    };
    let mut readings = clean(s).readings;
    readings.retain(|r| r.timestamp <= at);
    let f = model.forecast_from_readings(&a.patient, &readings, a.cold_start)?;
    if f.anchor != at {
        info!("last reading before {at} is at {}", f.anchor);
    }

    let mut text = String::from("step,timestamp,glucose_mgdl\n");
    for (i, (t, v)) in f.timestamps.iter().zip(&f.values).enumerate() {
        text.push_str(&format!("{},{},{v}\n", i + 1, t.to_rfc3339()));
    }
    let mut attention = String::new();
    if let Some(steps) = &f.attention {
        let history = &readings[readings.len() - model.config.t0..];
        attention.push_str("step,head,position,timestamp,weight\n");
        for (i, heads) in steps.iter().enumerate() {
            for (h, weights) in heads.iter().enumerate() {
                for (p, w) in weights.iter().enumerate() {
                    attention.push_str(&format!(
                        "{},{h},{p},{},{w}\n",
                        i + 1,
                        history[p].timestamp.to_rfc3339()
                    ));
                }
            }
        }
    }
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text).context(format!("writing {}", path.display()))?;
            if !attention.is_empty() {
                let att = sibling(path, ".attention.csv");
                std::fs::write(&att, &attention).context(format!("writing {}", att.display()))?;
            }
            write_echo(
                path,
                "forecast",
                &ForecastEcho {
                    command: "forecast",
                    model_file: &a.model,
                    data: &a.data,
                    patient: &a.patient,
                    at: &a.at,
                    cold_start: a.cold_start,
                },
            )?;
            println!("forecast written to {}", path.display());
        }
        None => {
            print!("{text}");
            if !attention.is_empty() {
                print!("\n{attention}");
            }
        }
    }
    Ok(())
}
