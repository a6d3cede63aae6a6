//! JSON model files.
//!
//! Layout: format tag, version, architecture, normalizer, patient table, then
//! every tensor by name with its shape. Floats use shortest round-trip
//! formatting, so save → load → save reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelParams};
use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, RngState};

pub const MODEL_FORMAT: &str = "glucast-model";
pub const MODEL_VERSION: u32 = 1;

const SECTIONS: [&str; 6] = ["format", "version", "config", "normalizer", "patients", "tensors"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    normalizer: Normalizer,
    patients: Vec<String>,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

pub fn to_json(model: &Model) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        config: model.config.clone(),
        normalizer: model.normalizer,
        patients: model.patients.clone(),
        tensors: model
            .params
            .named_tensors()
            .into_iter()
            .map(|(name, (r, c), data)| TensorRecord {
                name,
                shape: [r, c],
                data: data.to_vec(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| describe_parse_error(text, &e))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!("unexpected format tag `{}`", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (this build reads version {MODEL_VERSION})",
            file.version
        )));
    }
    file.config
        .validate()
        .map_err(|e| Error::ModelFormat(format!("section `config`: {e}")))?;

    // Build the expected layout, then overwrite every tensor.
    let mut params = ModelParams::init(&file.config, file.patients.len(), &mut RngState::new(0))
        .map_err(|e| Error::ModelFormat(format!("section `config`: {e}")))?;
    let expected: Vec<(String, (usize, usize))> = params.named_tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    if file.tensors.len() != expected.len() {
        return Err(Error::ModelFormat(format!(
            "section `tensors`: expected {} tensors for this architecture, found {}",
            expected.len(),
            file.tensors.len()
        )));
    }
    for ((name, shape), rec) in expected.iter().zip(&file.tensors) {
        if &rec.name != name {
            return Err(Error::ModelFormat(format!(
                "section `tensors`: expected tensor `{name}`, found `{}`",
                rec.name
            )));
        }
        if (rec.shape[0], rec.shape[1]) != *shape || rec.data.len() != shape.0 * shape.1 {
            return Err(Error::ModelFormat(format!(
                "tensor `{name}`: expected shape {}x{}, found {}x{} with {} values",
                shape.0,
                shape.1,
                rec.shape[0],
                rec.shape[1],
                rec.data.len()
            )));
        }
    }
    for (dst, rec) in params.slices_mut().into_iter().zip(&file.tensors) {
        dst.copy_from_slice(&rec.data);
    }
    Ok(Model {
        config: file.config,
        normalizer: file.normalizer,
        patients: file.patients,
        params,
    })
}

/// Names the section (and tensor) where parsing stopped.
fn describe_parse_error(text: &str, err: &serde_json::Error) -> Error {
    let offset = byte_offset(text, err.line(), err.column()).min(text.len());
    let head = &text[..offset];
    let section = SECTIONS
        .iter()
        .filter_map(|s| head.rfind(&format!("\"{s}\":")).map(|pos| (pos, *s)))
        .max()
        .map(|(_, s)| s);
    let tensor = (section == Some("tensors"))
        .then(|| head.rfind("\"name\": \""))
        .flatten()
        .and_then(|pos| {
            let rest = &head[pos + 9..];
            rest.find('"').map(|end| rest[..end].to_string())
        });
    let what = if err.is_eof() { "truncated" } else { "malformed" };
    let location = match (section, tensor) {
        (Some(s), Some(t)) => format!(" in section `{s}` (tensor `{t}`)"),
        (Some(s), None) => format!(" in section `{s}`"),
        _ => String::new(),
    };
    Error::ModelFormat(format!("{what} file{location}: {err}"))
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    start + column
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    from_json(&fs::read_to_string(path)?)
}
