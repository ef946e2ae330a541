//! JSON model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "feature_mode": "extended",
//!   "thresholds": {"tau0": 10, "tau1": 500, "tau2": 1000, "tau3": 10000},
//!   "trunk_dims": [12, 25, ...],
//!   "trunk": [{"weights": [[...], ...], "bias": [...]}, ...],
//!   "dr_head": {"weights": [[...]], "bias": [...]},
//!   "dme_head": {"weights": [[...]], "bias": [...]},
//!   "preprocess": {"shift": [...], "scale": [...]},
//!   "seed": 0,
//!   "training": {...}
//! }
//! ```
//!
//! Weight matrices are arrays of rows, one row per output unit. Floats are
//! written in shortest round-trip form, so a reload is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Dense, Network};
use super::train::TrainingMetadata;
use super::{GraderError, GraderModel, Preprocess, DME_GRADES, DR_GRADES};
use crate::symbolic::{FeatureMode, SizeThresholds};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    feature_mode: FeatureMode,
    thresholds: SizeThresholds,
    trunk_dims: Vec<usize>,
    trunk: Vec<LayerFile>,
    dr_head: LayerFile,
    dme_head: LayerFile,
    preprocess: Preprocess,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingMetadata>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<&Dense> for LayerFile {
    fn from(layer: &Dense) -> Self {
        Self { weights: layer.rows().map(<[f64]>::to_vec).collect(), bias: layer.bias().to_vec() }
    }
}

impl LayerFile {
    fn into_dense(self, name: &str, inputs: usize, outputs: usize) -> Result<Dense, GraderError> {
        let shape_err = |found: String| {
            GraderError::Shape(format!("{name}: expected {outputs}x{inputs} weights and {outputs} biases, {found}"))
        };
        if self.weights.len() != outputs {
            return Err(shape_err(format!("found {} weight rows", self.weights.len())));
        }
        if let Some(r) = self.weights.iter().position(|row| row.len() != inputs) {
            return Err(shape_err(format!("row {r} has {} entries", self.weights[r].len())));
        }
        if self.bias.len() != outputs {
            return Err(shape_err(format!("found {} biases", self.bias.len())));
        }
        Dense::from_rows(&self.weights, self.bias).map_err(|e| GraderError::Shape(format!("{name}: {e}")))
    }
}

pub fn model_to_json(model: &GraderModel) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        feature_mode: model.feature_mode,
        thresholds: model.thresholds,
        trunk_dims: model.trunk_dims(),
        trunk: model.network.trunk().iter().map(LayerFile::from).collect(),
        dr_head: model.network.dr_head().into(),
        dme_head: model.network.dme_head().into(),
        preprocess: model.preprocess.clone(),
        seed: model.seed,
        training: model.training.clone(),
    };
    let mut json = serde_json::to_string_pretty(&file).expect("model serializes");
    json.push('\n');
    json
}

pub fn model_from_json(json: &str) -> Result<GraderModel, GraderError> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(GraderError::UnknownFormatVersion(other)),
        None => return Err(GraderError::Shape("missing or non-integer format_version".into())),
    }
    let file: ModelFile = serde_json::from_value(value)?;

    let dims = &file.trunk_dims;
    if dims.is_empty() || dims.contains(&0) {
        return Err(GraderError::Shape(format!("trunk_dims {dims:?} must be nonempty and positive")));
    }
    if file.trunk.len() + 1 != dims.len() {
        return Err(GraderError::Shape(format!(
            "trunk_dims lists {} layers but the file has {} trunk layers",
            dims.len() - 1,
            file.trunk.len()
        )));
    }
    let trunk = file
        .trunk
        .into_iter()
        .enumerate()
        .map(|(i, layer)| layer.into_dense(&format!("trunk layer {i}"), dims[i], dims[i + 1]))
        .collect::<Result<Vec<_>, _>>()?;
    let last = *dims.last().unwrap();
    let dr_head = file.dr_head.into_dense("dr_head", last, DR_GRADES)?;
    let dme_head = file.dme_head.into_dense("dme_head", last, DME_GRADES)?;
    let network = Network::from_layers(trunk, dr_head, dme_head).map_err(GraderError::Shape)?;

    let mut model = GraderModel::new(file.feature_mode, file.thresholds, network, file.preprocess, file.seed)?;
    model.training = file.training;
    Ok(model)
}

pub fn save_model(model: &GraderModel, path: impl AsRef<Path>) -> Result<(), GraderError> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|source| GraderError::Io { path: path.to_owned(), source })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GraderModel, GraderError> {
    let path = path.as_ref();
    let json = fs::read_to_string(path).map_err(|source| GraderError::Io { path: path.to_owned(), source })?;
    model_from_json(&json)
}
