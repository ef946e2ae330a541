//! Fully connected grader mapping a count feature vector to a DR grade and a
//! DME grade.
//!
//! Inputs go through `log1p` followed by a per-feature z-score whose
//! statistics are stored in the model. The trunk is a stack of ReLU layers
//! (widths 12, 25, 50, 75, 100, 75, 50, 25, 12 for extended features) feeding
//! two affine softmax heads: 5 DR grades and 3 DME grades.

mod model_file;
mod network;
mod train;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use model_file::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use network::{loss, softmax, Dense, Network, Trace, PROB_FLOOR};
pub use train::{train, TrainConfig, TrainingMetadata};

use crate::symbolic::{FeatureMode, FeatureVector, SizeThresholds};
use crate::table::{self, TableError, TableReader};

pub const DR_GRADES: usize = 5;
pub const DME_GRADES: usize = 3;

/// A DR grade (0 no DR, 1 mild NPDR, 2 moderate NPDR, 3 severe NPDR, 4 PDR)
/// and a DME grade (0 no EX, 1 EX outside the macula center, 2 EX within it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GradePair {
    dr: u8,
    dme: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("grade pair ({dr}, {dme}) out of range: DR is 0..=4 and DME is 0..=2")]
pub struct GradeError {
    pub dr: u8,
    pub dme: u8,
}

impl GradePair {
    pub fn new(dr: u8, dme: u8) -> Result<Self, GradeError> {
        if usize::from(dr) < DR_GRADES && usize::from(dme) < DME_GRADES {
            Ok(Self { dr, dme })
        } else {
            Err(GradeError { dr, dme })
        }
    }

    pub fn dr(self) -> u8 {
        self.dr
    }

    pub fn dme(self) -> u8 {
        self.dme
    }
}

impl fmt::Display for GradePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(DR {}, DME {})", self.dr, self.dme)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraderError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown model format_version {0}")]
    UnknownFormatVersion(u64),
    #[error("model shape error: {0}")]
    Shape(String),
    #[error("model expects {expected} features, got {found}")]
    ModeMismatch { expected: FeatureMode, found: FeatureMode },
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("training samples mix simple and extended feature vectors")]
    MixedModes,
    #[error("invalid training config: {0}")]
    Config(String),
}

/// Per-feature shift and scale applied after `log1p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Preprocess {
    pub fn identity(len: usize) -> Self {
        Self { shift: vec![0.0; len], scale: vec![1.0; len] }
    }

    /// Mean and population standard deviation of `log1p` features. A zero
    /// deviation becomes 1 so scales stay positive.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a FeatureVector>, len: usize) -> Self {
        let logs: Vec<Vec<f64>> =
            samples.into_iter().map(|f| f.values().iter().map(|&v| (v as f64).ln_1p()).collect()).collect();
        let n = logs.len().max(1) as f64;
        let shift: Vec<f64> = (0..len).map(|k| logs.iter().map(|x| x[k]).sum::<f64>() / n).collect();
        let scale = (0..len)
            .map(|k| {
                let var = logs.iter().map(|x| (x[k] - shift[k]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift, scale }
    }

    fn apply(&self, features: &FeatureVector) -> Vec<f64> {
        features
            .values()
            .iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&v, (shift, scale))| ((v as f64).ln_1p() - shift) / scale)
            .collect()
    }
}

/// A trained (or hand-built) grader.
#[derive(Debug, Clone, PartialEq)]
pub struct GraderModel {
    pub(crate) feature_mode: FeatureMode,
    pub(crate) thresholds: SizeThresholds,
    pub(crate) network: Network,
    pub(crate) preprocess: Preprocess,
    pub(crate) seed: u64,
    pub(crate) training: Option<TrainingMetadata>,
}

/// Softmax outputs of both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadProbs {
    pub dr: [f64; DR_GRADES],
    pub dme: [f64; DME_GRADES],
}

impl From<&Trace> for HeadProbs {
    fn from(t: &Trace) -> Self {
        Self {
            dr: t.dr_probs.clone().try_into().expect("5 DR probabilities"),
            dme: t.dme_probs.clone().try_into().expect("3 DME probabilities"),
        }
    }
}

impl GraderModel {
    /// Assembles a model, validating that every shape agrees.
    pub fn new(
        feature_mode: FeatureMode,
        thresholds: SizeThresholds,
        network: Network,
        preprocess: Preprocess,
        seed: u64,
    ) -> Result<Self, GraderError> {
        let width = network.input_width();
        if width != feature_mode.len() {
            return Err(GraderError::Shape(format!(
                "trunk_dims[0] is {width} but {feature_mode} features have {} entries",
                feature_mode.len()
            )));
        }
        if preprocess.shift.len() != width || preprocess.scale.len() != width {
            return Err(GraderError::Shape(format!(
                "preprocess shift/scale have {}/{} entries, expected {width}",
                preprocess.shift.len(),
                preprocess.scale.len()
            )));
        }
        if let Some(k) = preprocess.scale.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(GraderError::Shape(format!("preprocess scale[{k}] must be positive")));
        }
        Ok(Self { feature_mode, thresholds, network, preprocess, seed, training: None })
    }

    /// All-zero weights with identity preprocessing; predicts (0, 0).
    pub fn zeros(feature_mode: FeatureMode, trunk_dims: &[usize]) -> Result<Self, GraderError> {
        let network = Network::zeros(trunk_dims);
        Self::new(feature_mode, SizeThresholds::default(), network, Preprocess::identity(feature_mode.len()), 0)
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.feature_mode
    }

    pub fn thresholds(&self) -> &SizeThresholds {
        &self.thresholds
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn preprocess_stats(&self) -> &Preprocess {
        &self.preprocess
    }

    pub fn trunk_dims(&self) -> Vec<usize> {
        self.network.dims()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn training(&self) -> Option<&TrainingMetadata> {
        self.training.as_ref()
    }

    fn check_mode(&self, features: &FeatureVector) -> Result<(), GraderError> {
        if features.mode() != self.feature_mode {
            return Err(GraderError::ModeMismatch { expected: self.feature_mode, found: features.mode() });
        }
        Ok(())
    }

    /// Network input for `features`: `(log1p(v) - shift) / scale`.
    pub fn preprocess(&self, features: &FeatureVector) -> Result<Vec<f64>, GraderError> {
        self.check_mode(features)?;
        Ok(self.preprocess.apply(features))
    }

    /// Inference-mode forward pass.
    pub fn forward(&self, features: &FeatureVector) -> Result<HeadProbs, GraderError> {
        Ok(HeadProbs::from(&self.trace(features)?))
    }

    /// Inference-mode pass keeping logits and intermediate activations.
    pub fn trace(&self, features: &FeatureVector) -> Result<Trace, GraderError> {
        let input = self.preprocess(features)?;
        Ok(self.network.forward(&input, None))
    }

    /// Training-mode forward pass with inverted dropout.
    pub fn forward_train(
        &self,
        features: &FeatureVector,
        dropout_prob: f64,
        rng: &mut dyn RngCore,
    ) -> Result<HeadProbs, GraderError> {
        let input = self.preprocess(features)?;
        Ok(HeadProbs::from(&self.network.forward(&input, Some((dropout_prob, rng)))))
    }

    /// Most probable grade of each head; ties go to the lower grade.
    pub fn predict(&self, features: &FeatureVector) -> Result<GradePair, GraderError> {
        let probs = self.forward(features)?;
        Ok(GradePair::new(argmax(&probs.dr) as u8, argmax(&probs.dme) as u8).expect("argmax within head size"))
    }
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub const PREDICTION_COLUMNS: [&str; 3] = ["image_id", "dr_pred", "dme_pred"];

/// Writes `image_id,dr_pred,dme_pred`.
pub fn write_predictions_csv(path: impl AsRef<Path>, rows: &[(String, GradePair)]) -> Result<(), TableError> {
    let path = path.as_ref();
    let mut w = table::writer(path)?;
    table::write_row(&mut w, path, PREDICTION_COLUMNS)?;
    for (id, g) in rows {
        table::write_row(&mut w, path, [id.clone(), g.dr().to_string(), g.dme().to_string()])?;
    }
    table::finish(w, path)
}

pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<(String, GradePair)>, TableError> {
    let mut reader = TableReader::open(path.as_ref())?;
    if reader.headers != PREDICTION_COLUMNS {
        return Err(reader.header_error(PREDICTION_COLUMNS.join(",")));
    }
    let mut out = Vec::new();
    for row in reader.rows()? {
        let cell = |i: usize| row.record.get(i).unwrap_or("").trim();
        let grade = |i: usize| {
            cell(i).parse::<u8>().map_err(|_| reader.value_error(&row, PREDICTION_COLUMNS[i], cell(i), "not a grade"))
        };
        let pair = GradePair::new(grade(1)?, grade(2)?)
            .map_err(|e| reader.value_error(&row, "prediction", &format!("{},{}", cell(1), cell(2)), e.to_string()))?;
        out.push((cell(0).to_owned(), pair));
    }
    Ok(out)
}
