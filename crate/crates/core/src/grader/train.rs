use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{loss, Dense, Network};
use super::{GradePair, GraderError, GraderModel, Preprocess};
use crate::symbolic::{FeatureVector, SizeThresholds};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Optimizer and schedule settings. Defaults: Adam at lr 0.01, batch 16,
/// dropout 0.1, at most 20 epochs, patience 3, 20% validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_prob: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Trunk widths after the input layer.
    pub hidden_dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 16,
            dropout_prob: 0.1,
            max_epochs: 20,
            patience: 3,
            validation_fraction: 0.2,
            seed: 0,
            hidden_dims: vec![25, 50, 75, 100, 75, 50, 25, 12],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GraderError> {
        let bad = |msg: String| Err(GraderError::Config(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout_prob must be in [0, 1), got {}", self.dropout_prob));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction must be in (0, 1), got {}", self.validation_fraction));
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        Ok(())
    }
}

/// What happened during training; stored in the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: TrainConfig,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub epochs_completed: usize,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    /// Mean training-mode loss per epoch.
    pub train_loss: Vec<f64>,
    /// Mean inference-mode validation loss per epoch.
    pub validation_loss: Vec<f64>,
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(params: usize, lr: f64) -> Self {
        Self { lr, step: 0, m: vec![0.0; params], v: vec![0.0; params] }
    }

    fn update(&mut self, network: &mut Network, grad: &Network) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let grads = grad.layers().flat_map(Dense::params);
        let params = network.layers_mut().flat_map(Dense::params_mut);
        for (((p, &g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        }
    }
}

/// Trains a grader with mini-batch Adam and early stopping on validation
/// loss, returning the best weights seen.
///
/// Every random choice (validation split, weight init, batch order, dropout
/// masks) comes from one generator seeded with `config.seed`, so identical
/// inputs give identical models. Preprocessing statistics are fitted on the
/// training split only.
pub fn train(
    dataset: &[(FeatureVector, GradePair)],
    config: &TrainConfig,
    thresholds: SizeThresholds,
) -> Result<GraderModel, GraderError> {
    config.validate()?;
    let n = dataset.len();
    if n < 2 {
        return Err(GraderError::TooFewSamples(n));
    }
    let mode = dataset[0].0.mode();
    if dataset.iter().any(|(f, _)| f.mode() != mode) {
        return Err(GraderError::MixedModes);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let preprocess = Preprocess::fit(train_idx.iter().map(|&i| &dataset[i].0), mode.len());
    let dims: Vec<usize> = std::iter::once(mode.len()).chain(config.hidden_dims.iter().copied()).collect();
    let mut network = Network::init(&dims, &mut rng);
    let inputs: Vec<Vec<f64>> = dataset.iter().map(|(f, _)| preprocess.apply(f)).collect();

    let mut adam = Adam::new(network.parameter_count(), config.learning_rate);
    let mut best = network.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut train_history = Vec::new();
    let mut val_history = Vec::new();
    let mut batch_order = train_idx.to_vec();

    for epoch in 1..=config.max_epochs {
        batch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in batch_order.chunks(config.batch_size) {
            let mut grad = Network::zeros(&dims);
            for &i in batch {
                let trace = network.forward(&inputs[i], Some((config.dropout_prob, &mut rng as &mut dyn RngCore)));
                epoch_loss += network.backward(&trace, dataset[i].1, &mut grad);
            }
            grad.scale_parameters(1.0 / batch.len() as f64);
            adam.update(&mut network, &grad);
        }
        train_history.push(epoch_loss / batch_order.len() as f64);

        let val_loss = val_idx
            .iter()
            .map(|&i| {
                let t = network.forward(&inputs[i], None);
                loss(&t.dr_probs, &t.dme_probs, dataset[i].1)
            })
            .sum::<f64>()
            / val_idx.len() as f64;
        val_history.push(val_loss);

        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best = network.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let mut model = GraderModel::new(mode, thresholds, best, preprocess, config.seed)?;
    model.training = Some(TrainingMetadata {
        config: config.clone(),
        train_samples: train_idx.len(),
        validation_samples: val_idx.len(),
        epochs_completed: val_history.len(),
        best_epoch,
        best_validation_loss: best_loss,
        train_loss: train_history,
        validation_loss: val_history,
    });
    Ok(model)
}
