//! Pipeline configuration: built-in defaults, then an optional JSON file,
//! then explicit flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use retigrade_core::{FeatureMode, SizeThresholds, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::failure::{Classify, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub thresholds: SizeThresholds,
    pub feature_mode: FeatureMode,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_prob: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    /// Held-out share for evaluation and ablation splits.
    pub test_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            thresholds: SizeThresholds::default(),
            feature_mode: FeatureMode::Extended,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            dropout_prob: t.dropout_prob,
            max_epochs: t.max_epochs,
            patience: t.patience,
            validation_fraction: t.validation_fraction,
            seed: t.seed,
            hidden_dims: t.hidden_dims,
            test_fraction: 0.2,
        }
    }
}

impl PipelineConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            dropout_prob: self.dropout_prob,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            hidden_dims: self.hidden_dims.clone(),
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).input()?;
        Self::from_json(&text).with_context(|| format!("invalid config {}", path.display())).input()
    }
}

/// Thresholds and feature mode, shared by extract, train and ablation.
#[derive(Debug, Clone, Default, Args)]
pub struct FeatureFlags {
    /// Size thresholds tau0,tau1,tau2,tau3 in pixels [default: 10,500,1000,10000]
    #[arg(long, value_name = "T0,T1,T2,T3")]
    pub thresholds: Option<SizeThresholds>,
}

/// Training hyperparameters. Each flag overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Adam learning rate [default: 0.01]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Mini-batch size [default: 16]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Dropout probability after each trunk layer during training [default: 0.1]
    #[arg(long)]
    pub dropout_prob: Option<f64>,
    /// Maximum training epochs [default: 20]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping [default: 3]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Share of training rows held out for early stopping [default: 0.2]
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Seed for every random choice [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trunk widths after the input layer [default: 25,50,75,100,75,50,25,12]
    #[arg(long, value_delimiter = ',', value_name = "W1,W2,...")]
    pub hidden_dims: Option<Vec<usize>>,
}

/// Flags common to every command that reads a pipeline config.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlag {
    /// JSON pipeline config; explicit flags take precedence over its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl ConfigFlag {
    pub fn load(&self) -> CliResult<PipelineConfig> {
        match &self.config {
            Some(path) => PipelineConfig::load(path),
            None => Ok(PipelineConfig::default()),
        }
    }
}

impl FeatureFlags {
    pub fn apply(&self, config: &mut PipelineConfig) {
        if let Some(t) = self.thresholds {
            config.thresholds = t;
        }
    }
}

impl TrainFlags {
    pub fn apply(&self, c: &mut PipelineConfig) {
        fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
            if let Some(v) = flag {
                *slot = v.clone();
            }
        }
        set(&mut c.learning_rate, &self.learning_rate);
        set(&mut c.batch_size, &self.batch_size);
        set(&mut c.dropout_prob, &self.dropout_prob);
        set(&mut c.max_epochs, &self.max_epochs);
        set(&mut c.patience, &self.patience);
        set(&mut c.validation_fraction, &self.validation_fraction);
        set(&mut c.seed, &self.seed);
        set(&mut c.hidden_dims, &self.hidden_dims);
    }
}
