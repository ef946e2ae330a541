//! One function per subcommand. Each reads its inputs, runs the core
//! operation and writes outputs atomically.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use retigrade_core::explain;
use retigrade_core::grader;
use retigrade_core::mask_io;
use retigrade_core::symbolic::{self, FeatureRow};
use retigrade_core::synth::{self, LabelRule, SynthSpec};
use retigrade_core::{eval, pipeline, FeatureMode, GradePair};

use crate::config::{ConfigFlag, FeatureFlags, PipelineConfig, TrainFlags};
use crate::failure::{Classify, CliResult, Failure};
use crate::output;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; must not exist or be empty
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator spec; explicit flags take precedence over its values
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Number of images [default: 100]
    #[arg(long)]
    pub n_images: Option<usize>,
    /// Canvas width in pixels [default: 1024]
    #[arg(long)]
    pub width: Option<usize>,
    /// Canvas height in pixels [default: 1024]
    #[arg(long)]
    pub height: Option<usize>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Labeling rule: size-aware or count-only [default: size-aware]
    #[arg(long)]
    pub label_rule: Option<LabelRule>,
}

pub fn synth(args: &SynthArgs) -> CliResult {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).input()?;
            serde_json::from_str::<SynthSpec>(&text)
                .with_context(|| format!("invalid spec {}", path.display()))
                .input()?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = args.n_images {
        spec.n_images = v;
    }
    if let Some(v) = args.width {
        spec.width = v;
    }
    if let Some(v) = args.height {
        spec.height = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.label_rule {
        spec.label_rule = v;
    }
    spec.validate().input()?;
    output::write_dir(&args.out, |dir| synth::generate(&spec, dir).input())?;
    println!("wrote {} images to {}", spec.n_images, args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Manifest CSV listing the four mask files per image
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature mode: simple (4 counts) or extended (12 bucketed counts) [default: extended]
    #[arg(long)]
    pub mode: Option<FeatureMode>,
    #[command(flatten)]
    pub features: FeatureFlags,
    #[command(flatten)]
    pub config: ConfigFlag,
    /// Features CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

pub fn extract(args: &ExtractArgs) -> CliResult {
    let mut config = args.config.load()?;
    args.features.apply(&mut config);
    let mode = args.mode.unwrap_or(config.feature_mode);
    let records = mask_io::load_manifest(&args.manifest).input()?;
    let results: Vec<_> = records.par_iter().map(|r| pipeline::extract_features(r, mode, &config.thresholds)).collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("{}: {e}", record.image_id);
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(Failure::bad_input(format!("{failures} of {} images could not be read", records.len())));
    }
    output::write_file(&args.out, |p| symbolic::write_features_csv(p, mode, &rows).internal())?;
    println!("wrote {} {mode} feature rows to {}", rows.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled features CSV
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub config: ConfigFlag,
    #[command(flatten)]
    pub thresholds: FeatureFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Model JSON to write
    #[arg(long)]
    pub out_model: PathBuf,
}

fn labeled(rows: &[FeatureRow], path: &Path) -> CliResult<Vec<(retigrade_core::FeatureVector, GradePair)>> {
    rows.iter()
        .map(|r| match r.grades {
            Some(g) => Ok((r.features.clone(), g)),
            None => Err(Failure::bad_input(format!(
                "{}: labels required, image {} has no dr_grade/dme_grade",
                path.display(),
                r.image_id
            ))),
        })
        .collect()
}

pub fn train(args: &TrainArgs) -> CliResult {
    let mut config = args.config.load()?;
    args.thresholds.apply(&mut config);
    args.train.apply(&mut config);
    let (mode, rows) = symbolic::read_features_csv(&args.features).input()?;
    let data = labeled(&rows, &args.features)?;
    let model = grader::train(&data, &config.train_config(), config.thresholds).input()?;
    output::write_file(&args.out_model, |p| grader::save_model(&model, p).internal())?;
    let meta = model.training().expect("trained models carry metadata");
    println!(
        "trained {mode} model on {} rows ({} validation): best epoch {} of {}, validation loss {:.4}; wrote {}",
        meta.train_samples,
        meta.validation_samples,
        meta.best_epoch,
        meta.epochs_completed,
        meta.best_validation_loss,
        args.out_model.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> CliResult<retigrade_core::GraderModel> {
    grader::load_model(path).with_context(|| format!("cannot load model {}", path.display())).input()
}

fn predict_rows(model: &retigrade_core::GraderModel, rows: &[FeatureRow]) -> CliResult<Vec<(String, GradePair)>> {
    rows.iter()
        .map(|r| Ok((r.image_id.clone(), model.predict(&r.features).with_context(|| r.image_id.clone()).input()?)))
        .collect()
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Features CSV; labels, if present, are ignored
    #[arg(long)]
    pub features: PathBuf,
    /// Predictions CSV to write (image_id,dr_pred,dme_pred)
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(args: &PredictArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let (_, rows) = symbolic::read_features_csv(&args.features).input()?;
    let preds = predict_rows(&model, &rows)?;
    output::write_file(&args.out, |p| grader::write_predictions_csv(p, &preds).internal())?;
    println!("wrote {} predictions to {}", preds.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Features CSV to explain
    #[arg(long)]
    pub features: PathBuf,
    /// Model whose predicted grades are explained
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Predictions CSV supplying the grades instead of a model
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Text file to write, one sentence per line [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn explain(args: &ExplainArgs) -> CliResult {
    let (_, rows) = symbolic::read_features_csv(&args.features).input()?;
    let grades: Vec<GradePair> = match (&args.model, &args.predictions) {
        (Some(model), _) => predict_rows(&load_model(model)?, &rows)?.into_iter().map(|(_, g)| g).collect(),
        (None, Some(path)) => {
            let preds = grader::read_predictions_csv(path).input()?;
            let truths: Vec<_> = rows.iter().map(|r| (r.image_id.clone(), None)).collect();
            let by_id = match_ids(&truths, &preds).with_context(|| format!("{}", path.display())).input()?;
            by_id.into_iter().map(|(_, g)| g).collect()
        }
        (None, None) => unreachable!("clap requires one grade source"),
    };
    let explanations: Vec<_> =
        rows.iter().zip(&grades).map(|(r, &g)| explain::render(&r.image_id, &r.features, g)).collect();
    match &args.out {
        Some(out) => {
            output::write_file(out, |p| explain::write_explanations(p, &explanations).internal())?;
            println!("wrote {} explanations to {}", explanations.len(), out.display());
        }
        None => explanations.iter().for_each(|e| println!("{}", e.rendered)),
    }
    Ok(())
}

/// Orders `preds` to follow `rows`, requiring the same ids.
fn match_ids(
    rows: &[(String, Option<GradePair>)],
    preds: &[(String, GradePair)],
) -> Result<Vec<(String, GradePair)>, eval::EvalError> {
    if rows.len() != preds.len() {
        return Err(eval::EvalError::CountMismatch { truths: rows.len(), predictions: preds.len() });
    }
    let lookup: std::collections::HashMap<&str, GradePair> = preds.iter().map(|(id, g)| (id.as_str(), *g)).collect();
    rows.iter()
        .map(|(id, _)| {
            lookup
                .get(id.as_str())
                .map(|g| (id.clone(), *g))
                .ok_or_else(|| eval::EvalError::MissingPrediction(id.clone()))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground truth: a labeled features CSV or a manifest
    #[arg(long)]
    pub truth: PathBuf,
    /// Predictions CSV
    #[arg(long)]
    pub predictions: PathBuf,
    /// Report CSV to write (arm,n,joint_accuracy,dr_accuracy,dme_accuracy)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads `(image_id, grades)` from either a manifest or a features CSV,
/// telling them apart by the header.
fn read_truth(path: &Path) -> CliResult<Vec<(String, Option<GradePair>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).input()?;
    let header = text.lines().next().unwrap_or("");
    let is_manifest = header.split(',').any(|h| h.trim() == "ma_mask");
    if is_manifest {
        let records = mask_io::load_manifest(path).input()?;
        Ok(records.into_iter().map(|r| (r.image_id, r.grades)).collect())
    } else {
        let (_, rows) = symbolic::read_features_csv(path).input()?;
        Ok(rows.into_iter().map(|r| (r.image_id, r.grades)).collect())
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    let truths = read_truth(&args.truth)?;
    let preds = grader::read_predictions_csv(&args.predictions).input()?;
    let pairs = eval::match_predictions(&truths, &preds).input()?;
    let report = eval::joint_accuracy(&pairs).input()?;
    print!("{report}");
    if let Some(out) = &args.out {
        output::write_file(out, |p| eval::write_report_csv(p, &[("model", &report)]).internal())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    /// Labeled manifest
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub config: ConfigFlag,
    #[command(flatten)]
    pub thresholds: FeatureFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Held-out share of images for testing [default: 0.2]
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Report CSV to write, one row per arm
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ablation(args: &AblationArgs) -> CliResult {
    let mut config: PipelineConfig = args.config.load()?;
    args.thresholds.apply(&mut config);
    args.train.apply(&mut config);
    if let Some(f) = args.test_fraction {
        config.test_fraction = f;
    }
    let records = mask_io::load_manifest(&args.manifest).input()?;
    let report = eval::ablation(&records, config.thresholds, &config.train_config(), config.test_fraction).input()?;
    print!("{report}");
    if let Some(out) = &args.out {
        output::write_file(out, |p| report.write_csv(p).internal())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
