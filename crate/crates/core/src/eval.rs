//! Joint DR/DME accuracy and the simple-vs-extended feature ablation.
//!
//! A sample counts as correct for the joint metric only when both its DR grade
//! and its DME grade are predicted correctly.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grader::{self, GradePair, TrainConfig, DME_GRADES, DR_GRADES};
use crate::mask_io::ManifestRecord;
use crate::regions::RegionSet;
use crate::symbolic::{self, FeatureMode, SizeThresholds};
use crate::table::{self, TableError};
use crate::{pipeline, Error};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub joint_accuracy: f64,
    pub dr_accuracy: f64,
    pub dme_accuracy: f64,
    /// `dr_confusion[truth][prediction]`.
    pub dr_confusion: [[usize; DR_GRADES]; DR_GRADES],
    /// `dme_confusion[truth][prediction]`.
    pub dme_confusion: [[usize; DME_GRADES]; DME_GRADES],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty prediction list")]
    Empty,
    #[error("{truths} labeled rows but {predictions} predictions")]
    CountMismatch { truths: usize, predictions: usize },
    #[error("no prediction for image `{0}`")]
    MissingPrediction(String),
    #[error("image `{0}` has no ground-truth grades")]
    Unlabeled(String),
    #[error("need at least {needed} labeled images for a train/test split, got {found}")]
    TooFewImages { needed: usize, found: usize },
    #[error("test_fraction must be in (0, 1), got {0}")]
    TestFraction(f64),
}

/// Scores `(truth, prediction)` pairs.
pub fn joint_accuracy(pairs: &[(GradePair, GradePair)]) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut dr_confusion = [[0; DR_GRADES]; DR_GRADES];
    let mut dme_confusion = [[0; DME_GRADES]; DME_GRADES];
    let (mut joint, mut dr, mut dme) = (0usize, 0usize, 0usize);
    for (truth, pred) in pairs {
        dr_confusion[truth.dr() as usize][pred.dr() as usize] += 1;
        dme_confusion[truth.dme() as usize][pred.dme() as usize] += 1;
        let dr_ok = truth.dr() == pred.dr();
        let dme_ok = truth.dme() == pred.dme();
        dr += usize::from(dr_ok);
        dme += usize::from(dme_ok);
        joint += usize::from(dr_ok && dme_ok);
    }
    let n = pairs.len();
    let frac = |k: usize| k as f64 / n as f64;
    Ok(EvalReport {
        n,
        joint_accuracy: frac(joint),
        dr_accuracy: frac(dr),
        dme_accuracy: frac(dme),
        dr_confusion,
        dme_confusion,
    })
}

/// Pairs labeled rows with predictions by image id.
pub fn match_predictions(
    truths: &[(String, Option<GradePair>)],
    predictions: &[(String, GradePair)],
) -> Result<Vec<(GradePair, GradePair)>, EvalError> {
    if truths.len() != predictions.len() {
        return Err(EvalError::CountMismatch { truths: truths.len(), predictions: predictions.len() });
    }
    let lookup: std::collections::HashMap<&str, GradePair> =
        predictions.iter().map(|(id, g)| (id.as_str(), *g)).collect();
    truths
        .iter()
        .map(|(id, truth)| {
            let truth = truth.ok_or_else(|| EvalError::Unlabeled(id.clone()))?;
            let pred = lookup.get(id.as_str()).ok_or_else(|| EvalError::MissingPrediction(id.clone()))?;
            Ok((truth, *pred))
        })
        .collect()
}

fn write_confusion<const K: usize>(f: &mut fmt::Formatter<'_>, title: &str, m: &[[usize; K]; K]) -> fmt::Result {
    writeln!(f, "{title} confusion (rows truth, columns prediction):")?;
    for (t, row) in m.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
        writeln!(f, "  {t}: {}", cells.join(""))?;
    }
    Ok(())
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples:        {}", self.n)?;
        writeln!(f, "joint accuracy: {:.4}", self.joint_accuracy)?;
        writeln!(f, "DR accuracy:    {:.4}", self.dr_accuracy)?;
        writeln!(f, "DME accuracy:   {:.4}", self.dme_accuracy)?;
        write_confusion(f, "DR", &self.dr_confusion)?;
        write_confusion(f, "DME", &self.dme_confusion)
    }
}

pub const REPORT_COLUMNS: [&str; 5] = ["arm", "n", "joint_accuracy", "dr_accuracy", "dme_accuracy"];

/// Writes one `arm,n,joint_accuracy,dr_accuracy,dme_accuracy` row per report.
pub fn write_report_csv(path: impl AsRef<Path>, rows: &[(&str, &EvalReport)]) -> Result<(), TableError> {
    let path = path.as_ref();
    let mut w = table::writer(path)?;
    table::write_row(&mut w, path, REPORT_COLUMNS)?;
    for (arm, r) in rows {
        table::write_row(
            &mut w,
            path,
            [
                arm.to_string(),
                r.n.to_string(),
                r.joint_accuracy.to_string(),
                r.dr_accuracy.to_string(),
                r.dme_accuracy.to_string(),
            ],
        )?;
    }
    table::finish(w, path)
}

/// An image reduced to its region sets, with grades.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image_id: String,
    pub region_sets: Vec<RegionSet>,
    pub grades: GradePair,
}

/// Results of training and testing both feature modes on the same split.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub train_images: usize,
    pub test_images: usize,
    pub simple: EvalReport,
    pub extended: EvalReport,
}

impl AblationReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TableError> {
        write_report_csv(path, &[("simple", &self.simple), ("extended", &self.extended)])
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "train images: {}, test images: {}", self.train_images, self.test_images)?;
        writeln!(f, "{:<10} {:>6} {:>8} {:>8} {:>8}", "arm", "n", "joint", "DR", "DME")?;
        for (arm, r) in [("simple", &self.simple), ("extended", &self.extended)] {
            writeln!(
                f,
                "{:<10} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                arm, r.n, r.joint_accuracy, r.dr_accuracy, r.dme_accuracy
            )?;
        }
        Ok(())
    }
}

/// Splits `n` items into (train, test) index lists with a seeded shuffle.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::TestFraction(test_fraction));
    }
    // One test image plus the two training needs at minimum.
    if n < 3 {
        return Err(EvalError::TooFewImages { needed: 3, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 2);
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok((train, test))
}

/// Trains and tests one feature mode on a fixed split.
pub fn evaluate_arm(
    images: &[LabeledImage],
    train_idx: &[usize],
    test_idx: &[usize],
    mode: FeatureMode,
    thresholds: SizeThresholds,
    config: &TrainConfig,
) -> Result<EvalReport, Error> {
    let featurize = |i: usize| -> Result<_, Error> {
        let f = symbolic::features(&images[i].region_sets, mode, &thresholds)?;
        Ok((f, images[i].grades))
    };
    let train_set = train_idx.iter().map(|&i| featurize(i)).collect::<Result<Vec<_>, _>>()?;
    let model = grader::train(&train_set, config, thresholds)?;
    let pairs = test_idx
        .iter()
        .map(|&i| {
            let (f, truth) = featurize(i)?;
            Ok((truth, model.predict(&f)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(joint_accuracy(&pairs)?)
}

/// Runs both arms on identical splits with identical training seeds. The arms
/// share no state and train on separate threads.
pub fn ablation_on_images(
    images: &[LabeledImage],
    thresholds: SizeThresholds,
    config: &TrainConfig,
    test_fraction: f64,
) -> Result<AblationReport, Error> {
    let (train_idx, test_idx) = train_test_split(images.len(), test_fraction, config.seed)?;
    let run = |mode| evaluate_arm(images, &train_idx, &test_idx, mode, thresholds, config);
    let (simple, extended) = std::thread::scope(|s| {
        let simple = s.spawn(|| run(FeatureMode::Simple));
        let extended = run(FeatureMode::Extended);
        (simple.join().expect("simple arm panicked"), extended)
    });
    Ok(AblationReport {
        train_images: train_idx.len(),
        test_images: test_idx.len(),
        simple: simple?,
        extended: extended?,
    })
}

/// Loads every labeled manifest record's masks and runs the ablation.
pub fn ablation(
    records: &[ManifestRecord],
    thresholds: SizeThresholds,
    config: &TrainConfig,
    test_fraction: f64,
) -> Result<AblationReport, Error> {
    let images = records
        .iter()
        .map(|r| {
            let grades = r.grades.ok_or_else(|| EvalError::Unlabeled(r.image_id.clone()))?;
            Ok(LabeledImage { image_id: r.image_id.clone(), region_sets: pipeline::region_sets(r)?, grades })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    ablation_on_images(&images, thresholds, config, test_fraction)
}
