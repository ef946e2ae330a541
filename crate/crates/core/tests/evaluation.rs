use proptest::prelude::*;
use retigrade_core::eval::{self, EvalError};
use retigrade_core::synth::{self, BucketCounts, CountModel, LabelRule, Span, SynthSpec};
use retigrade_core::{GradePair, SizeThresholds, TrainConfig};

fn arb_grade() -> impl Strategy<Value = GradePair> {
    (0u8..5, 0u8..3).prop_map(|(dr, dme)| GradePair::new(dr, dme).unwrap())
}

fn arb_pairs() -> impl Strategy<Value = Vec<(GradePair, GradePair)>> {
    proptest::collection::vec((arb_grade(), arb_grade()), 1..60)
}

/// A stable optimiser setting for the ablation checks below; the
/// acceptance suite covers the default configuration.
fn stable_config() -> TrainConfig {
    TrainConfig { learning_rate: 0.001, max_epochs: 60, seed: 5, ..Default::default() }
}

fn spec(n_images: usize, rule: LabelRule) -> SynthSpec {
    SynthSpec {
        n_images,
        width: 384,
        height: 384,
        seed: 77,
        label_rule: rule,
        specks_per_class: Span::new(0, 0),
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn joint_is_dominated_by_each_head(pairs in arb_pairs()) {
        let r = eval::joint_accuracy(&pairs).unwrap();
        prop_assert!(r.joint_accuracy <= r.dr_accuracy.min(r.dme_accuracy));
        prop_assert!(r.joint_accuracy >= r.dr_accuracy + r.dme_accuracy - 1.0 - 1e-12);
        prop_assert_eq!(r.n, pairs.len());
        prop_assert_eq!(r.dr_confusion.iter().flatten().sum::<usize>(), pairs.len());
        prop_assert_eq!(r.dme_confusion.iter().flatten().sum::<usize>(), pairs.len());
    }

    #[test]
    fn accuracy_ignores_order(pairs in arb_pairs(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(eval::joint_accuracy(&pairs).unwrap(), eval::joint_accuracy(&shuffled).unwrap());
    }

    #[test]
    fn self_prediction_is_perfect(truths in proptest::collection::vec(arb_grade(), 1..60)) {
        let own: Vec<_> = truths.iter().map(|&t| (t, t)).collect();
        let r = eval::joint_accuracy(&own).unwrap();
        prop_assert_eq!((r.joint_accuracy, r.dr_accuracy, r.dme_accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn matching_by_id_ignores_row_order(grades in proptest::collection::vec((arb_grade(), arb_grade()), 1..30)) {
        let truths: Vec<_> = grades.iter().enumerate().map(|(i, (t, _))| (format!("id{i}"), Some(*t))).collect();
        let mut preds: Vec<_> = grades.iter().enumerate().map(|(i, (_, p))| (format!("id{i}"), *p)).collect();
        preds.reverse();
        let matched = eval::match_predictions(&truths, &preds).unwrap();
        prop_assert_eq!(matched, grades);
    }
}

#[test]
fn mismatched_inputs_are_errors() {
    let g = GradePair::new(1, 1).unwrap();
    let truths = vec![("a".to_owned(), Some(g)), ("b".to_owned(), Some(g))];
    assert!(matches!(
        eval::match_predictions(&truths, &[("a".to_owned(), g)]),
        Err(EvalError::CountMismatch { truths: 2, predictions: 1 })
    ));
    assert!(matches!(
        eval::match_predictions(&truths, &[("a".to_owned(), g), ("c".to_owned(), g)]),
        Err(EvalError::MissingPrediction(id)) if id == "b"
    ));
    let unlabeled = vec![("a".to_owned(), None)];
    assert!(matches!(eval::match_predictions(&unlabeled, &[("a".to_owned(), g)]), Err(EvalError::Unlabeled(_))));
    assert!(matches!(eval::joint_accuracy(&[]), Err(EvalError::Empty)));
}

#[test]
fn report_csv_has_fixed_columns() {
    let g = GradePair::new(2, 1).unwrap();
    let r = eval::joint_accuracy(&[(g, g), (g, GradePair::new(2, 0).unwrap())]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    eval::write_report_csv(&path, &[("extended", &r)]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), eval::REPORT_COLUMNS.join(","));
    assert_eq!(lines.next().unwrap(), "extended,2,0.5,1,0.5");
}

#[test]
fn size_aware_labels_favour_extended_features() {
    let images = synth::labeled_images(&spec(600, LabelRule::SizeAware)).unwrap();
    let report = eval::ablation_on_images(&images, SizeThresholds::default(), &stable_config(), 0.25).unwrap();
    assert_eq!(report.train_images + report.test_images, 600);
    let (ext, simple) = (report.extended.joint_accuracy, report.simple.joint_accuracy);
    assert!(ext > simple, "extended {ext} simple {simple}");
}

#[test]
fn count_only_labels_do_not_separate_the_arms() {
    // Every lesion lands in the small bucket, so labels depend on totals
    // alone and the extended vector adds only constant columns.
    let mut spans = [[Span::new(0, 0); 3]; 4];
    for (row, max) in spans.iter_mut().zip([30, 60, 6, 30]) {
        row[0] = Span::new(0, max);
    }
    let spec = SynthSpec {
        counts: CountModel::Uniform(spans),
        sizes: [Span::new(11, 60), Span::new(501, 1000), Span::new(1001, 5000)],
        ..spec(600, LabelRule::CountOnly)
    };
    let images = synth::labeled_images(&spec).unwrap();
    let report = eval::ablation_on_images(
        &images,
        SizeThresholds::default(),
        &TrainConfig { max_epochs: 200, patience: 20, ..stable_config() },
        0.25,
    )
    .unwrap();
    let (ext, simple) = (report.extended.joint_accuracy, report.simple.joint_accuracy);
    assert!(simple >= 0.85, "control arms must train well, simple {simple}");
    assert!((ext - simple).abs() <= 0.05, "extended {ext} simple {simple}");
}

#[test]
fn single_grade_dataset_is_trivially_perfect() {
    let mut counts = BucketCounts::default();
    counts.0[0][0] = 5;
    let spec = SynthSpec { counts: CountModel::Fixed(counts), ..spec(40, LabelRule::SizeAware) };
    let images = synth::labeled_images(&spec).unwrap();
    assert!(images.iter().all(|i| i.grades == GradePair::new(1, 0).unwrap()));
    let report = eval::ablation_on_images(&images, SizeThresholds::default(), &stable_config(), 0.25).unwrap();
    assert_eq!(report.simple.joint_accuracy, 1.0);
    assert_eq!(report.extended.joint_accuracy, 1.0);
}

#[test]
fn ablation_needs_three_images() {
    let images = synth::labeled_images(&spec(2, LabelRule::SizeAware)).unwrap();
    let err = eval::ablation_on_images(&images, SizeThresholds::default(), &stable_config(), 0.25).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
}
