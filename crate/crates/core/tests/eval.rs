mod common;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use triage_core::classify::{ClassifierKind, FitConfig, LearnerSpec, StackSpec};
use triage_core::corpus::{month_slice, TeamId};
use triage_core::eval::{
    compute_metrics, daily_accuracy, evaluate_learners, format_table, kfold_cv, prepare, EvalError,
    WindowProtocol,
};
use triage_core::synth::{
    drifting_corpus, keyword_corpus, DriftingCorpusConfig, KeywordCorpusConfig,
};
use triage_core::textpipe::StopWords;

#[test]
fn metrics_match_confusion_matrix_oracle() {
    let (differ, acc_vs_recall) = common::metrics_mismatches(1000, 3);
    assert_eq!(differ, 0);
    assert_eq!(acc_vs_recall, 0);
}

#[test]
fn oracle_confusion_on_a_fixed_case() {
    let t = |s: &str| TeamId::new(s).unwrap();
    let y_true = [t("A"), t("A"), t("A"), t("B"), t("B"), t("C")];
    let y_pred = [t("A"), t("A"), t("B"), t("B"), t("C"), t("C")];
    let brute = common::brute_metrics(&y_true, &y_pred, &[]);
    assert_eq!(
        brute.confusion,
        vec![vec![2, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]
    );
    let m = compute_metrics(&y_true, &y_pred, &[]).unwrap();
    assert_eq!(m.accuracy, 4.0 / 6.0);
    // precision A=1, B=1/2, C=1/2; support 3, 2, 1
    assert!((m.weighted_precision - (3.0 + 1.0 + 0.5) / 6.0).abs() < 1e-15);
    assert_eq!(m.per_class[0].recall, 2.0 / 3.0);
}

#[test]
fn cross_validation_reports_mean_and_population_std() {
    let c = keyword_corpus(&KeywordCorpusConfig {
        n_classes: 3,
        docs_per_class: 20,
        ..KeywordCorpusConfig::default()
    });
    let prep = prepare(&c.reports, &StopWords::none()).unwrap();
    let spec = LearnerSpec::Single(ClassifierKind::MultinomialNb);
    let cv = kfold_cv(
        &spec,
        &prep.x,
        &prep.y,
        prep.pipeline.dim(),
        5,
        &FitConfig::default(),
    )
    .unwrap();
    assert_eq!(cv.fold_accuracies.len(), 5);
    let mean = cv.fold_accuracies.iter().sum::<f64>() / 5.0;
    let var = cv
        .fold_accuracies
        .iter()
        .map(|a| (a - mean).powi(2))
        .sum::<f64>()
        / 5.0;
    assert!((cv.mean - mean).abs() < 1e-15);
    assert!((cv.std - var.sqrt()).abs() < 1e-15);
    assert!(cv.mean > 0.8);
    assert!(matches!(
        kfold_cv(
            &spec,
            &prep.x,
            &prep.y,
            prep.pipeline.dim(),
            1,
            &FitConfig::default()
        ),
        Err(EvalError::InvalidInput(_))
    ));
}

#[test]
fn learner_table() {
    let c = keyword_corpus(&KeywordCorpusConfig {
        n_classes: 4,
        docs_per_class: 40,
        ..KeywordCorpusConfig::default()
    });
    let (train, test) = c.reports.split_at(120);
    let learners = vec![
        LearnerSpec::Single(ClassifierKind::BaselineMajority),
        LearnerSpec::Single(ClassifierKind::LinearSvc),
        LearnerSpec::Stacked(StackSpec::selected3()),
    ];
    let rows = evaluate_learners(
        train,
        test,
        &learners,
        &StopWords::none(),
        Some(3),
        &FitConfig::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].test.accuracy > rows[0].test.accuracy);
    assert_eq!(rows[1].test.accuracy, rows[1].test.weighted_recall);
    let table = format_table(&rows);
    assert!(table.contains("Linear SVC"));
    assert!(table.contains("SELECTED-3"));
    assert!(table.contains("(+/-"));
}

#[test]
fn window_trends_on_drifting_corpus() {
    let (sliding, cumulative) = common::window_studies();
    assert_eq!(sliding.protocol, WindowProtocol::Sliding);
    // 13 months: test months 2..=13 with every feasible delta
    assert_eq!(sliding.results.len(), 78);
    assert_eq!(cumulative.results.len(), 78);
    let trend = sliding.trend().unwrap();
    assert!(trend.slope < 0.0 && trend.p_value < 0.01, "{trend:?}");
    let gain = cumulative.mean_at(12).unwrap() - cumulative.mean_at(1).unwrap();
    assert!(gain >= 0.05, "{gain}");
    // delta 1 trains on the same single month under both protocols
    assert_eq!(sliding.mean_at(1), cumulative.mean_at(1));
}

#[test]
fn window_csv_has_one_row_per_cell() {
    let cfg = DriftingCorpusConfig {
        months: 4,
        docs_per_class_per_month: 5,
        n_classes: 3,
        ..DriftingCorpusConfig::default()
    };
    let reports = drifting_corpus(&cfg);
    let study = triage_core::eval::cumulative_window_study(
        &reports,
        (cfg.start, cfg.start.offset(3)),
        2,
        &LearnerSpec::Single(ClassifierKind::MultinomialNb),
        &StopWords::none(),
        &FitConfig::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    study.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + study.results.len());
    assert_eq!(study.results.len(), 5);
    assert!(month_slice(&reports, cfg.start, cfg.start).unwrap().len() == 15);
}

#[test]
fn daily_accuracy_groups_by_utc_opening_day() {
    let d0 = Utc.with_ymd_and_hms(2018, 3, 1, 23, 30, 0).unwrap();
    let outcomes = vec![
        (d0, true),
        (d0 + Duration::minutes(20), false),
        (d0 + Duration::minutes(40), true),
        (d0 + Duration::days(2), true),
    ];
    let s = daily_accuracy(outcomes);
    let days: Vec<(NaiveDate, f64, usize)> = s
        .points
        .iter()
        .map(|p| (p.day, p.accuracy, p.n_reports))
        .collect();
    assert_eq!(
        days,
        vec![
            (NaiveDate::from_ymd_opt(2018, 3, 1).unwrap(), 0.5, 2),
            (NaiveDate::from_ymd_opt(2018, 3, 2).unwrap(), 1.0, 1),
            (NaiveDate::from_ymd_opt(2018, 3, 3).unwrap(), 1.0, 1),
        ]
    );
    let mid = s.filter_range(NaiveDate::from_ymd_opt(2018, 3, 2), None);
    assert_eq!(mid.points.len(), 2);
    let first = s.filter_range(None, NaiveDate::from_ymd_opt(2018, 3, 1));
    assert_eq!(first.values(), [0.5]);
    assert!(daily_accuracy(Vec::new()).points.is_empty());
}
