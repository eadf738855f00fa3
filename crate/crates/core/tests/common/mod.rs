//! Reference implementations and fixtures shared by the integration tests
//! and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triage_core::classify::{
    fit, fit_learner, Classifier, ClassifierKind, ClassifyError, FitConfig, LearnerSpec,
    ModelParams,
};
use triage_core::corpus::{IssueReport, TeamId};
use triage_core::eval::{evaluate_model, prepare, window_study, WindowProtocol, WindowStudy};
use triage_core::explain::{explain, ExplainerConfig};
use triage_core::synth::{
    drifting_corpus, keyword_corpus, DriftingCorpusConfig, KeywordCorpusConfig,
};
use triage_core::textpipe::{build_vocabulary, SparseVector, StopWords, TextPipeline};

// ---------------------------------------------------------------- PELT

/// Unpruned O(n^2) optimal partitioning with two-pass segment costs.
pub fn pelt_oracle(x: &[f64], penalty: f64, min_seg: usize) -> (Vec<usize>, f64) {
    let n = x.len();
    let cost = |s: usize, t: usize| {
        let seg = &x[s..t];
        let m = seg.iter().sum::<f64>() / seg.len() as f64;
        seg.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };
    let mut f = vec![f64::INFINITY; n + 1];
    let mut arg = vec![0usize; n + 1];
    f[0] = -penalty;
    for t in min_seg..=n {
        for s in 0..=t - min_seg {
            if s != 0 && s < min_seg {
                continue;
            }
            let v = f[s] + cost(s, t) + penalty;
            if v < f[t] {
                f[t] = v;
                arg[t] = s;
            }
        }
    }
    let mut cps = Vec::new();
    let mut t = n;
    while arg[t] > 0 {
        cps.push(arg[t]);
        t = arg[t];
    }
    cps.reverse();
    (cps, f[n])
}

/// Piecewise-constant accuracy-like series of length 6..=60 with noise.
pub fn random_series(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(6..=60);
    let mut level: f64 = rng.random_range(0.5..0.9);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.08) {
                level = rng.random_range(0.4..0.95);
            }
            (level + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)
        })
        .collect()
}

pub const PELT_SETTINGS: [(f64, usize); 4] = [(0.05, 2), (0.0055, 3), (0.01, 1), (0.0, 2)];

/// Relative tolerance on the optimal objective; the oracle sums segment
/// costs in a different order than the prefix-sum form.
pub const PELT_COST_TOL: f64 = 1e-10;

/// Number of mismatching cases over `cases` random series.
pub fn pelt_mismatches(cases: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for case in 0..cases {
        let x = random_series(&mut rng);
        let (penalty, min_seg) = PELT_SETTINGS[case % PELT_SETTINGS.len()];
        let got = triage_core::driftmon::pelt_segment(&x, penalty, min_seg).expect("valid input");
        let (cps, cost) = pelt_oracle(&x, penalty, min_seg);
        if got.change_points != cps
            || (got.total_cost - cost).abs() > PELT_COST_TOL * (1.0 + cost.abs())
        {
            bad.push(format!("case {case}: {:?} vs {:?}", got.change_points, cps));
        }
    }
    bad
}

// ---------------------------------------------------------------- tf-idf

/// Dense tf-idf straight from the definitions: raw counts times
/// ln(N / df), then divided by the Euclidean norm.
pub fn dense_tfidf(train: &[Vec<String>], doc: &[String]) -> Vec<(String, f64)> {
    let n = train.len() as f64;
    let mut terms: Vec<String> = Vec::new();
    for d in train {
        for t in d {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    let w: Vec<f64> = terms
        .iter()
        .map(|t| {
            let tf = doc.iter().filter(|d| *d == t).count() as f64;
            let df = train.iter().filter(|d| d.contains(t)).count() as f64;
            tf * (n / df).ln()
        })
        .collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    terms
        .into_iter()
        .zip(w)
        .map(|(t, v)| (t, if norm > 0.0 { v / norm } else { 0.0 }))
        .collect()
}

pub fn random_docs(rng: &mut ChaCha8Rng, vocab_size: usize, n_docs: usize) -> Vec<Vec<String>> {
    (0..n_docs)
        .map(|_| {
            let len = rng.random_range(1..=12);
            (0..len)
                .map(|_| format!("t{}", rng.random_range(0..vocab_size)))
                .collect()
        })
        .collect()
}

/// Largest absolute difference between the library vectors and the dense
/// oracle over random corpora with at most 50 terms, plus the number of
/// ubiquitous-term weights that were not exactly zero.
pub fn tfidf_oracle_error(corpora: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut nonzero_ubiquitous = 0;
    for _ in 0..corpora {
        let v = rng.random_range(1..=50);
        let n_docs = rng.random_range(1..=20);
        let mut train = random_docs(&mut rng, v, n_docs);
        // a term in every document
        for d in &mut train {
            d.push("everywhere".into());
        }
        let vocab = build_vocabulary(&train).expect("non-empty");
        let mut probes = random_docs(&mut rng, v + 5, 5);
        probes.extend(train.iter().take(3).cloned());
        for doc in &probes {
            let got = triage_core::textpipe::vectorize(doc, &vocab);
            for (term, want) in dense_tfidf(&train, doc) {
                let idx = vocab.index_of(&term).expect("term from training docs");
                let have = got.get(idx);
                worst = worst.max((have - want).abs());
                if term == "everywhere" && have != 0.0 {
                    nonzero_ubiquitous += 1;
                }
            }
            // nothing outside the vocabulary
            assert!(got.max_index().is_none_or(|i| (i as usize) < vocab.len()));
        }
    }
    (worst, nonzero_ubiquitous)
}

// ---------------------------------------------------------------- metrics

pub struct BruteMetrics {
    pub classes: Vec<TeamId>,
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<usize>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

/// Full confusion matrix, then every figure from its rows and columns.
pub fn brute_metrics(y_true: &[TeamId], y_pred: &[TeamId], class_set: &[TeamId]) -> BruteMetrics {
    let classes: Vec<TeamId> = class_set
        .iter()
        .chain(y_true)
        .chain(y_pred)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = classes.len();
    let pos = |t: &TeamId| classes.iter().position(|c| c == t).unwrap();
    let mut m = vec![vec![0usize; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[pos(t)][pos(p)] += 1;
    }
    let n = y_true.len();
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let support: Vec<usize> = (0..k).map(|i| m[i].iter().sum()).collect();
    let predicted: Vec<usize> = (0..k).map(|j| (0..k).map(|i| m[i][j]).sum()).collect();
    let precision: Vec<f64> = (0..k).map(|i| div(m[i][i], predicted[i])).collect();
    let recall: Vec<f64> = (0..k).map(|i| div(m[i][i], support[i])).collect();
    let f1: Vec<f64> = (0..k)
        .map(|i| {
            let (p, r) = (precision[i], recall[i]);
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .collect();
    let weighted = |v: &[f64]| (0..k).map(|i| support[i] as f64 * v[i]).sum::<f64>() / n as f64;
    let trace: usize = (0..k).map(|i| m[i][i]).sum();
    BruteMetrics {
        accuracy: div(trace, n),
        weighted_precision: weighted(&precision),
        weighted_recall: weighted(&recall),
        weighted_f1: weighted(&f1),
        classes,
        confusion: m,
        precision,
        recall,
        f1,
        support,
    }
}

pub fn random_labels(rng: &mut ChaCha8Rng) -> (Vec<TeamId>, Vec<TeamId>, Vec<TeamId>) {
    let n_classes = rng.random_range(1..=5);
    let n = rng.random_range(1..=30);
    let team = |i: usize| TeamId::new(format!("T{i}")).unwrap();
    let y_true: Vec<TeamId> = (0..n)
        .map(|_| team(rng.random_range(0..n_classes)))
        .collect();
    let y_pred: Vec<TeamId> = (0..n)
        .map(|_| team(rng.random_range(0..n_classes + 1)))
        .collect();
    let extra: Vec<TeamId> = (0..rng.random_range(0..2)).map(|i| team(10 + i)).collect();
    (y_true, y_pred, extra)
}

/// Instances where the library and the brute-force figures differ, and
/// instances where accuracy differs from weighted recall.
pub fn metrics_mismatches(instances: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut differ = 0;
    let mut acc_ne_recall = 0;
    for _ in 0..instances {
        let (t, p, extra) = random_labels(&mut rng);
        let got = triage_core::eval::compute_metrics(&t, &p, &extra).unwrap();
        let want = brute_metrics(&t, &p, &extra);
        let per_class_ok = got.per_class.len() == want.classes.len()
            && got.per_class.iter().enumerate().all(|(i, c)| {
                c.team == want.classes[i]
                    && c.support == want.support[i]
                    && c.precision == want.precision[i]
                    && c.recall == want.recall[i]
                    && c.f1 == want.f1[i]
            });
        let ok = per_class_ok
            && got.n == t.len()
            && got.accuracy == want.accuracy
            && got.weighted_precision == want.weighted_precision
            && got.weighted_f1 == want.weighted_f1
            && (got.weighted_recall - want.weighted_recall).abs() <= 1e-12;
        differ += usize::from(!ok);
        acc_ne_recall += usize::from(got.accuracy != got.weighted_recall);
    }
    (differ, acc_ne_recall)
}

// ---------------------------------------------------------------- classifier ladder

pub struct Ladder {
    pub accuracies: Vec<(String, f64)>,
}

impl Ladder {
    pub fn get(&self, label: &str) -> f64 {
        self.accuracies
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, a)| *a)
            .unwrap()
    }
}

pub const LADDER_LEARNERS: [&str; 9] = [
    "baseline_majority",
    "multinomial_nb",
    "decision_tree",
    "knn",
    "logistic_regression",
    "random_forest",
    "linear_svc",
    "linear_svc_calibrated",
    "selected-3",
];

/// 6 classes x 100 documents with 10% label noise; trains on 70% (every
/// report with index mod 10 below 7) and scores the rest against the
/// noise-free labels.
pub fn classifier_ladder() -> Ladder {
    let c = keyword_corpus(&KeywordCorpusConfig {
        label_noise: 0.10,
        ..KeywordCorpusConfig::default()
    });
    let train: Vec<IssueReport> = c
        .reports
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 10 < 7)
        .map(|(_, r)| r.clone())
        .collect();
    let test: Vec<usize> = (0..c.reports.len()).filter(|i| i % 10 >= 7).collect();
    let prep = prepare(&train, &StopWords::none()).unwrap();
    let tx: Vec<SparseVector> = test
        .iter()
        .map(|&i| prep.pipeline.vectorize_report(&c.reports[i]))
        .collect();
    let ty: Vec<TeamId> = test.iter().map(|&i| c.clean_labels[i].clone()).collect();
    let cfg = FitConfig::default();
    let accuracies = LADDER_LEARNERS
        .iter()
        .map(|s| {
            let spec: LearnerSpec = s.parse().unwrap();
            let m = fit_learner(&spec, &prep.training_set(), &cfg).unwrap();
            (
                s.to_string(),
                evaluate_model(&m, &tx, &ty).unwrap().accuracy,
            )
        })
        .collect();
    Ladder { accuracies }
}

// ---------------------------------------------------------------- windows

pub fn window_studies() -> (WindowStudy, WindowStudy) {
    let cfg = DriftingCorpusConfig::default();
    let reports = drifting_corpus(&cfg);
    let months = (cfg.start, cfg.start.offset(cfg.months as i64 - 1));
    let spec = LearnerSpec::Single(ClassifierKind::LinearSvc);
    let run = |p| {
        window_study(
            p,
            &reports,
            months,
            12,
            &spec,
            &StopWords::none(),
            &FitConfig::default(),
        )
        .unwrap()
    };
    (
        run(WindowProtocol::Sliding),
        run(WindowProtocol::Cumulative),
    )
}

// ---------------------------------------------------------------- explanations

/// p(ATM_OPS) = 1 when the report contains "atm", else 0.
pub struct Indicator {
    pub classes: Vec<TeamId>,
    pub atm: u32,
}

impl Classifier for Indicator {
    fn classes(&self) -> &[TeamId] {
        &self.classes
    }

    fn predict_index(&self, x: &SparseVector) -> usize {
        usize::from(x.get(self.atm) == 0.0)
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifyError> {
        Ok(if x.get(self.atm) > 0.0 {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        })
    }

    fn supports_proba(&self) -> bool {
        true
    }
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

pub fn indicator_setup() -> (Indicator, TextPipeline) {
    let docs = vec![
        words("atm card screen login fails slow"),
        words("ledger batch report"),
    ];
    let vocab = build_vocabulary(&docs).unwrap();
    let pipeline = TextPipeline {
        stopwords: StopWords::none(),
        vocab,
    };
    let model = Indicator {
        classes: vec![
            TeamId::new("ATM_OPS").unwrap(),
            TeamId::new("OTHER").unwrap(),
        ],
        atm: pipeline.vocab.index_of("atm").unwrap(),
    };
    (model, pipeline)
}

/// Share of seeded runs (sampled, not enumerated) where the indicator term
/// ranks first.
pub fn indicator_first_rate(runs: u64) -> f64 {
    let (model, pipeline) = indicator_setup();
    let mut report = words("atm card screen login fails slow ledger batch report");
    report.extend(["fa", "fb", "fc", "fd", "fe", "ff", "fg", "fh"].map(String::from));
    let hits = (0..runs)
        .filter(|&seed| {
            let cfg = ExplainerConfig {
                seed,
                ..ExplainerConfig::default()
            };
            let e = explain("R", &report, &model, &pipeline, &cfg).unwrap();
            e.terms[0].term == "atm"
        })
        .count();
    hits as f64 / runs as f64
}

/// Share of reports whose top-3 explanation signs agree with the model's
/// own per-term contributions `w_c[t] * x[t]` for the explained class.
pub fn faithfulness_rate() -> f64 {
    let corpus = keyword_corpus(&KeywordCorpusConfig::default());
    let train: Vec<_> = corpus.reports.iter().skip(100).cloned().collect();
    let prep = prepare(&train, &StopWords::none()).unwrap();
    let model = fit(
        ClassifierKind::LinearSvcCalibrated,
        &prep.training_set(),
        &FitConfig::default(),
    )
    .unwrap();
    let ModelParams::CalibratedSvc { linear, .. } = model.params() else {
        panic!("calibrated parameters expected");
    };
    let cfg = ExplainerConfig::default();
    let mut agree = 0;
    for r in &corpus.reports[..100] {
        let toks = prep.pipeline.tokens(&r.summary, &r.description);
        let x = prep.pipeline.vectorize_tokens(&toks);
        let e = explain(&r.id, &toks, &model, &prep.pipeline, &cfg).unwrap();
        let c = model
            .classes()
            .iter()
            .position(|t| *t == e.predicted_team)
            .unwrap();
        let ok = e.terms.iter().take(3).all(|t| {
            let contribution = prep
                .pipeline
                .vocab
                .index_of(&t.term)
                .map_or(0.0, |i| linear.weights[c][i as usize] * x.get(i));
            contribution * t.weight > 0.0
        });
        agree += usize::from(ok);
    }
    agree as f64 / 100.0
}

// ---------------------------------------------------------------- service fixtures

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, Duration, TimeZone, Utc};
use triage_core::corpus::{Status, YearMonth};
use triage_core::driftmon::{simulate_series, DetectorConfig, DriftSimConfig};
use triage_core::service::{
    train_on_reports, AssignRequest, AssignmentRecord, AssignmentService, Ledger, LedgerEvent,
    ModelArtifact, ServiceSettings, TrainJob,
};
use triage_core::synth::{team_name, word};

pub fn job(as_of: &str, learner: &str) -> TrainJob {
    TrainJob {
        as_of: as_of.parse().unwrap(),
        learner: learner.parse().unwrap(),
        fit_config: FitConfig::default(),
        stopwords: StopWords::none(),
    }
}

/// Keyword corpus opened in January 2017, so `as_of = 2017-02` covers it.
pub fn keyword_reports(docs_per_class: usize, seed: u64) -> Vec<IssueReport> {
    keyword_corpus(&KeywordCorpusConfig {
        docs_per_class,
        seed,
        ..KeywordCorpusConfig::default()
    })
    .reports
}

/// Same reports with every closing team renamed, so a model trained on them
/// predicts names the original never does.
pub fn relabelled(reports: &[IssueReport], suffix: &str) -> Vec<IssueReport> {
    reports
        .iter()
        .map(|r| IssueReport {
            closing_team: r
                .closing_team
                .as_ref()
                .map(|t| TeamId::new(format!("{}{suffix}", t.as_str())).unwrap()),
            ..r.clone()
        })
        .collect()
}

/// Predictions and probabilities that differ after `to_bytes`/`from_bytes`
/// and after `save`/`load`, over a 1000-report probe set.
pub fn artifact_round_trip_mismatches(learner: &str) -> usize {
    let art = train_on_reports(&keyword_reports(100, 7), &job("2017-02", learner)).unwrap();
    let from_bytes = ModelArtifact::from_bytes(&art.to_bytes().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    art.save(&path).unwrap();
    let from_file = ModelArtifact::load(&path).unwrap();
    let probe = keyword_reports(167, 99);
    let mut bad = 0;
    for r in probe.iter().take(1000) {
        let expect_x = art.pipeline.vectorize_report(r);
        for other in [&from_bytes, &from_file] {
            let x = other.pipeline.vectorize_report(r);
            let same = x == expect_x
                && other.model.predict(&x) == art.model.predict(&expect_x)
                && other.model.predict_proba(&x).ok() == art.model.predict_proba(&expect_x).ok();
            bad += usize::from(!same);
        }
    }
    bad
}

pub struct SwapOutcome {
    pub responses: usize,
    pub mixed: usize,
    pub versions_seen: usize,
    pub swaps: usize,
}

/// 100 concurrent assign calls while another thread keeps swapping between
/// two models whose team names are disjoint. A response is mixed when its
/// team or ledger record does not match the model version it reports.
pub fn hot_swap_under_load() -> SwapOutcome {
    let reports = keyword_reports(60, 3);
    let a = train_on_reports(&reports, &job("2017-02", "linear_svc")).unwrap();
    let b = train_on_reports(&relabelled(&reports, "_NEW"), &job("2017-02", "linear_svc")).unwrap();
    let fa = a.model_fingerprint();
    let fb = b.model_fingerprint();
    assert_ne!(fa, fb);
    let by_fp: HashMap<String, ModelArtifact> =
        [(fa.clone(), a.clone()), (fb.clone(), b.clone())].into();
    let svc = Arc::new(AssignmentService::new(
        ServiceSettings::default(),
        Ledger::in_memory(),
    ));
    svc.install(a.clone());
    let stop = Arc::new(AtomicBool::new(false));
    let swapper = {
        let (svc, stop, a, b) = (svc.clone(), stop.clone(), a.clone(), b.clone());
        std::thread::spawn(move || {
            let mut n = 0;
            while !stop.load(Ordering::Relaxed) {
                svc.install(if n % 2 == 0 { b.clone() } else { a.clone() });
                n += 1;
                std::thread::yield_now();
            }
            n
        })
    };
    let probe = keyword_reports(20, 5);
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let svc = svc.clone();
            let r = probe[i % probe.len()].clone();
            std::thread::spawn(move || {
                let resp = svc
                    .assign(AssignRequest {
                        report_id: format!("H-{i}"),
                        summary: r.summary.clone(),
                        description: r.description.clone(),
                        opened_at: None,
                        explain: false,
                    })
                    .unwrap();
                (r, resp)
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    stop.store(true, Ordering::Relaxed);
    let swaps = swapper.join().unwrap();
    let mut mixed = 0;
    let mut seen = BTreeSet::new();
    for (r, resp) in &results {
        seen.insert(resp.model.clone());
        let ok = by_fp.get(&resp.model).is_some_and(|art| {
            let x = art.pipeline.vectorize_report(r);
            art.model.predict(&x) == resp.team
        }) && svc.record(&resp.report_id).is_some_and(|rec| {
            rec.model_fingerprint == resp.model && rec.predicted_team == resp.team
        });
        mixed += usize::from(!ok);
    }
    SwapOutcome {
        responses: results.len(),
        mixed,
        versions_seen: seen.len(),
        swaps,
    }
}

/// Six-team corpus whose vocabulary has about `vocab` distinct terms.
pub fn large_vocab_reports(vocab: usize, seed: u64) -> Vec<IssueReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = 6;
    let words_per_doc = 60;
    let n_docs = vocab / 40 + 600;
    // doc i covers a stripe of term ids so that every id occurs somewhere
    let stripe = vocab.div_ceil(n_docs);
    let base = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
    (0..n_docs)
        .map(|i| {
            let class = i % n_classes;
            let mut words: Vec<String> = (0..stripe)
                .map(|j| word(100 + (i * stripe + j) % vocab))
                .collect();
            while words.len() < words_per_doc {
                let id = if rng.random_bool(0.4) {
                    class * 16 + rng.random_range(0..16)
                } else {
                    100 + rng.random_range(0..vocab)
                };
                words.push(word(id));
            }
            let opened = base + Duration::minutes(i as i64);
            IssueReport {
                id: format!("L-{i}"),
                summary: words[..5].join(" "),
                description: words[5..].join(" "),
                opened_at: opened,
                closed_at: Some(opened + Duration::hours(2)),
                initial_team: None,
                closing_team: Some(team_name(class)),
                status: Status::Closed,
            }
        })
        .collect()
}

pub struct Latency {
    pub vocab: usize,
    pub median_ms: f64,
    pub max_ms: f64,
}

/// Wall-clock time of single `assign` calls against a linear SVC whose
/// vocabulary has about `vocab` terms.
pub fn assign_latency(vocab: usize, requests: usize) -> Latency {
    let reports = large_vocab_reports(vocab, 1);
    let art = train_on_reports(&reports, &job("2017-02", "linear_svc")).unwrap();
    let v = art.pipeline.dim();
    let svc = AssignmentService::new(ServiceSettings::default(), Ledger::in_memory());
    svc.install(art);
    let probe = large_vocab_reports(vocab, 2);
    let mut times: Vec<f64> = (0..requests)
        .map(|i| {
            let r = &probe[i % probe.len()];
            let t = Instant::now();
            svc.assign(AssignRequest {
                report_id: format!("P-{i}"),
                summary: r.summary.clone(),
                description: r.description.clone(),
                opened_at: None,
                explain: false,
            })
            .unwrap();
            t.elapsed().as_secs_f64() * 1000.0
        })
        .collect();
    times.sort_by(f64::total_cmp);
    Latency {
        vocab: v,
        median_ms: times[times.len() / 2],
        max_ms: *times.last().unwrap(),
    }
}

/// Ledger events for `days` days of `per_day` closed assignments each,
/// where the share of correct ones follows `series`.
pub fn feedback_events(series: &[f64], per_day: usize, start: DateTime<Utc>) -> Vec<LedgerEvent> {
    let t1 = TeamId::new("T1").unwrap();
    let t2 = TeamId::new("T2").unwrap();
    let mut events = Vec::new();
    for (d, &acc) in series.iter().enumerate() {
        let correct = (acc * per_day as f64).round() as usize;
        for i in 0..per_day {
            let opened = start + Duration::days(d as i64) + Duration::minutes(i as i64);
            let id = format!("F-{d}-{i}");
            events.push(LedgerEvent::Assigned(AssignmentRecord {
                report_id: id.clone(),
                opened_at: opened,
                predicted_team: t1.clone(),
                predicted_at: opened,
                model_fingerprint: "m".into(),
                final_team: None,
                closed_at: None,
            }));
            events.push(LedgerEvent::Closed {
                report_id: id,
                final_team: if i < correct { t1.clone() } else { t2.clone() },
                closed_at: opened + Duration::hours(3),
            });
        }
    }
    events
}

/// Replays simulated sudden 20-point drops through the ledger and the
/// accuracy endpoint; returns the detection delay of each repetition
/// (`None` when no alert surfaced after the drop).
pub fn replayed_drop_delays(reps: usize) -> Vec<Option<i64>> {
    let sim = DriftSimConfig {
        drop_points: 0.20,
        ..DriftSimConfig::default()
    };
    let start = Utc.with_ymd_and_hms(2019, 1, 1, 9, 0, 0).unwrap();
    (0..reps)
        .map(|rep| {
            let series = simulate_series(&sim, rep);
            let ledger = Ledger::replay(feedback_events(&series, 200, start)).unwrap();
            let svc = AssignmentService::new(
                ServiceSettings {
                    detector: DetectorConfig::simulation(),
                    ..ServiceSettings::default()
                },
                ledger,
            );
            let status = svc.accuracy(None, None).unwrap();
            assert_eq!(status.series.points.len(), series.len());
            status
                .alert
                .map(|a| (a.day - start.date_naive()).num_days() + 1 - sim.n_days_before as i64)
        })
        .collect()
}

pub fn year_month(s: &str) -> YearMonth {
    s.parse().unwrap()
}
