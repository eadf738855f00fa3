use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use triage_core::classify::{Classifier, ClassifierKind, LearnerSpec, StackSpec};
use triage_core::corpus::{
    filter_closed, load_corpus, month_slice, month_span, CorpusFormat, IssueReport, TeamId,
    YearMonth,
};
use triage_core::driftmon::{
    run_cell, write_study_csv, DetectorConfig, DriftMode, DriftSimConfig, OnlineDetector, StudyRow,
    STUDY_DROPS,
};
use triage_core::eval::{
    daily_accuracy, evaluate_learners, format_table, window_study, WindowProtocol,
};
use triage_core::explain::{explain, explain_top2};
use triage_core::service::artifact::training_span;
use triage_core::service::{
    http, train_job, AssignmentService, Ledger, ModelArtifact, ServiceConfig, TrainJob,
};

#[derive(Parser)]
#[command(
    name = "triage",
    version,
    about = "Assign issue reports to development teams"
)]
struct Cli {
    /// Config file (JSON or key = value lines); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the twelve months before --as-of and write an artifact.
    Train(TrainArgs),
    /// Predict teams for reports read as JSON lines.
    Predict(PredictArgs),
    /// Cross-validate and test a list of learners on one month.
    Evaluate(EvaluateArgs),
    /// Accuracy against training-window distance.
    Windows(WindowsArgs),
    /// Explain the prediction for one report.
    Explain(ExplainArgs),
    /// Run the drift detector over a daily accuracy stream.
    Monitor(MonitorArgs),
    /// Detection-time study on simulated accuracy streams.
    SimulateDrift(SimulateArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// First month after the training span (YYYY-MM); defaults to the month
    /// after the newest report.
    #[arg(long)]
    as_of: Option<YearMonth>,
    #[arg(long)]
    learner: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSON lines with id, summary and description; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Test month; training uses the twelve months before it.
    #[arg(long)]
    as_of: YearMonth,
    /// Comma-separated learners; defaults to every kind plus selected-3 and selected-5.
    #[arg(long, value_delimiter = ',')]
    learners: Vec<String>,
    /// Cross-validation folds on the training data; 0 disables.
    #[arg(long, default_value_t = 10)]
    cv_folds: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WindowsArgs {
    #[arg(long)]
    protocol: WindowProtocol,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    from: Option<YearMonth>,
    #[arg(long)]
    to: Option<YearMonth>,
    #[arg(long, default_value_t = 12)]
    max_delta: usize,
    #[arg(long)]
    learner: Option<String>,
    /// Per-cell results as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "report")]
    id: String,
    #[arg(long, default_value = "")]
    summary: String,
    #[arg(long, default_value = "")]
    description: String,
    /// Also explain the runner-up team.
    #[arg(long)]
    top2: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MonitorArgs {
    /// Daily accuracies, one per line, or `day,accuracy` CSV rows.
    #[arg(long, conflicts_with = "ledger")]
    input: Option<PathBuf>,
    /// Assignment log; daily accuracy is computed from closed records.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    min_segment: Option<usize>,
    #[arg(long)]
    min_history: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sudden,
    Gradual,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    repetitions: usize,
    #[arg(long, default_value_t = DriftSimConfig::default().seed)]
    seed: u64,
    /// Deteriorations in accuracy points; defaults to 20,15,10,5.
    #[arg(long, value_delimiter = ',')]
    drops: Vec<f64>,
    #[arg(long, default_value_t = DetectorConfig::simulation().penalty)]
    penalty: f64,
    #[arg(long, default_value_t = DetectorConfig::simulation().min_segment)]
    min_segment: usize,
    #[arg(long, default_value_t = DetectorConfig::simulation().min_history)]
    min_history: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bind: Option<SocketAddr>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    match cli.command {
        Command::Train(a) => train(&cfg, a),
        Command::Predict(a) => predict(&cfg, a),
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Windows(a) => windows(&cfg, a),
        Command::Explain(a) => explain_cmd(&cfg, a),
        Command::Monitor(a) => monitor(&cfg, a),
        Command::SimulateDrift(a) => simulate(a),
        Command::Serve(a) => serve(cfg, a),
    }
}

fn required<'a>(
    flag: &'a Option<PathBuf>,
    fallback: &'a Option<PathBuf>,
    name: &str,
) -> Result<&'a Path> {
    match flag.as_ref().or(fallback.as_ref()) {
        Some(p) => Ok(p),
        None => bail!("--{name} is required (or set `{name}` in the config file)"),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<IssueReport>> {
    let loaded = load_corpus(path, CorpusFormat::Jsonl)
        .with_context(|| format!("loading {}", path.display()))?;
    for d in &loaded.diagnostics {
        log::warn!("{}: {d}", path.display());
    }
    Ok(loaded.reports)
}

fn learner(cfg: &ServiceConfig, flag: &Option<String>) -> Result<LearnerSpec> {
    Ok(match flag {
        Some(s) => s.parse()?,
        None => cfg.learner_spec()?,
    })
}

fn load_model(cfg: &ServiceConfig, flag: &Option<PathBuf>) -> Result<ModelArtifact> {
    let path = required(flag, &cfg.artifact, "model")?;
    ModelArtifact::load(path).with_context(|| format!("loading {}", path.display()))
}

fn train(cfg: &ServiceConfig, a: TrainArgs) -> Result<()> {
    let corpus = required(&a.corpus, &cfg.corpus, "corpus")?;
    let out = required(&a.out, &cfg.artifact, "out")?;
    let as_of = match a.as_of {
        Some(m) => m,
        None => {
            let reports = read_corpus(corpus)?;
            month_span(&reports)
                .context("the corpus is empty")?
                .1
                .offset(1)
        }
    };
    let job = TrainJob {
        as_of,
        learner: learner(cfg, &a.learner)?,
        fit_config: cfg.fit_config(),
        stopwords: cfg.stopword_list()?,
    };
    let art = train_job(corpus, &job, out)?;
    println!(
        "trained {} on {} reports ({}..{}), {} classes, {} terms -> {}",
        art.learner,
        art.n_training_reports,
        art.training_span.0,
        art.training_span.1,
        art.classes().len(),
        art.pipeline.dim(),
        out.display()
    );
    Ok(())
}

#[derive(Deserialize)]
struct PredictInput {
    id: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    description: String,
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    report_id: &'a str,
    team: Option<&'a TeamId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'static str>,
}

fn predict(cfg: &ServiceConfig, a: PredictArgs) -> Result<()> {
    let art = load_model(cfg, &a.model)?;
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictInput =
            serde_json::from_str(&line).with_context(|| format!("input line {}", i + 1))?;
        let x = art
            .pipeline
            .vectorize_tokens(&art.pipeline.tokens(&r.summary, &r.description));
        let team = (!x.is_empty()).then(|| art.model.predict(&x));
        let rec = PredictOutput {
            report_id: &r.id,
            team: team.as_ref(),
            error: team.is_none().then_some("no known terms"),
        };
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    }
    out.flush()?;
    Ok(())
}

fn evaluate(cfg: &ServiceConfig, a: EvaluateArgs) -> Result<()> {
    let reports = filter_closed(&read_corpus(required(&a.corpus, &cfg.corpus, "corpus")?)?);
    let span = training_span(a.as_of);
    let train = month_slice(&reports, span.0, span.1)?.reports;
    let test = month_slice(&reports, a.as_of, a.as_of)?.reports;
    if train.is_empty() || test.is_empty() {
        bail!(
            "need closed reports in {}..{} and in {}",
            span.0,
            span.1,
            a.as_of
        );
    }
    let learners: Vec<LearnerSpec> = if a.learners.is_empty() {
        ClassifierKind::ALL
            .iter()
            .map(|&k| LearnerSpec::Single(k))
            .chain([StackSpec::selected3(), StackSpec::selected5()].map(LearnerSpec::Stacked))
            .collect()
    } else {
        a.learners
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    };
    let folds = (a.cv_folds > 0).then_some(a.cv_folds);
    let rows = evaluate_learners(
        &train,
        &test,
        &learners,
        &cfg.stopword_list()?,
        folds,
        &cfg.fit_config(),
    )?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!(
            "train {}..{} ({} reports), test {} ({} reports)\n",
            span.0,
            span.1,
            train.len(),
            a.as_of,
            test.len()
        );
        print!("{}", format_table(&rows));
    }
    Ok(())
}

fn windows(cfg: &ServiceConfig, a: WindowsArgs) -> Result<()> {
    let reports = read_corpus(required(&a.corpus, &cfg.corpus, "corpus")?)?;
    let span = month_span(&reports).context("the corpus is empty")?;
    let months = (a.from.unwrap_or(span.0), a.to.unwrap_or(span.1));
    let spec = learner(cfg, &a.learner)?;
    let study = window_study(
        a.protocol,
        &reports,
        months,
        a.max_delta,
        &spec,
        &cfg.stopword_list()?,
        &cfg.fit_config(),
    )?;
    if let Some(p) = &a.out {
        study.write_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    println!(
        "{} windows, {} ({}..{})",
        a.protocol.as_str(),
        spec.label(),
        months.0,
        months.1
    );
    println!("{:>5} {:>9} {:>6}", "delta", "accuracy", "cells");
    for g in study.aggregate() {
        println!("{:>5} {:>9.4} {:>6}", g.delta, g.mean_accuracy, g.n_cells);
    }
    if let Some(t) = study.trend() {
        println!(
            "trend: slope {:+.5} per month, p = {:.3e} (n = {})",
            t.slope, t.p_value, t.n
        );
    }
    for s in &study.skipped {
        log::info!("skipped {} delta {}: {}", s.test_month, s.delta, s.reason);
    }
    Ok(())
}

fn explain_cmd(cfg: &ServiceConfig, a: ExplainArgs) -> Result<()> {
    let art = load_model(cfg, &a.model)?;
    let tokens = art.pipeline.tokens(&a.summary, &a.description);
    let ex = cfg.explainer();
    let explanations = if a.top2 {
        let (best, second) = explain_top2(&a.id, &tokens, &art.model, &art.pipeline, &ex)?;
        vec![best, second]
    } else {
        vec![explain(&a.id, &tokens, &art.model, &art.pipeline, &ex)?]
    };
    for e in &explanations {
        if a.json {
            println!("{}", e.to_json());
        } else {
            println!("{}", e.render_text());
        }
    }
    Ok(())
}

fn read_accuracies(path: &Path) -> Result<Vec<(String, f64)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (day, value) = match line.rsplit_once(',') {
            Some((d, v)) => (d.trim().to_owned(), v.trim()),
            None => ((out.len() + 1).to_string(), line),
        };
        match value.parse::<f64>() {
            Ok(v) => out.push((day, v)),
            Err(_) if i == 0 => {} // header
            Err(_) => bail!("{}:{}: not an accuracy: {value:?}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn monitor(cfg: &ServiceConfig, a: MonitorArgs) -> Result<()> {
    let base = cfg.detector();
    let det_cfg = DetectorConfig {
        penalty: a.penalty.unwrap_or(base.penalty),
        min_segment: a.min_segment.unwrap_or(base.min_segment),
        min_history: a.min_history.unwrap_or(base.min_history),
    };
    let series: Vec<(String, f64)> = match (&a.input, &a.ledger.as_ref().or(cfg.ledger.as_ref())) {
        (Some(p), _) => read_accuracies(p)?,
        (None, Some(p)) => {
            let ledger = Ledger::load(p)?;
            daily_accuracy(
                ledger
                    .records()
                    .filter_map(|r| r.correct().map(|c| (r.opened_at, c))),
            )
            .points
            .into_iter()
            .map(|p| (p.day.to_string(), p.accuracy))
            .collect()
        }
        (None, None) => bail!("--input or --ledger is required"),
    };
    let mut det = OnlineDetector::new(det_cfg)?;
    let mut fired = false;
    for (_, acc) in &series {
        if let Some(alert) = det.push(*acc) {
            fired = true;
            println!("{}", alert.to_json_line());
            println!(
                "drift: accuracy fell from {:.4} to {:.4}; change began on {}, detected on {}",
                alert.pre_mean,
                alert.post_mean,
                series[alert.boundary - 1].0,
                series[alert.day - 1].0
            );
        }
    }
    let cps: Vec<&str> = det
        .change_points()
        .into_iter()
        .map(|i| series[i].0.as_str())
        .collect();
    println!("{} days, change points: [{}]", series.len(), cps.join(", "));
    if !fired {
        println!("no drift alert");
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let detector = DetectorConfig {
        penalty: a.penalty,
        min_segment: a.min_segment,
        min_history: a.min_history,
    };
    let drops: Vec<f64> = if a.drops.is_empty() {
        STUDY_DROPS.to_vec()
    } else {
        a.drops.iter().map(|d| d / 100.0).collect()
    };
    let modes: &[DriftMode] = match a.mode {
        ModeArg::Sudden => &[DriftMode::Sudden],
        ModeArg::Gradual => &[DriftMode::Gradual],
        ModeArg::Both => &[DriftMode::Sudden, DriftMode::Gradual],
    };
    let mut rows: Vec<StudyRow> = Vec::new();
    for &mode in modes {
        for &drop_points in &drops {
            let sim = DriftSimConfig {
                mode,
                drop_points,
                repetitions: a.repetitions,
                seed: a.seed,
                ..DriftSimConfig::default()
            };
            rows.push(run_cell(&sim, &detector)?);
        }
    }
    let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_owned(), |v| format!("{v:.p$}"));
    println!(
        "{:<8} {:<9} {:>6} {:>4} {:>7} {:>4} {:>7} {:>9}",
        "mode", "drop", "rate", "min", "avg", "max", "stddev", "min acc"
    );
    for r in &rows {
        println!(
            "{:<8} {:<9} {:>6.3} {:>4} {:>7} {:>4} {:>7} {:>9}",
            r.mode.as_str(),
            r.label(),
            r.detection_rate,
            r.min.map_or("-".into(), |v| v.to_string()),
            fmt(r.avg, 2),
            r.max.map_or("-".into(), |v| v.to_string()),
            fmt(r.stddev, 2),
            fmt(r.min_mean_accuracy, 4),
        );
    }
    if let Some(p) = &a.out {
        write_study_csv(
            &rows,
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )?;
    }
    Ok(())
}

fn serve(mut cfg: ServiceConfig, a: ServeArgs) -> Result<()> {
    if a.model.is_some() {
        cfg.artifact = a.model;
    }
    if a.corpus.is_some() {
        cfg.corpus = a.corpus;
    }
    if a.ledger.is_some() {
        cfg.ledger = a.ledger;
    }
    let bind: SocketAddr = match a.bind {
        Some(b) => b,
        None => cfg
            .bind
            .parse()
            .with_context(|| format!("bind address {:?}", cfg.bind))?,
    };
    let ledger = match &cfg.ledger {
        Some(p) => Ledger::open(p)?,
        None => {
            log::warn!("no ledger path configured; assignments are kept in memory only");
            Ledger::in_memory()
        }
    };
    let service = Arc::new(AssignmentService::new(cfg.settings()?, ledger));
    match &cfg.artifact {
        Some(p) if p.exists() => {
            service.install(
                ModelArtifact::load(p).with_context(|| format!("loading {}", p.display()))?,
            );
        }
        _ => log::warn!(
            "no model artifact loaded; /assign answers 503 until /admin/retrain succeeds"
        ),
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(http::serve(bind, service))?;
    Ok(())
}
