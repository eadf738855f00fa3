//! Change-point monitoring of daily assignment accuracy.
//!
//! Segmentation minimizes the sum of per-segment squared deviations from the
//! segment mean plus `penalty` per change point, solved exactly by PELT.
//! The same incremental solver backs both the batch entry point and the
//! online detector, so appending one day at a time gives the segmentation a
//! full rerun would.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("series of length {len} is too short; need at least {needed}")]
    InsufficientData { len: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointResult {
    /// Segment boundaries; a boundary `b` starts a new segment at index `b`.
    pub change_points: Vec<usize>,
    pub segment_means: Vec<f64>,
    pub total_cost: f64,
}

/// Incremental PELT over a growing series.
#[derive(Debug, Clone)]
struct Pelt {
    penalty: f64,
    min_segment: usize,
    shift: f64,
    // prefix sums of (x - shift) and its square
    s1: Vec<f64>,
    s2: Vec<f64>,
    best: Vec<f64>,
    last: Vec<usize>,
    candidates: Vec<usize>,
    // (time from which the prune is valid, candidate)
    pending: Vec<(usize, usize)>,
    scheduled: Vec<bool>,
    doomed: Vec<bool>,
}

impl Pelt {
    fn new(penalty: f64, min_segment: usize) -> Self {
        Self {
            penalty,
            min_segment,
            shift: 0.0,
            s1: vec![0.0],
            s2: vec![0.0],
            best: vec![-penalty],
            last: vec![0],
            candidates: Vec::new(),
            pending: Vec::new(),
            scheduled: vec![false],
            doomed: vec![false],
        }
    }

    fn len(&self) -> usize {
        self.s1.len() - 1
    }

    fn cost(&self, s: usize, t: usize) -> f64 {
        let a = self.s1[t] - self.s1[s];
        let b = self.s2[t] - self.s2[s];
        (b - a * a / (t - s) as f64).max(0.0)
    }

    fn mean(&self, s: usize, t: usize) -> f64 {
        (self.s1[t] - self.s1[s]) / (t - s) as f64 + self.shift
    }

    fn push(&mut self, x: f64) {
        if self.len() == 0 {
            self.shift = x;
        }
        let v = x - self.shift;
        let n = self.len();
        self.s1.push(self.s1[n] + v);
        self.s2.push(self.s2[n] + v * v);
        self.doomed.push(false);
        self.scheduled.push(false);
        let t = n + 1;

        if let Some(s) = t.checked_sub(self.min_segment) {
            if s == 0 || s >= self.min_segment {
                self.candidates.push(s);
            }
        }
        if self.pending.iter().any(|&(at, _)| at <= t) {
            let doomed = &mut self.doomed;
            self.pending.retain(|&(at, s)| {
                if at <= t {
                    doomed[s] = true;
                    false
                } else {
                    true
                }
            });
            let doomed = &self.doomed;
            self.candidates.retain(|&s| !doomed[s]);
        }

        let mut f_t = f64::INFINITY;
        let mut arg = 0;
        let scored: Vec<(usize, f64)> = self
            .candidates
            .iter()
            .map(|&s| (s, self.best[s] + self.cost(s, t)))
            .collect();
        for &(s, v) in &scored {
            if v + self.penalty < f_t {
                f_t = v + self.penalty;
                arg = s;
            }
        }
        self.best.push(f_t);
        self.last.push(arg);
        if f_t.is_finite() {
            // A candidate that cannot beat t now cannot beat it later, but t
            // only becomes usable once a full minimum segment follows it.
            let margin = 1e-12 * (1.0 + f_t.abs());
            for (s, v) in scored {
                if v > f_t + margin && !self.scheduled[s] {
                    self.scheduled[s] = true;
                    self.pending.push((t + self.min_segment, s));
                }
            }
        }
    }

    fn boundaries(&self) -> Vec<usize> {
        let mut cps = Vec::new();
        let mut t = self.len();
        while t > 0 {
            let s = self.last[t];
            if s > 0 {
                cps.push(s);
            }
            t = s;
        }
        cps.reverse();
        cps
    }
}

fn validate(penalty: f64, min_segment: usize) -> Result<(), DriftError> {
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(DriftError::InvalidConfig(format!(
            "penalty must be finite and >= 0, got {penalty}"
        )));
    }
    if min_segment == 0 {
        return Err(DriftError::InvalidConfig(
            "min_segment must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Exact penalized least-squares segmentation.
pub fn pelt_segment(
    series: &[f64],
    penalty: f64,
    min_segment: usize,
) -> Result<ChangePointResult, DriftError> {
    validate(penalty, min_segment)?;
    let needed = 2 * min_segment;
    if series.len() < needed {
        return Err(DriftError::InsufficientData {
            len: series.len(),
            needed,
        });
    }
    let mut pelt = Pelt::new(penalty, min_segment);
    for &x in series {
        pelt.push(x);
    }
    let change_points = pelt.boundaries();
    let mut edges = vec![0];
    edges.extend(&change_points);
    edges.push(series.len());
    let segment_means = edges
        .windows(2)
        .map(|w| series[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect();
    Ok(ChangePointResult {
        change_points,
        segment_means,
        total_cost: pelt.best[series.len()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub penalty: f64,
    pub min_segment: usize,
    /// Days that must be observed before the first decision.
    pub min_history: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            penalty: 0.05,
            min_segment: 2,
            min_history: 4,
        }
    }
}

impl DetectorConfig {
    /// Settings that reproduce the published detection-time tables for a
    /// series with 100 in-control days.
    pub fn simulation() -> Self {
        Self {
            penalty: 0.0055,
            min_segment: 3,
            min_history: 101,
        }
    }
}

/// A detected deterioration. `day` and `boundary` are 1-based day numbers
/// in the stream; `boundary` is the first day of the degraded segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub day: usize,
    pub boundary: usize,
    pub pre_mean: f64,
    pub post_mean: f64,
}

impl Alert {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("alert serializes")
    }
}

/// Online deterioration detector fed one daily accuracy at a time.
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    config: DetectorConfig,
    pelt: Pelt,
    alert: Option<Alert>,
}

impl OnlineDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, DriftError> {
        validate(config.penalty, config.min_segment)?;
        if config.min_history < 2 * config.min_segment {
            return Err(DriftError::InvalidConfig(format!(
                "min_history {} is below 2 * min_segment",
                config.min_history
            )));
        }
        Ok(Self {
            pelt: Pelt::new(config.penalty, config.min_segment),
            config,
            alert: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.pelt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alert(&self) -> Option<Alert> {
        self.alert
    }

    /// Current optimal boundaries of the whole history (0-based indices).
    pub fn change_points(&self) -> Vec<usize> {
        self.pelt.boundaries()
    }

    /// Appends one day. Returns the alert only on the day it is raised.
    pub fn push(&mut self, accuracy: f64) -> Option<Alert> {
        self.pelt.push(accuracy);
        let t = self.pelt.len();
        if self.alert.is_some() || t < self.config.min_history {
            return None;
        }
        let cp = self.pelt.last[t];
        if cp == 0 {
            return None;
        }
        let pre_mean = self.pelt.mean(self.pelt.last[cp], cp);
        let post_mean = self.pelt.mean(cp, t);
        if post_mean < pre_mean {
            self.alert = Some(Alert {
                day: t,
                boundary: cp + 1,
                pre_mean,
                post_mean,
            });
            return self.alert;
        }
        None
    }

    /// Forgets the history and any raised alert.
    pub fn reset(&mut self) {
        self.pelt = Pelt::new(self.config.penalty, self.config.min_segment);
        self.alert = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMode {
    Sudden,
    Gradual,
}

impl DriftMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriftMode::Sudden => "sudden",
            DriftMode::Gradual => "gradual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSimConfig {
    pub n_days_before: usize,
    pub n_days_after: usize,
    pub base_mean: f64,
    pub base_std: f64,
    pub drop_points: f64,
    pub mode: DriftMode,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for DriftSimConfig {
    fn default() -> Self {
        Self {
            n_days_before: 100,
            n_days_after: 100,
            base_mean: 0.85,
            base_std: 0.025,
            drop_points: 0.10,
            mode: DriftMode::Sudden,
            repetitions: 1000,
            seed: 2020,
        }
    }
}

impl DriftSimConfig {
    pub fn validate(&self) -> Result<(), DriftError> {
        let bad = |m: &str| Err(DriftError::InvalidConfig(m.into()));
        if self.n_days_before == 0 || self.n_days_after == 0 || self.repetitions == 0 {
            return bad("day counts and repetitions must be positive");
        }
        if !(self.base_std > 0.0 && self.base_mean > 0.0 && self.base_mean <= 1.0) {
            return bad("base mean must be in (0,1] and std positive");
        }
        if !(self.drop_points >= 0.0 && self.drop_points < self.base_mean) {
            return bad("drop must be nonnegative and below the base mean");
        }
        Ok(())
    }

    /// Mean of the generating distribution on 1-based `day`.
    pub fn mean_on_day(&self, day: usize) -> f64 {
        if day <= self.n_days_before {
            return self.base_mean;
        }
        match self.mode {
            DriftMode::Sudden => self.base_mean - self.drop_points,
            DriftMode::Gradual => {
                let i = (day - self.n_days_before) as f64;
                self.base_mean - self.drop_points * i / self.n_days_after as f64
            }
        }
    }
}

/// One simulated accuracy stream; deterministic per `(seed, rep_index)`.
pub fn simulate_series(config: &DriftSimConfig, rep_index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep_index as u64);
    let noise = Normal::new(0.0, config.base_std).expect("positive std");
    (1..=config.n_days_before + config.n_days_after)
        .map(|day| (config.mean_on_day(day) + noise.sample(&mut rng)).clamp(0.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub detected: bool,
    pub detection_time: Option<usize>,
    pub mean_accuracy_at_detection: Option<f64>,
}

/// Feeds one stream to a fresh detector. Days before the change are warm-up
/// history whenever `min_history` exceeds them.
pub fn detect_in_series(
    series: &[f64],
    sim: &DriftSimConfig,
    detector: &DetectorConfig,
) -> Result<DetectionOutcome, DriftError> {
    let mut det = OnlineDetector::new(*detector)?;
    for &x in series {
        if let Some(alert) = det.push(x) {
            let time = alert.day.saturating_sub(sim.n_days_before);
            return Ok(DetectionOutcome {
                detected: true,
                detection_time: Some(time),
                mean_accuracy_at_detection: Some(sim.mean_on_day(alert.day)),
            });
        }
    }
    Ok(DetectionOutcome {
        detected: false,
        detection_time: None,
        mean_accuracy_at_detection: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub mode: DriftMode,
    pub drop_points: f64,
    pub repetitions: usize,
    pub detection_rate: f64,
    pub min: Option<usize>,
    pub avg: Option<f64>,
    pub max: Option<usize>,
    pub stddev: Option<f64>,
    pub min_mean_accuracy: Option<f64>,
}

impl StudyRow {
    fn from_outcomes(sim: &DriftSimConfig, outcomes: &[DetectionOutcome]) -> Self {
        let times: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.detection_time)
            .map(|t| t as f64)
            .collect();
        let n = times.len();
        let (avg, stddev) = if n > 0 {
            let m = times.iter().sum::<f64>() / n as f64;
            let v = times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / n as f64;
            (Some(m), Some(v.sqrt()))
        } else {
            (None, None)
        };
        Self {
            mode: sim.mode,
            drop_points: sim.drop_points,
            repetitions: outcomes.len(),
            detection_rate: n as f64 / outcomes.len().max(1) as f64,
            min: outcomes.iter().filter_map(|o| o.detection_time).min(),
            avg,
            max: outcomes.iter().filter_map(|o| o.detection_time).max(),
            stddev,
            min_mean_accuracy: outcomes
                .iter()
                .filter_map(|o| o.mean_accuracy_at_detection)
                .min_by(f64::total_cmp),
        }
    }

    pub fn label(&self) -> String {
        format!("{}-point", (self.drop_points * 100.0).round() as i64)
    }
}

/// Runs every repetition of one cell in parallel.
pub fn run_cell(sim: &DriftSimConfig, detector: &DetectorConfig) -> Result<StudyRow, DriftError> {
    sim.validate()?;
    let outcomes = (0..sim.repetitions)
        .into_par_iter()
        .map(|rep| detect_in_series(&simulate_series(sim, rep), sim, detector))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StudyRow::from_outcomes(sim, &outcomes))
}

pub const STUDY_DROPS: [f64; 4] = [0.20, 0.15, 0.10, 0.05];

/// Both deterioration modes at every drop size, 20 points first.
pub fn run_simulation_study(
    base: &DriftSimConfig,
    detector: &DetectorConfig,
) -> Result<Vec<StudyRow>, DriftError> {
    let mut rows = Vec::new();
    for mode in [DriftMode::Sudden, DriftMode::Gradual] {
        for drop in STUDY_DROPS {
            let sim = DriftSimConfig {
                mode,
                drop_points: drop,
                ..*base
            };
            rows.push(run_cell(&sim, detector)?);
        }
    }
    Ok(rows)
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "mode",
        "deterioration",
        "detection_rate",
        "min",
        "avg",
        "max",
        "stddev",
        "min_mean_accuracy_at_detection",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.mode.as_str().to_owned(),
            r.label(),
            format!("{:.3}", r.detection_rate),
            opt(r.min.map(|v| v.to_string())),
            opt(r.avg.map(|v| format!("{v:.2}"))),
            opt(r.max.map(|v| v.to_string())),
            opt(r.stddev.map(|v| format!("{v:.2}"))),
            match r.mode {
                DriftMode::Gradual => opt(r.min_mean_accuracy.map(|v| format!("{v:.4}"))),
                DriftMode::Sudden => String::new(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_no_change_points() {
        let r = pelt_segment(&[0.85; 200], 0.05, 2).unwrap();
        assert!(r.change_points.is_empty());
        assert_eq!(r.segment_means.len(), 1);
        assert!(r.total_cost.abs() < 1e-12);
    }

    #[test]
    fn exact_step_is_found() {
        let mut s = vec![0.85; 100];
        s.extend([0.65; 100]);
        let r = pelt_segment(&s, 0.05, 2).unwrap();
        assert_eq!(r.change_points, vec![100]);
        assert!((r.segment_means[0] - 0.85).abs() < 1e-12);
        assert!((r.segment_means[1] - 0.65).abs() < 1e-12);
        assert!((r.total_cost - 0.05).abs() < 1e-12);
    }

    #[test]
    fn too_short_and_bad_config() {
        assert_eq!(
            pelt_segment(&[0.1, 0.2, 0.3], 0.05, 2),
            Err(DriftError::InsufficientData { len: 3, needed: 4 })
        );
        assert!(pelt_segment(&[0.1; 10], -1.0, 2).is_err());
        assert!(pelt_segment(&[0.1; 10], 0.1, 0).is_err());
    }

    #[test]
    fn min_segment_is_respected() {
        let s = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let r = pelt_segment(&s, 0.0, 2).unwrap();
        let mut edges = vec![0];
        edges.extend(&r.change_points);
        edges.push(s.len());
        assert!(edges.windows(2).all(|w| w[1] - w[0] >= 2));
    }

    #[test]
    fn improvement_does_not_alert() {
        let mut det = OnlineDetector::new(DetectorConfig::default()).unwrap();
        for d in 0..200 {
            let x = if d < 100 { 0.75 } else { 0.85 };
            assert!(det.push(x).is_none());
        }
        assert_eq!(det.change_points(), vec![100]);
    }

    #[test]
    fn alert_fires_once() {
        let mut det = OnlineDetector::new(DetectorConfig::default()).unwrap();
        let mut alerts = Vec::new();
        for d in 0..200 {
            let x = if d < 100 { 0.85 } else { 0.55 };
            alerts.extend(det.push(x));
        }
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].boundary, 101);
        assert!(alerts[0].post_mean < alerts[0].pre_mean);
        assert!(det.alert().is_some());
        det.reset();
        assert!(det.is_empty() && det.alert().is_none());
    }

    #[test]
    fn simulated_series_follow_schedule() {
        let sim = DriftSimConfig::default();
        assert_eq!(simulate_series(&sim, 3), simulate_series(&sim, 3));
        assert_ne!(simulate_series(&sim, 3), simulate_series(&sim, 4));
        let g = DriftSimConfig {
            mode: DriftMode::Gradual,
            ..sim
        };
        assert!((g.mean_on_day(150) - 0.80).abs() < 1e-12);
        assert!((g.mean_on_day(200) - 0.75).abs() < 1e-12);
        let s = simulate_series(&sim, 0);
        let after = s[100..].iter().sum::<f64>() / 100.0;
        assert!((after - 0.75).abs() < 0.01);
    }

    #[test]
    fn csv_has_study_columns() {
        let sim = DriftSimConfig {
            repetitions: 20,
            ..DriftSimConfig::default()
        };
        let rows = vec![run_cell(&sim, &DetectorConfig::simulation()).unwrap()];
        let mut buf = Vec::new();
        write_study_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode,deterioration,detection_rate,min,avg,max,stddev"));
        assert!(text.contains("sudden,10-point"));
    }
}
