//! Synthetic issue-report corpora with known structure: disjoint per-team
//! keyword sets, optional label noise, and month-by-month vocabulary drift.

use chrono::Duration;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{IssueReport, Status, TeamId, YearMonth};

/// Letters-only word for an integer id, so the tokenizer keeps it whole.
pub fn word(id: usize) -> String {
    let mut n = id;
    let mut out = vec![b'w'];
    loop {
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    String::from_utf8(out).expect("ascii")
}

pub fn team_name(class: usize) -> TeamId {
    TeamId::new(format!("TEAM_{}", (b'A' + (class % 26) as u8) as char)).expect("non-empty")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordCorpusConfig {
    pub n_classes: usize,
    pub docs_per_class: usize,
    pub keywords_per_class: usize,
    pub shared_words: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a word is drawn from the team's own keywords.
    pub keyword_rate: f64,
    /// Fraction of reports whose closing team is replaced by another team.
    pub label_noise: f64,
    pub start: YearMonth,
    pub seed: u64,
}

impl Default for KeywordCorpusConfig {
    fn default() -> Self {
        Self {
            n_classes: 6,
            docs_per_class: 100,
            keywords_per_class: 25,
            shared_words: 60,
            min_words: 6,
            max_words: 16,
            keyword_rate: 0.3,
            label_noise: 0.0,
            start: YearMonth::new(2017, 1).expect("valid month"),
            seed: 7,
        }
    }
}

/// A generated corpus together with the labels before noise was applied.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub reports: Vec<IssueReport>,
    pub clean_labels: Vec<TeamId>,
}

fn make_report(
    id: String,
    words: &[String],
    team: TeamId,
    opened: chrono::DateTime<chrono::Utc>,
    hours: i64,
) -> IssueReport {
    let split = words.len().min(3);
    IssueReport {
        id,
        summary: words[..split].join(" "),
        description: words[split..].join(" "),
        opened_at: opened,
        closed_at: Some(opened + Duration::hours(hours)),
        initial_team: Some(team.clone()),
        closing_team: Some(team),
        status: Status::Closed,
    }
}

fn noisy(rng: &mut ChaCha8Rng, class: usize, n_classes: usize, rate: f64) -> usize {
    if n_classes > 1 && rng.random_bool(rate) {
        (class + rng.random_range(1..n_classes)) % n_classes
    } else {
        class
    }
}

fn draw_doc(
    rng: &mut ChaCha8Rng,
    own: &[String],
    shared: &[String],
    len: usize,
    keyword_rate: f64,
) -> Vec<String> {
    (0..len)
        .map(|_| {
            let pool = if shared.is_empty() || rng.random_bool(keyword_rate) {
                own
            } else {
                shared
            };
            pool.choose(rng).expect("non-empty pool").clone()
        })
        .collect()
}

/// Reports interleaved by class, all opened within `config.start`.
pub fn keyword_corpus(config: &KeywordCorpusConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.n_classes;
    let k = config.keywords_per_class.max(1);
    let keywords: Vec<Vec<String>> = (0..c)
        .map(|cl| (0..k).map(|i| word(cl * k + i)).collect())
        .collect();
    let shared: Vec<String> = (0..config.shared_words).map(|i| word(c * k + i)).collect();
    let base = config.start.first_instant();
    let total = c * config.docs_per_class;
    let mut reports = Vec::with_capacity(total);
    let mut clean = Vec::with_capacity(total);
    for i in 0..total {
        let class = i % c;
        let len = rng.random_range(config.min_words..=config.max_words.max(config.min_words));
        let words = draw_doc(
            &mut rng,
            &keywords[class],
            &shared,
            len,
            config.keyword_rate,
        );
        let label = noisy(&mut rng, class, c, config.label_noise);
        let opened = base + Duration::minutes((i as i64 * 27 * 24 * 60) / total as i64);
        let hours = rng.random_range(1..96);
        reports.push(make_report(
            format!("KW-{i}"),
            &words,
            team_name(label),
            opened,
            hours,
        ));
        clean.push(team_name(class));
    }
    SyntheticCorpus {
        reports,
        clean_labels: clean,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftingCorpusConfig {
    pub n_classes: usize,
    pub months: usize,
    pub docs_per_class_per_month: usize,
    /// Size of each team's active keyword window.
    pub active_keywords: usize,
    /// Fraction of the window replaced by fresh words each month.
    pub rotation: f64,
    pub shared_words: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub keyword_rate: f64,
    pub label_noise: f64,
    pub start: YearMonth,
    pub seed: u64,
}

impl Default for DriftingCorpusConfig {
    fn default() -> Self {
        Self {
            n_classes: 6,
            months: 13,
            docs_per_class_per_month: 12,
            active_keywords: 30,
            rotation: 0.2,
            shared_words: 60,
            min_words: 5,
            max_words: 12,
            keyword_rate: 0.35,
            label_noise: 0.0,
            start: YearMonth::new(2017, 1).expect("valid month"),
            seed: 11,
        }
    }
}

/// Month `m` draws team keywords from a window that has slid `m * rotation`
/// of its width along a team-specific word sequence, so consecutive months
/// share `1 - rotation` of their vocabulary and distant months share none.
pub fn drifting_corpus(config: &DriftingCorpusConfig) -> Vec<IssueReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.n_classes;
    let w = config.active_keywords.max(1);
    let step = ((w as f64 * config.rotation).round() as usize).max(1);
    let seq_len = w + step * config.months;
    let sequences: Vec<Vec<String>> = (0..c)
        .map(|cl| (0..seq_len).map(|i| word(cl * seq_len + i)).collect())
        .collect();
    let shared: Vec<String> = (0..config.shared_words)
        .map(|i| word(c * seq_len + i))
        .collect();
    let mut reports = Vec::new();
    for m in 0..config.months {
        let month = config.start.offset(m as i64);
        let base = month.first_instant();
        let n = c * config.docs_per_class_per_month;
        for i in 0..n {
            let class = i % c;
            let active = &sequences[class][m * step..m * step + w];
            let len = rng.random_range(config.min_words..=config.max_words.max(config.min_words));
            let words = draw_doc(&mut rng, active, &shared, len, config.keyword_rate);
            let label = noisy(&mut rng, class, c, config.label_noise);
            // spread over the first 27 days so no report leaves its month
            let opened = base + Duration::minutes((i as i64 * 27 * 24 * 60) / n as i64);
            let hours = rng.random_range(1..96);
            reports.push(make_report(
                format!("DR-{m}-{i}"),
                &words,
                team_name(label),
                opened,
                hours,
            ));
        }
    }
    reports
}
