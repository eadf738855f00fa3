//! Issue-report corpus: loading, validation, filtering and calendar slicing.
//!
//! The on-disk format is JSON Lines with one [`IssueReport`] per line.
//! Timestamps are RFC 3339 strings in UTC.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate report id {0:?}")]
    DuplicateId(String),
    #[error("report {0:?} is not closed")]
    PreconditionViolation(String),
    #[error("invalid month range {start}..{end}")]
    InvalidRange { start: YearMonth, end: YearMonth },
    #[error("invalid team id: {0}")]
    InvalidTeam(String),
    #[error("invalid report {id:?}: {reason}")]
    InvalidReport { id: String, reason: String },
    #[error("invalid month {0:?}, expected YYYY-MM")]
    InvalidMonth(String),
}

/// A development team. Names are trimmed, non-empty and compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TeamId(String);

impl TeamId {
    pub fn new(name: impl AsRef<str>) -> Result<Self, CorpusError> {
        let trimmed = name.as_ref().trim();
        if trimmed.is_empty() {
            return Err(CorpusError::InvalidTeam("empty team name".into()));
        }
        Ok(Self(trimmed.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TeamId {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TeamId> for String {
    fn from(value: TeamId) -> Self {
        value.0
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TeamId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Closed,
}

/// One filed issue. The latest status in the file is authoritative, so a
/// report that was reopened and is still open carries `status: open`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub id: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub description: String,
    pub opened_at: DateTime<Utc>,
    #[serde(default)]
    pub closed_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub initial_team: Option<TeamId>,
    #[serde(default)]
    pub closing_team: Option<TeamId>,
    pub status: Status,
}

impl IssueReport {
    /// Checks the structural invariants of a report.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: &str| CorpusError::InvalidReport {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id"));
        }
        let closed_fields = self.closed_at.is_some() && self.closing_team.is_some();
        match self.status {
            Status::Closed if !closed_fields => {
                return Err(invalid("closed report without closed_at and closing_team"))
            }
            Status::Open if self.closed_at.is_some() || self.closing_team.is_some() => {
                return Err(invalid("open report carries closing fields"))
            }
            _ => {}
        }
        if let Some(closed) = self.closed_at {
            if closed < self.opened_at {
                return Err(invalid("closed_at precedes opened_at"));
            }
        }
        if self.summary.trim().is_empty() && self.description.trim().is_empty() {
            return Err(invalid("summary and description are both empty"));
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.status == Status::Closed
    }

    pub fn opened_month(&self) -> YearMonth {
        YearMonth::of(&self.opened_at)
    }
}

/// A calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, CorpusError> {
        if !(1..=12).contains(&month) {
            return Err(CorpusError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn of(ts: &DateTime<Utc>) -> Self {
        Self {
            year: ts.year(),
            month: ts.month(),
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Months counted from year 0, used for offsets and distances.
    fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn offset(&self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Number of months from `self` to `other` (positive when `other` is later).
    pub fn months_until(&self, other: &YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }

    pub fn first_instant(&self) -> DateTime<Utc> {
        let date = NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month");
        Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"))
    }

    /// Inclusive range of months from `start` to `end`.
    pub fn range(start: YearMonth, end: YearMonth) -> impl Iterator<Item = YearMonth> {
        (start.ordinal()..=end.ordinal()).map(YearMonth::from_ordinal)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidMonth(s.to_owned());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let digits = |p: &str, n: usize| p.len() == n && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(y, 4) || !digits(m, 2) {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for YearMonth {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<YearMonth> for String {
    fn from(value: YearMonth) -> Self {
        value.to_string()
    }
}

/// Reports opened within an inclusive month range, ascending by `opened_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSlice {
    pub reports: Vec<IssueReport>,
    pub span: (YearMonth, YearMonth),
}

impl CorpusSlice {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

/// A skipped input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub reports: Vec<IssueReport>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Loads a corpus file. Malformed or invalid lines are skipped and reported
/// with their 1-based line number; a duplicate id aborts the load.
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)).map_err(|e| match e {
            ReadError::Io(source) => io_err(source),
            ReadError::Corpus(e) => e,
        }),
    }
}

enum ReadError {
    Io(std::io::Error),
    Corpus(CorpusError),
}

fn read_jsonl(reader: impl BufRead) -> Result<LoadedCorpus, ReadError> {
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(ReadError::Io)?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<IssueReport>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r).map_err(|e| e.to_string()));
        match parsed {
            Ok(report) => {
                if !seen.insert(report.id.clone()) {
                    return Err(ReadError::Corpus(CorpusError::DuplicateId(report.id)));
                }
                out.reports.push(report);
            }
            Err(message) => out.diagnostics.push(LineDiagnostic {
                line: lineno,
                message,
            }),
        }
    }
    Ok(out)
}

/// Parses JSON Lines from memory with the same rules as [`load_corpus`].
pub fn parse_jsonl(text: &str) -> Result<LoadedCorpus, CorpusError> {
    read_jsonl(text.as_bytes()).map_err(|e| match e {
        ReadError::Io(source) => CorpusError::Io {
            path: PathBuf::from("<memory>"),
            source,
        },
        ReadError::Corpus(e) => e,
    })
}

pub fn write_jsonl(reports: &[IssueReport], mut out: impl Write) -> std::io::Result<()> {
    for report in reports {
        serde_json::to_writer(&mut out, report)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_corpus(reports: &[IssueReport], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_jsonl(reports, BufWriter::new(file)).map_err(io_err)
}

pub fn filter_closed(reports: &[IssueReport]) -> Vec<IssueReport> {
    reports.iter().filter(|r| r.is_closed()).cloned().collect()
}

/// The team that closed the report is the assignment ground truth.
pub fn ground_truth(report: &IssueReport) -> Result<&TeamId, CorpusError> {
    match (&report.status, &report.closing_team) {
        (Status::Closed, Some(team)) => Ok(team),
        _ => Err(CorpusError::PreconditionViolation(report.id.clone())),
    }
}

pub fn month_slice(
    reports: &[IssueReport],
    start: YearMonth,
    end: YearMonth,
) -> Result<CorpusSlice, CorpusError> {
    if start > end {
        return Err(CorpusError::InvalidRange { start, end });
    }
    let mut selected: Vec<IssueReport> = reports
        .iter()
        .filter(|r| {
            let m = r.opened_month();
            start <= m && m <= end
        })
        .cloned()
        .collect();
    // stable: equal timestamps keep file order
    selected.sort_by_key(|r| r.opened_at);
    Ok(CorpusSlice {
        reports: selected,
        span: (start, end),
    })
}

/// First and last opening month present in `reports`.
pub fn month_span(reports: &[IssueReport]) -> Option<(YearMonth, YearMonth)> {
    let first = reports.iter().map(IssueReport::opened_month).min()?;
    let last = reports.iter().map(IssueReport::opened_month).max()?;
    Some((first, last))
}
