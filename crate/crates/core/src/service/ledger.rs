//! Assignment records and their append-only JSON Lines event log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::corpus::TeamId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub report_id: String,
    pub opened_at: DateTime<Utc>,
    pub predicted_team: TeamId,
    pub predicted_at: DateTime<Utc>,
    pub model_fingerprint: String,
    pub final_team: Option<TeamId>,
    pub closed_at: Option<DateTime<Utc>>,
}

impl AssignmentRecord {
    /// `None` until the report is closed.
    pub fn correct(&self) -> Option<bool> {
        self.final_team.as_ref().map(|t| *t == self.predicted_team)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerEvent {
    Assigned(AssignmentRecord),
    Closed {
        report_id: String,
        final_team: TeamId,
        closed_at: DateTime<Utc>,
    },
}

/// In-memory record table rebuilt from, and mirrored to, the event log.
#[derive(Debug, Default)]
pub struct Ledger {
    records: BTreeMap<String, AssignmentRecord>,
    log: Option<(PathBuf, BufWriter<File>)>,
}

impl Ledger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays an existing log, then appends to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_owned();
        let mut ledger = if path.exists() {
            Self::load(&path)?
        } else {
            Self::default()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::io(&path, e))?;
        ledger.log = Some((path, BufWriter::new(file)));
        Ok(ledger)
    }

    /// Read-only replay of a log; unreadable lines are skipped with a warning.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let mut ledger = Self::default();
        let file = File::open(path).map_err(|e| ServiceError::io(path, e))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ServiceError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LedgerEvent>(&line) {
                Ok(ev) => {
                    ledger.apply(ev)?;
                }
                Err(e) => log::warn!(
                    "{}:{}: skipping unreadable event: {e}",
                    path.display(),
                    i + 1
                ),
            }
        }
        Ok(ledger)
    }

    pub fn replay<I: IntoIterator<Item = LedgerEvent>>(events: I) -> Result<Self, ServiceError> {
        let mut ledger = Self::default();
        for ev in events {
            ledger.apply(ev)?;
        }
        Ok(ledger)
    }

    fn apply(&mut self, event: LedgerEvent) -> Result<&AssignmentRecord, ServiceError> {
        match event {
            LedgerEvent::Assigned(rec) => {
                if self.records.contains_key(&rec.report_id) {
                    return Err(ServiceError::Conflict(format!(
                        "report {} is already assigned",
                        rec.report_id
                    )));
                }
                let id = rec.report_id.clone();
                Ok(self.records.entry(id).or_insert(rec))
            }
            LedgerEvent::Closed {
                report_id,
                final_team,
                closed_at,
            } => {
                let rec = self.records.get_mut(&report_id).ok_or_else(|| {
                    ServiceError::NotFound(format!("no assignment for report {report_id}"))
                })?;
                if rec.final_team.is_some() {
                    return Err(ServiceError::Conflict(format!(
                        "report {report_id} is already closed"
                    )));
                }
                rec.final_team = Some(final_team);
                rec.closed_at = Some(closed_at);
                Ok(rec)
            }
        }
    }

    /// Validates and applies the event, then appends it to the log.
    pub fn record(&mut self, event: LedgerEvent) -> Result<AssignmentRecord, ServiceError> {
        let line = serde_json::to_string(&event).expect("event serializes");
        let rec = self.apply(event)?.clone();
        if let Some((path, w)) = &mut self.log {
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|e| ServiceError::io(path, e))?;
        }
        Ok(rec)
    }

    pub fn get(&self, report_id: &str) -> Option<&AssignmentRecord> {
        self.records.get(report_id)
    }

    pub fn contains(&self, report_id: &str) -> bool {
        self.records.contains_key(report_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &AssignmentRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn assigned(id: &str, team: &str) -> LedgerEvent {
        let t = Utc.with_ymd_and_hms(2018, 1, 2, 3, 4, 5).unwrap();
        LedgerEvent::Assigned(AssignmentRecord {
            report_id: id.into(),
            opened_at: t,
            predicted_team: TeamId::new(team).unwrap(),
            predicted_at: t,
            model_fingerprint: "m".into(),
            final_team: None,
            closed_at: None,
        })
    }

    fn closed(id: &str, team: &str) -> LedgerEvent {
        LedgerEvent::Closed {
            report_id: id.into(),
            final_team: TeamId::new(team).unwrap(),
            closed_at: Utc.with_ymd_and_hms(2018, 1, 9, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn set_once_and_correctness() {
        let mut l = Ledger::in_memory();
        l.record(assigned("A", "T1")).unwrap();
        l.record(assigned("B", "T1")).unwrap();
        assert!(matches!(
            l.record(assigned("A", "T2")),
            Err(ServiceError::Conflict(_))
        ));
        assert_eq!(l.record(closed("A", "T1")).unwrap().correct(), Some(true));
        assert_eq!(l.record(closed("B", "T2")).unwrap().correct(), Some(false));
        assert!(matches!(
            l.record(closed("A", "T1")),
            Err(ServiceError::Conflict(_))
        ));
        assert!(matches!(
            l.record(closed("Z", "T1")),
            Err(ServiceError::NotFound(_))
        ));
    }

    #[test]
    fn log_replays_to_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assignments.jsonl");
        {
            let mut l = Ledger::open(&path).unwrap();
            l.record(assigned("A", "T1")).unwrap();
            l.record(assigned("B", "T2")).unwrap();
            l.record(closed("B", "T1")).unwrap();
            let _ = l.record(closed("B", "T1"));
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"event\":\"assigned\""));
        let l = Ledger::open(&path).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.get("B").unwrap().correct(), Some(false));
        assert_eq!(l.get("A").unwrap().correct(), None);
    }
}
