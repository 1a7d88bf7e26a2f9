//! Append-only verdict log. Every state change is one JSON line; corrections
//! are tombstones, never rewrites, so replaying the file rebuilds the state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{agreement_from_pairs, AgreementStats, TriageVerdict, VerdictCategory};
use crate::record::EvaluationRecord;

pub const VERDICT_LOG: &str = "verdicts.jsonl";
const LOCK_FILE: &str = "triage.lock";

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("reviewer {reviewer_id} already has verdict {existing_id} on {record_id}")]
    Conflict {
        record_id: String,
        reviewer_id: String,
        existing_id: u64,
    },
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown reviewer {0}")]
    UnknownReviewer(String),
    #[error("unknown verdict {0}")]
    UnknownVerdict(u64),
    #[error("campaign is sealed")]
    CampaignSealed,
    #[error("{0} records are disputed; seal needs an override")]
    OpenDisagreements(usize),
    #[error("store {0} is locked by another process")]
    StoreLocked(PathBuf),
    #[error("corrupt verdict log at line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
    #[error("verdict log io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TriageEvent {
    Verdict {
        id: u64,
        verdict: TriageVerdict,
    },
    Tombstone {
        verdict_id: u64,
        reason: String,
        timestamp: DateTime<Utc>,
    },
    Seal {
        #[serde(rename = "override")]
        override_disputes: bool,
        timestamp: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Reviewed,
    Disputed,
}

impl std::str::FromStr for ReviewStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "reviewed" => Ok(ReviewStatus::Reviewed),
            "disputed" => Ok(ReviewStatus::Disputed),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoredVerdict {
    pub id: u64,
    #[serde(flatten)]
    pub verdict: TriageVerdict,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SealInfo {
    pub timestamp: DateTime<Utc>,
    #[serde(rename = "override")]
    pub override_disputes: bool,
}

/// State rebuilt from the log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriageState {
    /// Active verdicts per record id, in submission order.
    pub verdicts: BTreeMap<String, Vec<StoredVerdict>>,
    pub retracted: BTreeSet<u64>,
    pub next_id: u64,
    pub sealed: Option<SealInfo>,
}

impl TriageState {
    fn apply(&mut self, event: &TriageEvent) -> Result<(), String> {
        match event {
            TriageEvent::Verdict { id, verdict } => {
                let list = self.verdicts.entry(verdict.record_id()).or_default();
                if list.iter().any(|v| v.verdict.reviewer_id == verdict.reviewer_id) {
                    return Err(format!("duplicate verdict {id}"));
                }
                list.push(StoredVerdict {
                    id: *id,
                    verdict: verdict.clone(),
                    correct: verdict.category.is_correct(),
                });
                self.next_id = self.next_id.max(id + 1);
            }
            TriageEvent::Tombstone { verdict_id, .. } => {
                let mut found = false;
                for list in self.verdicts.values_mut() {
                    let before = list.len();
                    list.retain(|v| v.id != *verdict_id);
                    found |= list.len() != before;
                }
                if !found {
                    return Err(format!("tombstone for unknown verdict {verdict_id}"));
                }
                self.verdicts.retain(|_, l| !l.is_empty());
                self.retracted.insert(*verdict_id);
            }
            TriageEvent::Seal {
                override_disputes,
                timestamp,
            } => {
                self.sealed = Some(SealInfo {
                    timestamp: *timestamp,
                    override_disputes: *override_disputes,
                });
            }
        }
        Ok(())
    }

    pub fn replay(events: &[TriageEvent]) -> Result<TriageState, String> {
        let mut s = TriageState::default();
        for e in events {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn verdicts_for(&self, record_id: &str) -> &[StoredVerdict] {
        self.verdicts.get(record_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn status(&self, record_id: &str, required_reviewers: usize) -> ReviewStatus {
        let vs = self.verdicts_for(record_id);
        let agree = vs.windows(2).all(|w| w[0].verdict.category == w[1].verdict.category);
        if vs.len() >= 2 && !agree {
            ReviewStatus::Disputed
        } else if vs.len() >= required_reviewers.max(1) {
            ReviewStatus::Reviewed
        } else {
            ReviewStatus::Pending
        }
    }

    /// The agreed category, once reviewers are done and concur.
    pub fn consensus(&self, record_id: &str, required_reviewers: usize) -> Option<VerdictCategory> {
        (self.status(record_id, required_reviewers) == ReviewStatus::Reviewed)
            .then(|| self.verdicts_for(record_id)[0].verdict.category)
    }

    pub fn agreement(&self) -> AgreementStats {
        let pairs: Vec<_> = self
            .verdicts
            .values()
            .filter(|l| l.len() == 2)
            .map(|l| {
                let mut l = l.clone();
                l.sort_by(|a, b| a.verdict.reviewer_id.cmp(&b.verdict.reviewer_id));
                (l[0].verdict.category, l[1].verdict.category)
            })
            .collect();
        agreement_from_pairs(&pairs)
    }
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub reviewers: BTreeSet<String>,
    pub required_reviewers: usize,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            reviewers: BTreeSet::new(),
            required_reviewers: 2,
        }
    }
}

struct Writer {
    file: File,
}

pub struct TriageStore {
    dir: PathBuf,
    records: BTreeMap<String, EvaluationRecord>,
    options: StoreOptions,
    state: RwLock<Arc<TriageState>>,
    writer: Mutex<Writer>,
    // Held for the store's lifetime; the flock goes with the descriptor.
    _lock: File,
}

/// Reads a verdict log. A torn final line (crash mid-append) is dropped and
/// its byte offset returned so the caller can truncate it.
pub fn read_log(path: &Path) -> Result<(Vec<TriageEvent>, Option<u64>), TriageError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), None)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            return Ok((events, None));
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        if buf.trim().is_empty() {
            offset += n as u64;
            continue;
        }
        // Lines are written with their newline in one call, so a missing
        // newline means the append never finished.
        if !complete {
            return Ok((events, Some(offset)));
        }
        match serde_json::from_str::<TriageEvent>(buf.trim_end()) {
            Ok(e) => events.push(e),
            Err(e) => {
                return Err(TriageError::Corrupt {
                    line: line_no,
                    detail: e.to_string(),
                })
            }
        }
        offset += n as u64;
    }
}

fn try_flock(file: &File) -> bool {
    // SAFETY: plain syscall on a descriptor we own.
    unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) == 0 }
}

impl TriageStore {
    /// Opens (or creates) the verdict log in `dir` for the given records.
    /// An empty reviewer set accepts any reviewer id.
    pub fn open(dir: &Path, records: Vec<EvaluationRecord>, options: StoreOptions) -> Result<TriageStore, TriageError> {
        std::fs::create_dir_all(dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        if !try_flock(&lock) {
            return Err(TriageError::StoreLocked(dir.to_path_buf()));
        }
        let path = dir.join(VERDICT_LOG);
        let (events, torn) = read_log(&path)?;
        let state = TriageState::replay(&events).map_err(|detail| TriageError::Corrupt { line: 0, detail })?;
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        if let Some(at) = torn {
            tracing::warn!(offset = at, "dropping torn final line of verdict log");
            file.set_len(at)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok(TriageStore {
            dir: dir.to_path_buf(),
            records: records.into_iter().map(|r| (r.id(), r)).collect(),
            options,
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(Writer { file }),
            _lock: lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn options(&self) -> &StoreOptions {
        &self.options
    }

    pub fn records(&self) -> &BTreeMap<String, EvaluationRecord> {
        &self.records
    }

    pub fn snapshot(&self) -> Arc<TriageState> {
        self.state.read().expect("state lock").clone()
    }

    pub fn status(&self, record_id: &str) -> ReviewStatus {
        self.snapshot().status(record_id, self.options.required_reviewers)
    }

    /// Appends one event and publishes the new state. Only one writer runs
    /// at a time; readers keep their snapshot.
    fn commit<F>(&self, build: F) -> Result<TriageEvent, TriageError>
    where
        F: FnOnce(&TriageState) -> Result<TriageEvent, TriageError>,
    {
        let mut w = self.writer.lock().expect("writer lock");
        let current = self.snapshot();
        let event = build(&current)?;
        let mut next = (*current).clone();
        next.apply(&event).map_err(|detail| TriageError::Corrupt { line: 0, detail })?;
        let mut line = serde_json::to_string(&event).expect("event serializes");
        line.push('\n');
        w.file.write_all(line.as_bytes())?;
        w.file.sync_data()?;
        *self.state.write().expect("state lock") = Arc::new(next);
        Ok(event)
    }

    pub fn record_verdict(&self, verdict: TriageVerdict) -> Result<u64, TriageError> {
        let record_id = verdict.record_id();
        if !self.records.contains_key(&record_id) {
            return Err(TriageError::UnknownTask(record_id));
        }
        if !self.options.reviewers.is_empty() && !self.options.reviewers.contains(&verdict.reviewer_id) {
            return Err(TriageError::UnknownReviewer(verdict.reviewer_id));
        }
        let event = self.commit(|s| {
            if s.sealed.is_some() {
                return Err(TriageError::CampaignSealed);
            }
            if let Some(v) = s
                .verdicts_for(&record_id)
                .iter()
                .find(|v| v.verdict.reviewer_id == verdict.reviewer_id)
            {
                return Err(TriageError::Conflict {
                    record_id: record_id.clone(),
                    reviewer_id: verdict.reviewer_id.clone(),
                    existing_id: v.id,
                });
            }
            Ok(TriageEvent::Verdict {
                id: s.next_id,
                verdict,
            })
        })?;
        match event {
            TriageEvent::Verdict { id, .. } => Ok(id),
            _ => unreachable!(),
        }
    }

    /// Withdraws a verdict so its reviewer can submit a corrected one.
    pub fn retract(&self, verdict_id: u64, reason: &str) -> Result<(), TriageError> {
        self.commit(|s| {
            if s.sealed.is_some() {
                return Err(TriageError::CampaignSealed);
            }
            if !s.verdicts.values().flatten().any(|v| v.id == verdict_id) {
                return Err(TriageError::UnknownVerdict(verdict_id));
            }
            Ok(TriageEvent::Tombstone {
                verdict_id,
                reason: reason.to_string(),
                timestamp: Utc::now(),
            })
        })?;
        Ok(())
    }

    pub fn disputed(&self) -> Vec<String> {
        let s = self.snapshot();
        s.verdicts
            .keys()
            .filter(|id| s.status(id, self.options.required_reviewers) == ReviewStatus::Disputed)
            .cloned()
            .collect()
    }

    pub fn seal(&self, override_disputes: bool) -> Result<SealInfo, TriageError> {
        let disputed = self.disputed().len();
        self.commit(|s| {
            if s.sealed.is_some() {
                return Err(TriageError::CampaignSealed);
            }
            if disputed > 0 && !override_disputes {
                return Err(TriageError::OpenDisagreements(disputed));
            }
            Ok(TriageEvent::Seal {
                override_disputes,
                timestamp: Utc::now(),
            })
        })?;
        Ok(self.snapshot().sealed.clone().expect("just sealed"))
    }

    /// Final category per record once sealed. Records still pending or
    /// disputed at seal time have none.
    pub fn sealed_verdicts(&self) -> Option<BTreeMap<String, VerdictCategory>> {
        let s = self.snapshot();
        s.sealed.as_ref()?;
        Some(
            self.records
                .keys()
                .filter_map(|id| s.consensus(id, self.options.required_reviewers).map(|c| (id.clone(), c)))
                .collect(),
        )
    }

    pub fn agreement(&self) -> AgreementStats {
        self.snapshot().agreement()
    }
}
