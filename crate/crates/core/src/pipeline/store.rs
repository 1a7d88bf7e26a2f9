//! On-disk run store.
//!
//! ```text
//! <store>/tasks.jsonl            tasks to evaluate, one per line
//! <store>/records.jsonl          evaluation records, appended as they finish
//! <store>/raw/<provider>/<task>.txt   provider output, verbatim
//! <store>/baselines/<key>.json   analyzed human trees, shared across providers
//! <store>/index.json             derived summary, rewritten after each run
//! <store>/verdicts.jsonl         triage log (owned by the triage store)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::miner::CommitTask;
use crate::record::{EvaluationRecord, SCHEMA_VERSION};

pub const RECORDS: &str = "records.jsonl";
pub const TASKS: &str = "tasks.jsonl";
pub const INDEX: &str = "index.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{file} line {line}: {detail}")]
    StoreCorrupt { file: PathBuf, line: usize, detail: String },
    #[error("store io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a JSON-lines file. A final line without its newline is an
/// interrupted append: it is cut off the file and ignored.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut offset = 0u64;
    let mut line = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            return Ok(out);
        }
        line += 1;
        if !buf.ends_with('\n') {
            tracing::warn!(file = %path.display(), line, "truncating interrupted final line");
            OpenOptions::new()
                .write(true)
                .open(path)
                .and_then(|f| f.set_len(offset))
                .map_err(io_err(path))?;
            return Ok(out);
        }
        offset += n as u64;
        if buf.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(buf.trim_end()).map_err(|e| StoreError::StoreCorrupt {
            file: path.to_path_buf(),
            line,
            detail: e.to_string(),
        })?;
        out.push(v);
    }
}

fn append_line(file: &mut File, value: &impl Serialize) -> std::io::Result<()> {
    let mut line = serde_json::to_string(value).expect("serializable");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub schema_version: u32,
    pub campaign: String,
    pub records: usize,
    pub tasks: usize,
    pub providers: Vec<String>,
    pub infrastructure_failures: Vec<String>,
    /// sha256 over canonical records sorted by id.
    pub digest: String,
}

pub struct RunStore {
    root: PathBuf,
    appender: Mutex<File>,
    completed: Mutex<BTreeSet<String>>,
}

impl RunStore {
    /// Opens or creates the store and loads the ids of finished records.
    pub fn open(root: &Path) -> Result<RunStore, StoreError> {
        std::fs::create_dir_all(root.join("raw")).map_err(io_err(root))?;
        let records: Vec<EvaluationRecord> = Self::load_records_at(root)?;
        let path = root.join(RECORDS);
        let appender = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(RunStore {
            root: root.to_path_buf(),
            appender: Mutex::new(appender),
            completed: Mutex::new(records.iter().map(EvaluationRecord::id).collect()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Records of the store at `root` without opening it for writing.
    pub fn load_records_at(root: &Path) -> Result<Vec<EvaluationRecord>, StoreError> {
        let path = root.join(RECORDS);
        let raw: Vec<serde_json::Value> = read_jsonl(&path)?;
        let mut out = Vec::with_capacity(raw.len());
        let mut seen = BTreeSet::new();
        for (i, v) in raw.into_iter().enumerate() {
            let corrupt = |detail: String| StoreError::StoreCorrupt {
                file: path.clone(),
                line: i + 1,
                detail,
            };
            match v.get("schema_version").and_then(|s| s.as_u64()) {
                Some(n) if n == SCHEMA_VERSION as u64 => {}
                other => return Err(corrupt(format!("unsupported schema_version {other:?}"))),
            }
            let r: EvaluationRecord = serde_json::from_value(v).map_err(|e| corrupt(e.to_string()))?;
            if !seen.insert(r.id()) {
                return Err(corrupt(format!("duplicate record {}", r.id())));
            }
            out.push(r);
        }
        Ok(out)
    }

    pub fn load_records(&self) -> Result<Vec<EvaluationRecord>, StoreError> {
        Self::load_records_at(&self.root)
    }

    pub fn is_complete(&self, record_id: &str) -> bool {
        self.completed.lock().expect("completed set").contains(record_id)
    }

    pub fn completed(&self) -> BTreeSet<String> {
        self.completed.lock().expect("completed set").clone()
    }

    /// The only writer of `records.jsonl`.
    pub fn append(&self, record: &EvaluationRecord) -> Result<(), StoreError> {
        let id = record.id();
        let mut f = self.appender.lock().expect("appender");
        if self.completed.lock().expect("completed set").contains(&id) {
            tracing::warn!(record = %id, "record already stored, not appending again");
            return Ok(());
        }
        append_line(&mut f, record).map_err(io_err(&self.root.join(RECORDS)))?;
        self.completed.lock().expect("completed set").insert(id);
        Ok(())
    }

    pub fn raw_path(&self, provider_id: &str, task_id: &str) -> (PathBuf, String) {
        let rel = format!("raw/{provider_id}/{task_id}.txt");
        (self.root.join(&rel), rel)
    }

    pub fn write_raw(&self, provider_id: &str, task_id: &str, text: &str) -> Result<String, StoreError> {
        let (abs, rel) = self.raw_path(provider_id, task_id);
        if let Some(dir) = abs.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        write_atomic(&abs, text.as_bytes())?;
        Ok(rel)
    }

    pub fn read_raw(&self, rel: &str) -> Result<String, StoreError> {
        let p = self.root.join(rel);
        std::fs::read_to_string(&p).map_err(io_err(&p))
    }

    pub fn load_tasks(&self) -> Result<Vec<CommitTask>, StoreError> {
        read_jsonl(&self.root.join(TASKS))
    }

    /// Adds tasks not yet present (by task id). Returns how many were new.
    pub fn add_tasks(&self, tasks: &[CommitTask]) -> Result<usize, StoreError> {
        let path = self.root.join(TASKS);
        let known: BTreeSet<String> = self.load_tasks()?.into_iter().map(|t| t.task_id).collect();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut added = 0;
        let mut seen = known;
        for t in tasks {
            if seen.insert(t.task_id.clone()) {
                append_line(&mut f, t).map_err(io_err(&path))?;
                added += 1;
            }
        }
        Ok(added)
    }

    /// Rewrites `records.jsonl` sorted by id so that equal campaigns give
    /// equal files. Done through a rename; a crash leaves either version.
    pub fn compact(&self) -> Result<(), StoreError> {
        let mut appender = self.appender.lock().expect("appender");
        let mut records = self.load_records()?;
        records.sort_by_key(EvaluationRecord::id);
        let mut bytes = Vec::new();
        for r in &records {
            bytes.extend(serde_json::to_vec(r).expect("serializable"));
            bytes.push(b'\n');
        }
        let path = self.root.join(RECORDS);
        write_atomic(&path, &bytes)?;
        // The old descriptor points at the replaced inode.
        *appender = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn write_index(&self, campaign: &str) -> Result<StoreIndex, StoreError> {
        let records = self.load_records()?;
        let tasks = self.load_tasks()?;
        let providers: BTreeSet<String> = records.iter().map(|r| r.provider_id.clone()).collect();
        let mut failures: Vec<String> = records
            .iter()
            .filter(|r| r.machine_flags.infrastructure_failure())
            .map(EvaluationRecord::id)
            .collect();
        failures.sort();
        let index = StoreIndex {
            schema_version: SCHEMA_VERSION,
            campaign: campaign.to_string(),
            records: records.len(),
            tasks: tasks.len(),
            providers: providers.into_iter().collect(),
            infrastructure_failures: failures,
            digest: canonical_digest(&records),
        };
        let mut text = serde_json::to_string_pretty(&index).expect("serializable");
        text.push('\n');
        write_atomic(&self.root.join(INDEX), text.as_bytes())?;
        Ok(index)
    }

    pub fn baseline_dir(&self) -> PathBuf {
        self.root.join("baselines")
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_data().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

/// Hash of the canonical records, independent of order and wall-clock
/// fields.
pub fn canonical_digest(records: &[EvaluationRecord]) -> String {
    let mut by_id: BTreeMap<String, &EvaluationRecord> = BTreeMap::new();
    for r in records {
        by_id.insert(r.id(), r);
    }
    let mut h = Sha256::new();
    for r in by_id.values() {
        h.update(serde_json::to_vec(&r.canonical()).expect("serializable"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::sample_record;

    #[test]
    fn append_resume_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = RunStore::open(dir.path()).unwrap();
            s.append(&sample_record("t1", "p")).unwrap();
            s.append(&sample_record("t1", "p")).unwrap();
            s.append(&sample_record("t0", "p")).unwrap();
        }
        // Simulate a crash during the next append.
        let mut f = OpenOptions::new().append(true).open(dir.path().join(RECORDS)).unwrap();
        f.write_all(b"{\"schema_version\":1,\"task\":{").unwrap();
        drop(f);

        let s = RunStore::open(dir.path()).unwrap();
        assert!(s.is_complete("t1:p") && s.is_complete("t0:p"));
        assert!(!s.is_complete("t2:p"));
        s.append(&sample_record("t2", "p")).unwrap();
        let ids: Vec<String> = s.load_records().unwrap().iter().map(EvaluationRecord::id).collect();
        assert_eq!(ids, ["t1:p", "t0:p", "t2:p"]);

        let digest = canonical_digest(&s.load_records().unwrap());
        s.compact().unwrap();
        let ids: Vec<String> = s.load_records().unwrap().iter().map(EvaluationRecord::id).collect();
        assert_eq!(ids, ["t0:p", "t1:p", "t2:p"]);
        assert_eq!(canonical_digest(&s.load_records().unwrap()), digest);
        s.append(&sample_record("t3", "p")).unwrap();
        assert_eq!(s.load_records().unwrap().len(), 4);
    }

    #[test]
    fn corrupt_lines_and_versions_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(RECORDS), "{\"schema_version\":99}\n").unwrap();
        assert!(matches!(RunStore::open(dir.path()), Err(StoreError::StoreCorrupt { line: 1, .. })));
        std::fs::write(dir.path().join(RECORDS), "not json\n").unwrap();
        assert!(matches!(RunStore::open(dir.path()), Err(StoreError::StoreCorrupt { .. })));
    }

    #[test]
    fn tasks_are_added_once() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunStore::open(dir.path()).unwrap();
        let r = sample_record("t1", "p");
        assert_eq!(s.add_tasks(&[r.task.clone(), r.task.clone()]).unwrap(), 1);
        assert_eq!(s.add_tasks(&[r.task.clone()]).unwrap(), 0);
        assert_eq!(s.load_tasks().unwrap().len(), 1);
    }

    #[test]
    fn index_reports_digest() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunStore::open(dir.path()).unwrap();
        let mut bad = sample_record("t1", "p");
        bad.machine_flags.verify_error = Some("boom".into());
        s.append(&bad).unwrap();
        s.append(&sample_record("t2", "q")).unwrap();
        let idx = s.write_index("demo").unwrap();
        assert_eq!(idx.records, 2);
        assert_eq!(idx.providers, ["p", "q"]);
        assert_eq!(idx.infrastructure_failures, ["t1:p"]);
        assert_eq!(idx.digest.len(), 64);
    }
}
