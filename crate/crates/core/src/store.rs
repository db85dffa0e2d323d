//! Append-only record store: one JSON object per line, with an in-memory index.
//!
//! The byte layout is documented in `docs/store-schema.md`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Slot,
    Energy,
    Baseline,
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Normal,
    Abnormal,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "NORMAL",
            Label::Abnormal => "ABNORMAL",
            Label::Unlabeled => "UNLABELED",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NORMAL" => Ok(Label::Normal),
            "ABNORMAL" => Ok(Label::Abnormal),
            "UNLABELED" => Ok(Label::Unlabeled),
            other => Err(Error::Config(format!("unknown label `{other}`"))),
        }
    }
}

/// One stored record. Field order is the on-disk field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub kind: RecordKind,
    pub device_id: String,
    pub timestamp: f64,
    pub label: Label,
    pub run_id: String,
    pub payload: Value,
}

impl Record {
    pub fn new<T: Serialize>(
        kind: RecordKind,
        device_id: &str,
        timestamp: f64,
        label: Label,
        run_id: &str,
        payload: &T,
    ) -> Result<Self> {
        Ok(Record {
            kind,
            device_id: device_id.to_string(),
            timestamp,
            label,
            run_id: run_id.to_string(),
            payload: serde_json::to_value(payload)?,
        })
    }

    pub fn decode<T: DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.payload.clone())?)
    }

    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Filter for [`Store::query`]. The time range is inclusive.
#[derive(Debug, Clone)]
pub struct Query {
    pub kind: RecordKind,
    pub device_id: Option<String>,
    pub run_id: Option<String>,
    pub start: f64,
    pub end: f64,
}

impl Query {
    pub fn new(kind: RecordKind) -> Self {
        Query {
            kind,
            device_id: None,
            run_id: None,
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        }
    }

    pub fn device(mut self, device_id: &str) -> Self {
        self.device_id = Some(device_id.to_string());
        self
    }

    pub fn run(mut self, run_id: &str) -> Self {
        self.run_id = Some(run_id.to_string());
        self
    }

    pub fn between(mut self, start: f64, end: f64) -> Self {
        self.start = start;
        self.end = end;
        self
    }

    fn matches(&self, r: &Record) -> bool {
        r.kind == self.kind
            && self.device_id.as_deref().is_none_or(|d| d == r.device_id)
            && self.run_id.as_deref().is_none_or(|id| id == r.run_id)
            && r.timestamp >= self.start
            && r.timestamp <= self.end
    }
}

#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<Record>,
}

impl Store {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Store {
            path: None,
            file: None,
            records: Vec::new(),
        }
    }

    /// Opens (creating if needed) a store file for appending.
    ///
    /// A trailing partial line left by an interrupted write is cut off.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let (records, good_len, total_len) = Self::load(&mut file, path)?;
        if good_len < total_len {
            log::warn!(
                "{}: discarding {} bytes of incomplete trailing record",
                path.display(),
                total_len - good_len
            );
            file.set_len(good_len).map_err(|e| Error::io(path, e))?;
        }
        Ok(Store {
            path: Some(path.to_path_buf()),
            file: Some(file),
            records,
        })
    }

    /// Opens an existing store for queries only; appends fail.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (records, _, _) = Self::load(&mut file, path)?;
        Ok(Store {
            path: Some(path.to_path_buf()),
            file: None,
            records,
        })
    }

    fn load(file: &mut File, path: &Path) -> Result<(Vec<Record>, u64, u64)> {
        file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(&*file);
        let mut records = Vec::new();
        let mut good_len = 0u64;
        let mut total_len = 0u64;
        let mut buf = String::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            line_no += 1;
            total_len += n as u64;
            if !buf.ends_with('\n') {
                // interrupted append; everything before it stays valid
                break;
            }
            let record: Record = serde_json::from_str(buf.trim_end())
                .map_err(|e| Error::malformed(line_no, format!("store record: {e}")))?;
            records.push(record);
            good_len = total_len;
        }
        Ok((records, good_len, total_len))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends a record and returns its position (0-based, strictly increasing).
    pub fn append(&mut self, record: Record) -> Result<u64> {
        let mut line = record.to_line()?;
        line.push('\n');
        if let Some(path) = &self.path {
            let file = self.file.as_mut().ok_or_else(|| {
                Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::PermissionDenied, "store opened read-only"),
                )
            })?;
            file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
            file.flush().map_err(|e| Error::io(path, e))?;
        }
        self.records.push(record);
        Ok(self.records.len() as u64 - 1)
    }

    /// Forces appended data to stable storage.
    pub fn sync(&self) -> Result<()> {
        if let (Some(file), Some(path)) = (&self.file, &self.path) {
            file.sync_data().map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Matching records ordered by timestamp, then append position.
    pub fn query(&self, query: &Query) -> Result<Vec<Record>> {
        if query.start > query.end {
            return Err(Error::InvalidQuery(format!(
                "range start {} is after end {}",
                query.start, query.end
            )));
        }
        let mut hits: Vec<(usize, &Record)> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| query.matches(r))
            .collect();
        hits.sort_by(|a, b| a.1.timestamp.total_cmp(&b.1.timestamp).then(a.0.cmp(&b.0)));
        Ok(hits.into_iter().map(|(_, r)| r.clone()).collect())
    }

    /// Run ids in order of first appearance.
    pub fn run_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            if !ids.contains(&r.run_id) {
                ids.push(r.run_id.clone());
            }
        }
        ids
    }

    /// Next sequential run id (`run-1`, `run-2`, ...).
    pub fn next_run_id(&self) -> String {
        format!("run-{}", self.run_ids().len() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(kind: RecordKind, t: f64, run: &str) -> Record {
        Record::new(kind, "dev", t, Label::Unlabeled, run, &json!({"t": t})).unwrap()
    }

    #[test]
    fn positions_increase() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path().join("s.jsonl")).unwrap();
        let p = store.append(rec(RecordKind::Slot, 0.0, "run-1")).unwrap();
        let q = store.append(rec(RecordKind::Energy, 0.0, "run-1")).unwrap();
        assert_eq!(q, p + 1);
    }

    #[test]
    fn empty_store_query() {
        let store = Store::in_memory();
        assert!(store.query(&Query::new(RecordKind::Slot)).unwrap().is_empty());
    }

    #[test]
    fn range_query_in_time_order() {
        let mut store = Store::in_memory();
        for i in (0..10).rev() {
            store.append(rec(RecordKind::Slot, i as f64 * 180.0, "run-1")).unwrap();
        }
        store.append(rec(RecordKind::Event, 360.0, "run-1")).unwrap();
        let hits = store
            .query(&Query::new(RecordKind::Slot).device("dev").between(360.0, 900.0))
            .unwrap();
        let ts: Vec<f64> = hits.iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![360.0, 540.0, 720.0, 900.0]);
        assert!(store.query(&Query::new(RecordKind::Slot).between(5.0, 1.0)).is_err());
    }

    #[test]
    fn read_your_writes_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut store = Store::open(&path).unwrap();
        for i in 0..7 {
            store.append(rec(RecordKind::Event, i as f64, "run-1")).unwrap();
            assert_eq!(store.query(&Query::new(RecordKind::Event)).unwrap().len(), i + 1);
        }
        drop(store);
        let store = Store::open(&path).unwrap();
        assert_eq!(store.len(), 7);
        assert_eq!(store.next_run_id(), "run-2");
    }

    #[test]
    fn two_runs_distinguished() {
        let mut store = Store::in_memory();
        for run in ["run-1", "run-2"] {
            for i in 0..3 {
                store.append(rec(RecordKind::Slot, i as f64, run)).unwrap();
            }
        }
        assert_eq!(store.query(&Query::new(RecordKind::Slot).run("run-2")).unwrap().len(), 3);
        assert_eq!(store.run_ids(), vec!["run-1", "run-2"]);
    }

    #[test]
    fn truncated_tail_is_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut store = Store::open(&path).unwrap();
        store.append(rec(RecordKind::Slot, 1.0, "run-1")).unwrap();
        store.append(rec(RecordKind::Slot, 2.0, "run-1")).unwrap();
        drop(store);
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 9]).unwrap();
        let mut store = Store::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        store.append(rec(RecordKind::Slot, 3.0, "run-1")).unwrap();
        drop(store);
        assert_eq!(Store::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn read_only_store_rejects_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        Store::open(&path).unwrap().append(rec(RecordKind::Slot, 0.0, "run-1")).unwrap();
        let mut ro = Store::open_read_only(&path).unwrap();
        assert_eq!(ro.len(), 1);
        assert!(matches!(ro.append(rec(RecordKind::Slot, 1.0, "run-1")), Err(Error::Io { .. })));
        assert_eq!(ro.len(), 1);
        // a directory is not an appendable file
        assert!(Store::open(dir.path()).is_err());
    }
}
