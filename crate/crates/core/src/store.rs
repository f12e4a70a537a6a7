//! Append-only, content-addressed record log for campaign artifacts.
//!
//! Layout under the root: `records.jsonl` holds one record per line, and
//! `artifacts/<id>.js` holds program texts. A record is written at most once
//! per id, so rerunning a campaign skips what is already there.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{NormalizedResult, PerfSample};
use crate::oracle::Verdict;
use crate::sketch::{content_id, Origin};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record on line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("record {0} refers to missing record {1}")]
    Dangling(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub id: String,
    pub origin: Origin,
    /// Which configured source produced it.
    pub source: String,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_hash: Option<String>,
    #[serde(default)]
    pub timestamp: u64,
    /// Feedback round that produced it; 0 for initial generation.
    #[serde(default)]
    pub round: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramRole {
    Filled,
    /// Filled and enhanced: what the oracles compare.
    Original,
    /// Original of a metamorphic variant Pi.
    Metamorphic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    /// Content id of the program text.
    pub id: String,
    pub role: ProgramRole,
    pub sketch_id: String,
    /// Program this one was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mr: Option<String>,
    #[serde(default)]
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    /// Derived from (program, config).
    pub id: String,
    pub program_id: String,
    pub tool: String,
    pub preset: String,
    /// Artifact with the obfuscated text, if the tool succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub id: String,
    pub artifact: String,
    pub run: usize,
    pub result: NormalizedResult,
    pub wall_ms: f64,
    pub peak_rss_kb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    /// Execution records compared.
    pub executions: Vec<String>,
    pub verdict: Verdict,
    #[serde(default)]
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub id: String,
    pub artifact: String,
    /// The original program measured directly or through this variant.
    pub program: String,
    /// "original" or a tool/preset label.
    pub config: String,
    pub sample: PerfSample,
}

/// A per-item failure that did not stop the campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub id: String,
    pub stage: String,
    pub subject: String,
    pub message: String,
}

/// Marks a finished generation source, so reruns do not ask again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub sketches: Vec<String>,
    #[serde(default)]
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Sketch(SketchRecord),
    Program(ProgramRecord),
    Variant(VariantRecord),
    Execution(ExecutionRecord),
    Verdict(VerdictRecord),
    Perf(PerfRecord),
    Source(SourceRecord),
    Error(ErrorRecord),
}

impl Record {
    pub fn id(&self) -> &str {
        match self {
            Record::Sketch(r) => &r.id,
            Record::Program(r) => &r.id,
            Record::Variant(r) => &r.id,
            Record::Execution(r) => &r.id,
            Record::Verdict(r) => &r.id,
            Record::Perf(r) => &r.id,
            Record::Source(r) => &r.id,
            Record::Error(r) => &r.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Sketch(_) => "sketch",
            Record::Program(_) => "program",
            Record::Variant(_) => "variant",
            Record::Execution(_) => "execution",
            Record::Verdict(_) => "verdict",
            Record::Perf(_) => "perf",
            Record::Source(_) => "source",
            Record::Error(_) => "error",
        }
    }
}

/// Id for a record keyed by several strings.
pub fn key_id(parts: &[&str]) -> String {
    content_id(&parts.join("\u{1f}"))
}

pub struct ResultStore {
    root: PathBuf,
    log: Option<File>,
    records: Vec<Record>,
    index: HashMap<(&'static str, String), usize>,
}

impl ResultStore {
    /// Opens (or creates) the store and loads the existing log.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        std::fs::create_dir_all(root.join("artifacts")).map_err(io(root))?;
        let log_path = root.join("records.jsonl");
        let mut store = ResultStore {
            root: root.to_path_buf(),
            log: None,
            records: Vec::new(),
            index: HashMap::new(),
        };
        if log_path.exists() {
            let f = File::open(&log_path).map_err(io(&log_path))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(io(&log_path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                store.insert_mem(rec);
            }
        }
        store.log = Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log_path)
                .map_err(io(&log_path))?,
        );
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn insert_mem(&mut self, rec: Record) -> bool {
        let key = (rec.kind(), rec.id().to_string());
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.records.len());
        self.records.push(rec);
        true
    }

    pub fn contains(&self, kind: &'static str, id: &str) -> bool {
        self.index.contains_key(&(kind, id.to_string()))
    }

    pub fn get(&self, kind: &'static str, id: &str) -> Option<&Record> {
        self.index.get(&(kind, id.to_string())).map(|i| &self.records[*i])
    }

    /// Appends a record unless one with the same kind and id exists.
    /// Returns whether it was written.
    pub fn put(&mut self, rec: Record) -> Result<bool, StoreError> {
        if self.contains(rec.kind(), rec.id()) {
            return Ok(false);
        }
        let line = serde_json::to_string(&rec).expect("records serialize") + "\n";
        let path = self.root.join("records.jsonl");
        let log = self.log.as_mut().expect("open store");
        log.write_all(line.as_bytes())
            .and_then(|_| log.flush())
            .map_err(|source| StoreError::Io { path, source })?;
        Ok(self.insert_mem(rec))
    }

    pub fn artifact_path(&self, id: &str) -> PathBuf {
        self.root.join("artifacts").join(format!("{id}.js"))
    }

    /// Stores a program text under its content id.
    pub fn put_artifact(&self, text: &str) -> Result<String, StoreError> {
        let id = content_id(text);
        let path = self.artifact_path(&id);
        if !path.exists() {
            let tmp = path.with_extension("js.tmp");
            std::fs::write(&tmp, text)
                .and_then(|_| std::fs::rename(&tmp, &path))
                .map_err(|source| StoreError::Io { path, source })?;
        }
        Ok(id)
    }

    pub fn artifact(&self, id: &str) -> Result<String, StoreError> {
        let path = self.artifact_path(id);
        std::fs::read_to_string(&path).map_err(|source| StoreError::Io { path, source })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn sketches(&self) -> impl Iterator<Item = &SketchRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Sketch(s) => Some(s),
            _ => None,
        })
    }

    pub fn programs(&self) -> impl Iterator<Item = &ProgramRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Program(s) => Some(s),
            _ => None,
        })
    }

    pub fn variants(&self) -> impl Iterator<Item = &VariantRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Variant(s) => Some(s),
            _ => None,
        })
    }

    pub fn executions(&self) -> impl Iterator<Item = &ExecutionRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Execution(s) => Some(s),
            _ => None,
        })
    }

    pub fn verdicts(&self) -> impl Iterator<Item = &VerdictRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Verdict(s) => Some(s),
            _ => None,
        })
    }

    pub fn perf(&self) -> impl Iterator<Item = &PerfRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Perf(s) => Some(s),
            _ => None,
        })
    }

    pub fn errors(&self) -> impl Iterator<Item = &ErrorRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Error(s) => Some(s),
            _ => None,
        })
    }

    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.kind()).or_insert(0) += 1;
        }
        m
    }

    /// Checks that every reference points at an existing record or artifact.
    pub fn check_integrity(&self) -> Result<(), StoreError> {
        let artifacts: HashSet<String> = std::fs::read_dir(self.root.join("artifacts"))
            .map_err(|source| StoreError::Io {
                path: self.root.join("artifacts"),
                source,
            })?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".js").map(str::to_string))
            .collect();
        let need_artifact = |owner: &str, id: &str| {
            if artifacts.contains(id) {
                Ok(())
            } else {
                Err(StoreError::Dangling(owner.to_string(), id.to_string()))
            }
        };
        let need = |owner: &str, kind: &'static str, id: &str| {
            if self.contains(kind, id) {
                Ok(())
            } else {
                Err(StoreError::Dangling(owner.to_string(), id.to_string()))
            }
        };
        for r in &self.records {
            match r {
                Record::Sketch(s) => need_artifact(&s.id, &s.id)?,
                Record::Program(p) => {
                    need_artifact(&p.id, &p.id)?;
                    need(&p.id, "sketch", &p.sketch_id)?;
                    if let Some(parent) = &p.parent {
                        need(&p.id, "program", parent)?;
                    }
                }
                Record::Variant(v) => {
                    need(&v.id, "program", &v.program_id)?;
                    if let Some(a) = &v.artifact {
                        need_artifact(&v.id, a)?;
                    }
                }
                Record::Execution(e) => need_artifact(&e.id, &e.artifact)?,
                Record::Verdict(v) => {
                    for e in &v.executions {
                        need(&v.id, "execution", e)?;
                    }
                }
                Record::Perf(p) => need_artifact(&p.id, &p.artifact)?,
                Record::Source(s) => {
                    for id in &s.sketches {
                        need(&s.id, "sketch", id)?;
                    }
                }
                Record::Error(_) => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_idempotent_and_persistent() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open(dir.path()).unwrap();
        let id = s.put_artifact("let a = 1;").unwrap();
        let rec = Record::Sketch(SketchRecord {
            id: id.clone(),
            origin: Origin::Handwritten,
            source: "dir".into(),
            valid: true,
            response_hash: None,
            timestamp: 0,
            round: 0,
        });
        assert!(s.put(rec.clone()).unwrap());
        assert!(!s.put(rec.clone()).unwrap());
        drop(s);
        let s = ResultStore::open(dir.path()).unwrap();
        assert_eq!(s.records(), [rec]);
        assert_eq!(s.artifact(&id).unwrap(), "let a = 1;");
        s.check_integrity().unwrap();
    }

    #[test]
    fn dangling_references_are_found() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open(dir.path()).unwrap();
        let id = s.put_artifact("1").unwrap();
        s.put(Record::Program(ProgramRecord {
            id,
            role: ProgramRole::Filled,
            sketch_id: "nope".into(),
            parent: None,
            seed: 0,
            mr: None,
            round: 0,
        }))
        .unwrap();
        assert!(matches!(s.check_integrity(), Err(StoreError::Dangling(_, _))));
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("records.jsonl"), "{\"kind\":\"sketch\"}\n").unwrap();
        assert!(matches!(ResultStore::open(dir.path()), Err(StoreError::Corrupt { line: 1, .. })));
    }
}
