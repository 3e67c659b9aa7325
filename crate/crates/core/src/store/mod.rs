//! Append-only log of prediction runs with filtered retrieval and
//! accuracy metrics.
//!
//! On disk the log is a header line followed by one JSON record per line.
//! Every append is a single `write_all` of a newline-terminated record
//! followed by `sync_data`, so after a crash the file holds a prefix of
//! acknowledged records plus at most one torn tail line, which
//! [`PredictionStore::open`] discards.

mod metrics;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::aggregation::{age_bucket_of, AgeBucket};
use crate::corpus::{Corpus, Gender};
use crate::gateway::{ContextFingerprint, Label, ModelId, ParsedPrediction, ResolvedContext, TaskKind};

pub use metrics::{accuracy_breakdown, misclassification_matrix, ConfusionMatrix, GroupBy, MetricsRow, MetricsTable};

pub const LOG_FORMAT: &str = "parlvote.predictions";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LogHeader {
    format: String,
    version: u32,
}

/// Speaker demographics frozen at write time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerSnapshot {
    pub gender: Gender,
    pub country: String,
    pub group_id: String,
    pub group_name: String,
    pub group_lr_ordinal: Option<u32>,
    pub age_bucket: AgeBucket,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub record_id: String,
    pub task: TaskKind,
    pub speech_id: String,
    pub mep_id: String,
    /// Set for vote-task records only.
    pub roll_call_id: Option<String>,
    pub model: ModelId,
    pub context_fingerprint: ContextFingerprint,
    pub context: ResolvedContext,
    pub speaker: SpeakerSnapshot,
    pub parsed: ParsedPrediction,
    pub ground_truth: Label,
    pub correct: bool,
    pub created_at: DateTime<Utc>,
}

impl PredictionRecord {
    pub fn is_consistent(&self) -> bool {
        self.correct == (self.parsed.label == self.ground_truth)
            && self.parsed.label.task() == self.task
            && self.ground_truth.task() == self.task
            && (self.task == TaskKind::VotePrediction) == self.roll_call_id.is_some()
    }
}

/// A prediction about to be recorded; ground truth, demographics and
/// correctness are filled in from the corpus by [`PredictionStore::record`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewPrediction {
    pub task: TaskKind,
    pub speech_id: String,
    pub roll_call_id: Option<String>,
    pub model: ModelId,
    pub context: ResolvedContext,
    pub context_fingerprint: ContextFingerprint,
    pub parsed: ParsedPrediction,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage failure on {path}: {source}")]
    StorageFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("`{record}` references missing {target}")]
    DanglingReference { record: String, target: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{path}:{line}: corrupt log: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// Conjunctive record filter; `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFilter {
    pub task: Option<TaskKind>,
    pub model: Option<ModelId>,
    pub correct: Option<bool>,
    pub min_confidence: Option<u8>,
    pub max_confidence: Option<u8>,
    pub gender: Option<Gender>,
    /// Group id or group name.
    pub political_group: Option<String>,
    pub country: Option<String>,
    pub age_bucket: Option<AgeBucket>,
}

impl RecordFilter {
    pub fn task(task: TaskKind) -> Self {
        RecordFilter {
            task: Some(task),
            ..Default::default()
        }
    }

    pub fn matches(&self, r: &PredictionRecord) -> bool {
        self.task.is_none_or(|t| r.task == t)
            && self.model.as_ref().is_none_or(|m| r.model == *m)
            && self.correct.is_none_or(|c| r.correct == c)
            && self.min_confidence.is_none_or(|c| r.parsed.confidence >= c)
            && self.max_confidence.is_none_or(|c| r.parsed.confidence <= c)
            && self.gender.is_none_or(|g| r.speaker.gender == g)
            && self
                .political_group
                .as_ref()
                .is_none_or(|g| r.speaker.group_id == *g || r.speaker.group_name == *g)
            && self.country.as_ref().is_none_or(|c| r.speaker.country.eq_ignore_ascii_case(c))
            && self.age_bucket.is_none_or(|b| r.speaker.age_bucket == b)
    }
}

#[derive(Default)]
struct Records {
    rows: Vec<PredictionRecord>,
    by_id: HashMap<String, usize>,
}

/// Single-writer, many-reader prediction log.
pub struct PredictionStore {
    path: Option<PathBuf>,
    writer: Mutex<Option<File>>,
    records: RwLock<Records>,
}

impl PredictionStore {
    pub fn in_memory() -> Self {
        PredictionStore {
            path: None,
            writer: Mutex::new(None),
            records: RwLock::new(Records::default()),
        }
    }

    /// Opens (creating if needed) the log at `path`, rebuilding the index
    /// and truncating a torn final line if the last write was interrupted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::StorageFailure {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;

        let mut records = Records::default();
        if bytes.is_empty() {
            let header = serde_json::to_string(&LogHeader {
                format: LOG_FORMAT.into(),
                version: LOG_VERSION,
            })
            .expect("header serializes");
            file.write_all(format!("{header}\n").as_bytes()).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        } else {
            let good_len = Self::replay(&path, &bytes, &mut records)?;
            if good_len < bytes.len() {
                tracing::warn!(path = %path.display(), dropped = bytes.len() - good_len, "discarding torn tail of prediction log");
                file.set_len(good_len as u64).map_err(io_err)?;
                file.seek(SeekFrom::End(0)).map_err(io_err)?;
                file.sync_data().map_err(io_err)?;
            }
        }
        Ok(PredictionStore {
            path: Some(path),
            writer: Mutex::new(Some(file)),
            records: RwLock::new(records),
        })
    }

    /// Parses the log, returning the byte length of its intact prefix.
    fn replay(path: &Path, bytes: &[u8], records: &mut Records) -> Result<usize, StoreError> {
        let corrupt = |line: usize, reason: String| StoreError::Corrupt {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut offset = 0;
        let mut line_no = 0;
        while offset < bytes.len() {
            line_no += 1;
            let Some(rel_end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
                // unterminated tail: an interrupted append
                return Ok(offset);
            };
            let line = &bytes[offset..offset + rel_end];
            let is_last = offset + rel_end + 1 == bytes.len();
            if line_no == 1 {
                let header: LogHeader = serde_json::from_slice(line)
                    .map_err(|e| corrupt(1, format!("bad header: {e}")))?;
                if header.format != LOG_FORMAT || header.version != LOG_VERSION {
                    return Err(corrupt(1, format!("unsupported log {} v{}", header.format, header.version)));
                }
            } else if !line.iter().all(u8::is_ascii_whitespace) {
                match serde_json::from_slice::<PredictionRecord>(line) {
                    Ok(record) => {
                        if !record.is_consistent() {
                            return Err(corrupt(line_no, format!("record {} has inconsistent derived fields", record.record_id)));
                        }
                        let index = records.rows.len();
                        records.by_id.insert(record.record_id.clone(), index);
                        records.rows.push(record);
                    }
                    Err(_) if is_last => return Ok(offset),
                    Err(e) => return Err(corrupt(line_no, e.to_string())),
                }
            }
            offset += rel_end + 1;
        }
        Ok(offset)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("store lock poisoned").rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves ground truth and speaker demographics from the corpus and
    /// appends the prediction.
    pub fn record(&self, corpus: &Corpus, new: NewPrediction) -> Result<String, StoreError> {
        let dangling = |target: String| StoreError::DanglingReference {
            record: new.speech_id.clone(),
            target,
        };
        if !new.context_fingerprint.is_known_template() {
            return Err(StoreError::InvalidRecord(format!(
                "fingerprint {} does not match a known template version",
                new.context_fingerprint
            )));
        }
        let speech = corpus
            .speech(&new.speech_id)
            .ok_or_else(|| dangling(format!("speech {}", new.speech_id)))?;
        let mep = corpus
            .mep(&speech.mep_id)
            .ok_or_else(|| dangling(format!("mep {}", speech.mep_id)))?;
        let group = corpus.group(&mep.group_id);

        let (ground_truth, at_date) = match (new.task, &new.roll_call_id) {
            (TaskKind::VotePrediction, Some(rc_id)) => {
                let rc = corpus
                    .roll_call(rc_id)
                    .ok_or_else(|| dangling(format!("roll call {rc_id}")))?;
                let choice = rc
                    .choice_of(&mep.id)
                    .ok_or_else(|| dangling(format!("vote of {} in roll call {rc_id}", mep.id)))?;
                (Label::from(choice), rc.date)
            }
            (TaskKind::VotePrediction, None) => {
                return Err(StoreError::InvalidRecord("vote-task record without roll_call_id".into()))
            }
            (TaskKind::GenderPrediction, Some(_)) => {
                return Err(StoreError::InvalidRecord("gender-task record with roll_call_id".into()))
            }
            (TaskKind::GenderPrediction, None) => {
                let debate = corpus
                    .debate(&speech.debate_id)
                    .ok_or_else(|| dangling(format!("debate {}", speech.debate_id)))?;
                (Label::from(mep.gender), debate.date)
            }
        };
        let age_bucket = age_bucket_of(mep, at_date).map_err(|e| StoreError::InvalidRecord(e.to_string()))?;

        self.append(PredictionRecord {
            record_id: String::new(),
            task: new.task,
            speech_id: speech.id.clone(),
            mep_id: mep.id.clone(),
            roll_call_id: new.roll_call_id,
            model: new.model,
            context_fingerprint: new.context_fingerprint,
            context: new.context,
            speaker: SpeakerSnapshot {
                gender: mep.gender,
                country: mep.country.clone(),
                group_id: mep.group_id.clone(),
                group_name: group.map_or_else(|| mep.group_id.clone(), |g| g.name.clone()),
                group_lr_ordinal: group.map(|g| g.lr_ordinal),
                age_bucket,
            },
            correct: new.parsed.label == ground_truth,
            parsed: new.parsed,
            ground_truth,
            created_at: new.created_at,
        })
    }

    /// Appends a fully formed record. The store assigns `record_id` and
    /// recomputes `correct`; the returned id is acknowledged durable.
    pub fn append(&self, mut record: PredictionRecord) -> Result<String, StoreError> {
        record.correct = record.parsed.label == record.ground_truth;
        if !record.is_consistent() {
            return Err(StoreError::InvalidRecord(format!(
                "labels or roll call do not fit the {} task",
                record.task
            )));
        }
        let mut writer = self.writer.lock().expect("store writer poisoned");
        let seq = self.len() + 1;
        record.record_id = format!("p-{seq:08}");
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_vec(&record).expect("record serializes");
            line.push(b'\n');
            let io_err = |source| StoreError::StorageFailure {
                path: self.path.clone().unwrap_or_default(),
                source,
            };
            file.write_all(&line).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        let id = record.record_id.clone();
        let mut records = self.records.write().expect("store lock poisoned");
        let index = records.rows.len();
        records.by_id.insert(id.clone(), index);
        records.rows.push(record);
        Ok(id)
    }

    pub fn get(&self, record_id: &str) -> Option<PredictionRecord> {
        let records = self.records.read().expect("store lock poisoned");
        records.by_id.get(record_id).map(|&i| records.rows[i].clone())
    }

    /// Matching records ordered by (created_at, record_id).
    pub fn query(&self, filter: &RecordFilter) -> Vec<PredictionRecord> {
        let records = self.records.read().expect("store lock poisoned");
        let mut out: Vec<PredictionRecord> = records.rows.iter().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.record_id.cmp(&b.record_id)));
        out
    }

    pub fn all(&self) -> Vec<PredictionRecord> {
        self.query(&RecordFilter::default())
    }

    pub fn accuracy_breakdown(&self, filter: &RecordFilter, group_by: GroupBy) -> MetricsTable {
        accuracy_breakdown(&self.query(filter), group_by)
    }

    pub fn misclassification_matrix(&self, filter: &RecordFilter) -> ConfusionMatrix {
        let filter = RecordFilter {
            task: Some(TaskKind::GenderPrediction),
            ..filter.clone()
        };
        misclassification_matrix(&self.query(&filter))
    }
}
