//! Append-only JSON-lines review history. Every change appends the full
//! updated entry; on open the log is replayed and the last record per id
//! wins.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use cardex_core::ExtractionResult;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use ulid::Generator;

use crate::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Extracted,
    Edited,
    Saved,
}

/// Field names of each side, in schema order, as configured when the entry
/// was created. Edits and exports are checked against these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldNames {
    pub front: Vec<String>,
    pub back: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideResults {
    pub front: ExtractionResult,
    pub back: ExtractionResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub fields: FieldNames,
    pub results: SideResults,
    pub edited_fields: BTreeMap<String, String>,
    pub status: Status,
}

impl HistoryEntry {
    pub fn knows_field(&self, name: &str) -> bool {
        self.fields
            .front
            .iter()
            .chain(&self.fields.back)
            .any(|f| f == name)
    }

    /// Current value of every schema field: the edit if any, else the
    /// corrected extraction, else empty.
    pub fn values(&self) -> Vec<(&str, &str)> {
        let sides = [
            (&self.fields.front, &self.results.front),
            (&self.fields.back, &self.results.back),
        ];
        sides
            .into_iter()
            .flat_map(|(names, result)| {
                names.iter().map(move |n| {
                    let value = self
                        .edited_fields
                        .get(n)
                        .map(String::as_str)
                        .or_else(|| result.fields.get(n).map(|v| v.corrected_text.as_str()))
                        .unwrap_or("");
                    (n.as_str(), value)
                })
            })
            .collect()
    }

    /// The exported text document, one `field: value` line per field.
    pub fn to_text(&self) -> String {
        self.values()
            .into_iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }
}

/// Compact listing row for `GET /history`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub status: Status,
    pub field_count: usize,
    pub edited_count: usize,
    pub warning_count: usize,
}

impl From<&HistoryEntry> for HistorySummary {
    fn from(e: &HistoryEntry) -> Self {
        HistorySummary {
            id: e.id.clone(),
            created_at: e.created_at,
            request_id: e.request_id.clone(),
            status: e.status,
            field_count: e.results.front.fields.len() + e.results.back.fields.len(),
            edited_count: e.edited_fields.len(),
            warning_count: e.results.front.warnings.len() + e.results.back.warnings.len(),
        }
    }
}

/// RFC 3339 UTC with millisecond precision, as stored in the log.
pub fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_time(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

struct Writer {
    file: File,
    ids: Generator,
}

/// Single-writer store: appends are serialized by the writer lock; reads
/// use the in-memory map.
pub struct HistoryStore {
    path: PathBuf,
    writer: Mutex<Writer>,
    entries: RwLock<BTreeMap<String, HistoryEntry>>,
}

impl HistoryStore {
    /// Opens or creates the log and replays it. A truncated final line (an
    /// interrupted append) is dropped; corruption elsewhere is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        let entries = replay(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(HistoryStore {
            path,
            writer: Mutex::new(Writer {
                file,
                ids: Generator::new(),
            }),
            entries: RwLock::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Creates an entry with a fresh sortable id and persists it.
    pub fn create(
        &self,
        request_id: Option<String>,
        fields: FieldNames,
        results: SideResults,
    ) -> Result<HistoryEntry, ServiceError> {
        let mut w = self.writer.lock().expect("history writer poisoned");
        // Millisecond precision so the in-memory value equals its replay.
        let now =
            DateTime::from_timestamp_millis(Utc::now().timestamp_millis()).expect("current time");
        let id = w
            .ids
            .generate_from_datetime(now.into())
            .map_err(|e| self.err(e.to_string()))?
            .to_string();
        let entry = HistoryEntry {
            id,
            created_at: now,
            request_id,
            fields,
            results,
            edited_fields: BTreeMap::new(),
            status: Status::Extracted,
        };
        self.persist(&mut w, entry)
    }

    /// Applies `change` to a copy of entry `id` and persists the result.
    /// `Ok(None)` when the id is unknown.
    pub fn update<E>(
        &self,
        id: &str,
        change: impl FnOnce(&mut HistoryEntry) -> Result<(), E>,
    ) -> Result<Option<HistoryEntry>, E>
    where
        E: From<ServiceError>,
    {
        let mut w = self.writer.lock().expect("history writer poisoned");
        let Some(mut entry) = self.get(id) else {
            return Ok(None);
        };
        change(&mut entry)?;
        Ok(Some(self.persist(&mut w, entry)?))
    }

    pub fn get(&self, id: &str) -> Option<HistoryEntry> {
        self.entries
            .read()
            .expect("history map poisoned")
            .get(id)
            .cloned()
    }

    /// Newest first.
    pub fn list(&self, limit: usize) -> Vec<HistorySummary> {
        let map = self.entries.read().expect("history map poisoned");
        map.values()
            .rev()
            .take(limit)
            .map(HistorySummary::from)
            .collect()
    }

    /// Every entry, oldest first.
    pub fn snapshot(&self) -> Vec<HistoryEntry> {
        self.entries
            .read()
            .expect("history map poisoned")
            .values()
            .cloned()
            .collect()
    }

    fn persist(&self, w: &mut Writer, entry: HistoryEntry) -> Result<HistoryEntry, ServiceError> {
        let mut line = serde_json::to_string(&entry).map_err(|e| self.err(e.to_string()))?;
        line.push('\n');
        w.file.write_all(line.as_bytes())?;
        w.file.sync_data()?;
        self.entries
            .write()
            .expect("history map poisoned")
            .insert(entry.id.clone(), entry.clone());
        Ok(entry)
    }

    fn err(&self, message: String) -> ServiceError {
        ServiceError::History {
            path: self.path.display().to_string(),
            message,
        }
    }
}

fn replay(path: &Path) -> Result<BTreeMap<String, HistoryEntry>, ServiceError> {
    let mut entries = BTreeMap::new();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(entries),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<&str> = text.lines().collect();
    let ends_cleanly = text.is_empty() || text.ends_with('\n');
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<HistoryEntry>(line) {
            Ok(entry) => {
                entries.insert(entry.id.clone(), entry);
            }
            Err(e) if i + 1 == lines.len() && !ends_cleanly => {
                log::warn!("{}: dropping truncated final record ({e})", path.display());
            }
            Err(e) => {
                return Err(ServiceError::History {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    if !ends_cleanly {
        // Cut the torn record so later appends start on a fresh line.
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        OpenOptions::new()
            .write(true)
            .open(path)?
            .set_len(keep as u64)?;
    }
    Ok(entries)
}
