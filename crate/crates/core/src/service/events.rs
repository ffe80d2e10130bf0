//! The append-only event log: one JSON object per line, each carrying a
//! gap-free sequence number and the SHA-256 of its canonical payload.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::state::Event;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    MemoryAppend,
    DocUpsert,
    DocDelete,
    KgAdd,
    RoutingDecision,
    Orchestration,
    ReviewCreated,
    ReviewDecided,
    ResponseDelivered,
    ConfigLoaded,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MemoryAppend => "memory-append",
            Self::DocUpsert => "doc-upsert",
            Self::DocDelete => "doc-delete",
            Self::KgAdd => "kg-add",
            Self::RoutingDecision => "routing-decision",
            Self::Orchestration => "orchestration",
            Self::ReviewCreated => "review-created",
            Self::ReviewDecided => "review-decided",
            Self::ResponseDelivered => "response-delivered",
            Self::ConfigLoaded => "config-loaded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub event_seq: u64,
    pub kind: EventKind,
    /// Milliseconds since the Unix epoch; synthesized from the seed and
    /// sequence number in deterministic mode.
    pub recorded_at: u64,
    pub payload: Value,
    pub payload_hash: String,
    /// Measured durations. Not covered by the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Value>,
}

impl EventRecord {
    pub fn decode(&self) -> Result<Event, serde_json::Error> {
        serde_json::from_value(serde_json::json!({
            "kind": self.kind,
            "payload": self.payload,
        }))
    }

    /// The record with measured durations removed.
    pub fn masked(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event record serializes")
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn write(value: &Value, out: &mut String) {
        match value {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, k) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Value::String(k.clone()).to_string());
                    out.push(':');
                    write(&map[k], out);
                }
                out.push('}');
            }
            Value::Array(items) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(v, out);
                }
                out.push(']');
            }
            scalar => out.push_str(&scalar.to_string()),
        }
    }
    let mut out = String::new();
    write(value, &mut out);
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn payload_hash(payload: &Value) -> String {
    sha256_hex(canonical_json(payload).as_bytes())
}

/// Source of `recorded_at` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Deterministic { seed: u64 },
    Wall,
}

const SYNTHETIC_EPOCH_MS: u64 = 1_700_000_000_000;

impl Clock {
    pub fn recorded_at(self, event_seq: u64) -> u64 {
        match self {
            Self::Deterministic { seed } => SYNTHETIC_EPOCH_MS
                .wrapping_add(seed.wrapping_mul(86_400_000))
                .wrapping_add(event_seq.wrapping_mul(1_000)),
            Self::Wall => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        }
    }
}

/// Reads and verifies a log: sequence numbers must run 1, 2, ... without
/// gaps and every hash must match. Returns each record with its line number.
pub fn read_log(path: &Path) -> Result<Vec<(usize, EventRecord)>, Error> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| Error::CorruptLog { line: line_no, reason };
        let record: EventRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let expected = out.len() as u64 + 1;
        if record.event_seq != expected {
            return Err(corrupt(format!(
                "expected event_seq {expected}, found {}",
                record.event_seq
            )));
        }
        if payload_hash(&record.payload) != record.payload_hash {
            return Err(corrupt("payload hash mismatch".into()));
        }
        out.push((line_no, record));
    }
    Ok(out)
}

/// The live log: records kept in memory and, when backed by a file, each
/// one written and flushed before the append returns.
#[derive(Debug)]
pub struct EventLog {
    records: Vec<EventRecord>,
    sink: Option<BufWriter<File>>,
    path: Option<PathBuf>,
    clock: Clock,
}

impl EventLog {
    pub fn in_memory(clock: Clock) -> Self {
        Self {
            records: Vec::new(),
            sink: None,
            path: None,
            clock,
        }
    }

    /// Opens `path` for appending after `existing`, the records already in
    /// it (as returned by [`read_log`]).
    pub fn open(path: &Path, existing: Vec<EventRecord>, clock: Clock) -> Result<Self, Error> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            records: existing,
            sink: Some(BufWriter::new(file)),
            path: Some(path.to_path_buf()),
            clock,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn last_seq(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq() + 1
    }

    pub fn append(&mut self, event: &Event, timing: Option<Value>) -> Result<EventRecord, Error> {
        let tagged = serde_json::to_value(event).map_err(|e| Error::InvalidEvent(e.to_string()))?;
        let Value::Object(mut tagged) = tagged else {
            return Err(Error::InvalidEvent("event is not an object".into()));
        };
        let kind: EventKind = serde_json::from_value(tagged.remove("kind").unwrap_or(Value::Null))
            .map_err(|e| Error::InvalidEvent(e.to_string()))?;
        let payload = tagged.remove("payload").unwrap_or(Value::Null);
        let event_seq = self.next_seq();
        let record = EventRecord {
            event_seq,
            kind,
            recorded_at: self.clock.recorded_at(event_seq),
            payload_hash: payload_hash(&payload),
            payload,
            timing,
        };
        if let Some(sink) = &mut self.sink {
            sink.write_all(record.to_line().as_bytes())?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.records.push(record.clone());
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_sorts_nested_keys() {
        let v = json!({"b": 1, "a": {"z": [3, {"y": 1, "x": 2}], "c": "s"}});
        assert_eq!(canonical_json(&v), r#"{"a":{"c":"s","z":[3,{"x":2,"y":1}]},"b":1}"#);
    }

    #[test]
    fn hash_is_sha256_of_canonical_form() {
        assert_eq!(
            payload_hash(&json!({})),
            "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
    }

    #[test]
    fn deterministic_clock() {
        let c = Clock::Deterministic { seed: 7 };
        assert_eq!(c.recorded_at(2) - c.recorded_at(1), 1_000);
        assert_eq!(c.recorded_at(1), Clock::Deterministic { seed: 7 }.recorded_at(1));
        assert_ne!(c.recorded_at(1), Clock::Deterministic { seed: 8 }.recorded_at(1));
    }

    #[test]
    fn append_numbers_from_one() {
        let mut log = EventLog::in_memory(Clock::Deterministic { seed: 0 });
        let event = Event::KgAdd(crate::tools::Triple::new("a", "b", "c"));
        let first = log.append(&event, None).unwrap();
        let second = log.append(&event, None).unwrap();
        assert_eq!((first.event_seq, second.event_seq), (1, 2));
        assert_eq!(first.kind, EventKind::KgAdd);
        assert_eq!(first.decode().unwrap(), event);
    }
}
