//! Append-only anxiety history.
//!
//! Records are stored one per line as `t_ms,kind,value` (UTF-8, `\n`
//! terminated). A final line without its newline is a torn write: it is
//! skipped on load, reported, and cut off before the next append.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DAY_MS: u64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryKind {
    Level,
    Squeeze,
    Prompt,
    SessionStarted,
    SessionCompleted,
    SessionCancelled,
    SilentOn,
    SilentOff,
}

impl HistoryKind {
    pub const ALL: [HistoryKind; 8] = [
        HistoryKind::Level,
        HistoryKind::Squeeze,
        HistoryKind::Prompt,
        HistoryKind::SessionStarted,
        HistoryKind::SessionCompleted,
        HistoryKind::SessionCancelled,
        HistoryKind::SilentOn,
        HistoryKind::SilentOff,
    ];

    pub fn code(self) -> u8 {
        HistoryKind::ALL.iter().position(|k| *k == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<HistoryKind> {
        HistoryKind::ALL.get(usize::from(code)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HistoryKind::Level => "level",
            HistoryKind::Squeeze => "squeeze",
            HistoryKind::Prompt => "prompt",
            HistoryKind::SessionStarted => "session_started",
            HistoryKind::SessionCompleted => "session_completed",
            HistoryKind::SessionCancelled => "session_cancelled",
            HistoryKind::SilentOn => "silent_on",
            HistoryKind::SilentOff => "silent_off",
        }
    }
}

impl FromStr for HistoryKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        HistoryKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub t_ms: u64,
    pub kind: HistoryKind,
    /// Accumulator for `level`, peak for `squeeze`, 0 otherwise.
    pub value: u16,
}

impl fmt::Display for HistoryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.t_ms, self.kind.as_str(), self.value)
    }
}

impl FromStr for HistoryRecord {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let mut parts = line.split(',');
        let (Some(t), Some(kind), Some(value), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("expected `t_ms,kind,value`, got `{line}`"));
        };
        Ok(HistoryRecord {
            t_ms: t.parse().map_err(|_| format!("bad timestamp `{t}`"))?,
            kind: kind.parse().map_err(|_| format!("unknown kind `{kind}`"))?,
            value: value.parse().map_err(|_| format!("bad value `{value}`"))?,
        })
    }
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("history I/O error at byte {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: io::Error,
    },
    #[error("corrupt history record on line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushPolicy {
    EveryAppend,
    /// Flush after this many appends (and on drop).
    Batched(usize),
}

/// What `load` noticed but tolerated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// 1-based line number and length of an unterminated final line.
    pub torn_line: Option<(usize, usize)>,
}

struct Sink {
    writer: BufWriter<File>,
    offset: u64,
    policy: FlushPolicy,
    pending: usize,
}

pub struct HistoryStore {
    path: Option<PathBuf>,
    records: Vec<HistoryRecord>,
    sink: Option<Sink>,
}

impl fmt::Debug for HistoryStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistoryStore")
            .field("path", &self.path)
            .field("records", &self.records.len())
            .field("writable", &self.sink.is_some())
            .finish()
    }
}

impl HistoryStore {
    pub fn in_memory() -> HistoryStore {
        HistoryStore { path: None, records: Vec::new(), sink: None }
    }

    /// Reads a history file. A missing file is an empty store.
    pub fn load(path: &Path) -> Result<(HistoryStore, LoadReport), HistoryError> {
        let (records, report, _) = read_records(path)?;
        Ok((HistoryStore { path: Some(path.to_path_buf()), records, sink: None }, report))
    }

    /// Loads `path` and opens it for appending, creating it if needed. A torn
    /// final line is cut off so the next record starts on a fresh line.
    pub fn open(path: &Path, policy: FlushPolicy) -> Result<(HistoryStore, LoadReport), HistoryError> {
        let (records, report, good_len) = read_records(path)?;
        let io_err = |offset| move |source| HistoryError::Io { offset, source };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(0))?;
        if report.torn_line.is_some() {
            file.set_len(good_len).map_err(io_err(good_len))?;
        }
        let sink = Sink { writer: BufWriter::new(file), offset: good_len, policy, pending: 0 };
        Ok((HistoryStore { path: Some(path.to_path_buf()), records, sink: Some(sink) }, report))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&mut self, record: HistoryRecord) -> Result<(), HistoryError> {
        if let Some(sink) = &mut self.sink {
            let line = format!("{record}\n");
            let offset = sink.offset;
            let err = |source| HistoryError::Io { offset, source };
            sink.writer.write_all(line.as_bytes()).map_err(err)?;
            sink.offset += line.len() as u64;
            sink.pending += 1;
            let due = match sink.policy {
                FlushPolicy::EveryAppend => true,
                FlushPolicy::Batched(n) => sink.pending >= n,
            };
            if due {
                sink.writer.flush().map_err(err)?;
                sink.pending = 0;
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), HistoryError> {
        if let Some(sink) = &mut self.sink {
            let offset = sink.offset;
            sink.writer.flush().map_err(|source| HistoryError::Io { offset, source })?;
            sink.pending = 0;
        }
        Ok(())
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with `from_ms <= t_ms < to_ms`, in append order.
    pub fn query_range(&self, from_ms: u64, to_ms: u64) -> Vec<HistoryRecord> {
        self.records
            .iter()
            .filter(|r| from_ms <= r.t_ms && r.t_ms < to_ms)
            .copied()
            .collect()
    }
}

fn read_records(path: &Path) -> Result<(Vec<HistoryRecord>, LoadReport, u64), HistoryError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), LoadReport::default(), 0)),
        Err(source) => return Err(HistoryError::Io { offset: 0, source }),
    };
    let mut records = Vec::new();
    let mut report = LoadReport::default();
    let mut start = 0usize;
    let mut line_no = 0usize;
    while start < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[start..].iter().position(|&b| b == b'\n') else {
            report.torn_line = Some((line_no, bytes.len() - start));
            break;
        };
        let raw = &bytes[start..start + nl];
        let line = std::str::from_utf8(raw)
            .map_err(|_| HistoryError::CorruptRecord { line: line_no, reason: "not UTF-8".into() })?;
        let record = line
            .trim_end_matches('\r')
            .parse()
            .map_err(|reason| HistoryError::CorruptRecord { line: line_no, reason })?;
        records.push(record);
        start += nl + 1;
    }
    Ok((records, report, start as u64))
}

impl Drop for HistoryStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayAggregate {
    pub day: NaiveDate,
    /// Mean of `level` values; 0 when the day has none.
    pub mean_level: f64,
    pub max_level: u16,
    pub level_count: usize,
    pub squeeze_count: usize,
    pub sessions_completed: usize,
}

/// UTC calendar day containing an epoch-millisecond timestamp.
pub fn utc_day(t_ms: u64) -> NaiveDate {
    let secs = (t_ms / DAY_MS * 86_400) as i64;
    DateTime::from_timestamp(secs, 0).map_or(NaiveDate::MAX, |dt| dt.date_naive())
}

/// Per-UTC-day summary, days ascending. Only days that have records appear.
pub fn aggregate_daily(records: &[HistoryRecord]) -> Vec<DayAggregate> {
    #[derive(Default)]
    struct Acc {
        sum: u64,
        max: u16,
        levels: usize,
        squeezes: usize,
        completed: usize,
    }
    let mut days: std::collections::BTreeMap<u64, Acc> = Default::default();
    for r in records {
        let acc = days.entry(r.t_ms / DAY_MS).or_default();
        match r.kind {
            HistoryKind::Level => {
                acc.sum += u64::from(r.value);
                acc.max = acc.max.max(r.value);
                acc.levels += 1;
            }
            HistoryKind::Squeeze => acc.squeezes += 1,
            HistoryKind::SessionCompleted => acc.completed += 1,
            _ => {}
        }
    }
    days.into_iter()
        .map(|(day, a)| DayAggregate {
            day: utc_day(day * DAY_MS),
            mean_level: if a.levels == 0 { 0.0 } else { a.sum as f64 / a.levels as f64 },
            max_level: a.max,
            level_count: a.levels,
            squeeze_count: a.squeezes,
            sessions_completed: a.completed,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t_ms: u64, kind: HistoryKind, value: u16) -> HistoryRecord {
        HistoryRecord { t_ms, kind, value }
    }

    #[test]
    fn line_format() {
        let r = rec(1_700_000_000_000, HistoryKind::SessionCompleted, 0);
        assert_eq!(r.to_string(), "1700000000000,session_completed,0");
        assert_eq!("1700000000000,session_completed,0".parse::<HistoryRecord>(), Ok(r));
        assert!("1,level".parse::<HistoryRecord>().is_err());
        assert!("1,level,2,3".parse::<HistoryRecord>().is_err());
        assert!("1,anger,2".parse::<HistoryRecord>().is_err());
    }

    #[test]
    fn kind_codes_round_trip() {
        for k in HistoryKind::ALL {
            assert_eq!(HistoryKind::from_code(k.code()), Some(k));
        }
        assert_eq!(HistoryKind::from_code(8), None);
    }

    #[test]
    fn query_is_half_open() {
        let mut s = HistoryStore::in_memory();
        assert!(s.query_range(0, u64::MAX).is_empty());
        let r = rec(100, HistoryKind::Level, 5);
        s.append(r).unwrap();
        assert_eq!(s.query_range(100, 200), vec![r]);
        assert!(s.query_range(0, 100).is_empty());
    }

    #[test]
    fn appends_survive_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.log");
        let (store, _) = HistoryStore::load(&path).unwrap();
        assert!(store.is_empty());

        let a = rec(1, HistoryKind::Level, 10);
        let b = rec(2, HistoryKind::Squeeze, 700);
        {
            let (mut s, _) = HistoryStore::open(&path, FlushPolicy::EveryAppend).unwrap();
            s.append(a).unwrap();
            s.append(b).unwrap();
            assert_eq!(s.query_range(0, 10), vec![a, b]);
        }
        let c = rec(3, HistoryKind::Prompt, 0);
        {
            let (mut s, _) = HistoryStore::open(&path, FlushPolicy::Batched(8)).unwrap();
            s.append(c).unwrap();
        }
        let (s, report) = HistoryStore::load(&path).unwrap();
        assert_eq!(s.records(), &[a, b, c]);
        assert_eq!(report, LoadReport::default());
    }

    #[test]
    fn torn_last_line_is_skipped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.log");
        std::fs::write(&path, "1,level,10\n2,level,20\n3,lev").unwrap();
        let (s, report) = HistoryStore::load(&path).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(report.torn_line, Some((3, 5)));

        let (mut s, _) = HistoryStore::open(&path, FlushPolicy::EveryAppend).unwrap();
        s.append(rec(4, HistoryKind::Level, 40)).unwrap();
        drop(s);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1,level,10\n2,level,20\n4,level,40\n");
    }

    #[test]
    fn corrupt_middle_line_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.log");
        std::fs::write(&path, "1,level,10\ngarbage\n2,level,20\n").unwrap();
        let err = HistoryStore::load(&path).unwrap_err();
        assert!(matches!(err, HistoryError::CorruptRecord { line: 2, .. }), "{err}");
    }

    #[test]
    fn aggregates_two_days() {
        assert!(aggregate_daily(&[]).is_empty());
        let day0 = 1_700_000_000_000 / DAY_MS * DAY_MS;
        let recs = [
            rec(day0 + 10, HistoryKind::Level, 100),
            rec(day0 + 20, HistoryKind::Level, 300),
            rec(day0 + 30, HistoryKind::Squeeze, 800),
            rec(day0 + DAY_MS, HistoryKind::SessionCompleted, 0),
        ];
        let agg = aggregate_daily(&recs);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].day, NaiveDate::from_ymd_opt(2023, 11, 14).unwrap());
        assert_eq!((agg[0].mean_level, agg[0].max_level, agg[0].squeeze_count), (200.0, 300, 1));
        assert_eq!((agg[1].level_count, agg[1].sessions_completed), (0, 1));
    }
}
