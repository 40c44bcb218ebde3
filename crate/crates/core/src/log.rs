//! JSON Lines exploration logs.
//!
//! One event per line: `{"x":{"0":1.0},"a":2,"r":1.0,"p":0.25}`. Line 1 may be
//! a dataset header `{"meta":{"k":4,"mode":"loss"}}`. Events that carry a
//! hidden payload serialize it under an extra `"h"` key.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Context, HiddenPayload, LogEvent, OutcomeMode, SparseVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMeta {
    pub k: usize,
    pub mode: OutcomeMode,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: LogMeta,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    x: SparseVec,
    a: usize,
    r: f64,
    p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<HiddenPayload>,
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogEvent>> {
    read_log_with_meta(path).map(|(_, events)| events)
}

pub fn read_log_with_meta(path: impl AsRef<Path>) -> Result<(Option<LogMeta>, Vec<LogEvent>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_log(reader: impl BufRead) -> Result<(Option<LogMeta>, Vec<LogEvent>)> {
    let mut meta = None;
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<log>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 && trimmed.starts_with("{\"meta\"") {
            let m: MetaLine = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            meta = Some(m.meta);
            continue;
        }
        let ev: EventLine = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let context = match ev.h {
            Some(h) => Context::with_hidden(ev.x, h),
            None => Context::new(ev.x),
        };
        let event = LogEvent {
            context,
            action: ev.a,
            outcome: ev.r,
            propensity: ev.p,
        };
        event
            .validate(meta.map(|m| m.k))
            .map_err(|e| Error::validation(format!("line {line_no}: {e}")))?;
        events.push(event);
    }
    Ok((meta, events))
}

pub fn write_log(events: &[LogEvent], path: impl AsRef<Path>) -> Result<()> {
    write_log_with_meta(events, None, path)
}

pub fn write_log_with_meta(
    events: &[LogEvent],
    meta: Option<LogMeta>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    render_log(events, meta, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Serializes events as JSON Lines. `serde_json` emits the shortest decimal
/// form that parses back to the same `f64`, so the round trip is bit-exact.
pub fn render_log(
    events: &[LogEvent],
    meta: Option<LogMeta>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    if let Some(meta) = meta {
        serde_json::to_writer(&mut *out, &MetaLine { meta })?;
        out.write_all(b"\n")?;
    }
    for ev in events {
        let line = EventLine {
            x: ev.context.features().clone(),
            a: ev.action,
            r: ev.outcome,
            p: ev.propensity,
            h: ev.context.hidden().cloned(),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
