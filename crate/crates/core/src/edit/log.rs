//! Line-oriented command log for deterministic replay.
//!
//! One header line, then one record per line:
//! `<timestamp> <Command> [argument]`, timestamps with six decimals.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{apply, Document, EditCommand, EditError, Granularity};

pub const LOG_HEADER: &str = "# microgext command log v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogError {
    #[error("missing or unknown header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

impl fmt::Display for EditCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditCommand::MoveCaret(d) => write!(f, "MoveCaret {d}"),
            EditCommand::SelectRange(d) => write!(f, "SelectRange {d}"),
            EditCommand::Cut => f.write_str("Cut"),
            EditCommand::Copy => f.write_str("Copy"),
            EditCommand::Paste => f.write_str("Paste"),
            EditCommand::Undo => f.write_str("Undo"),
            EditCommand::Delete => f.write_str("Delete"),
            EditCommand::SelectAll => f.write_str("SelectAll"),
            EditCommand::SetGranularity(g) => write!(f, "SetGranularity {g}"),
            EditCommand::ConfirmCaret => f.write_str("ConfirmCaret"),
            EditCommand::ResetTask => f.write_str("ResetTask"),
        }
    }
}

impl FromStr for EditCommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let name = parts.next().ok_or("empty command")?;
        let arg = parts.next();
        if parts.next().is_some() {
            return Err(format!("too many arguments for {name}"));
        }
        let delta = || -> Result<i64, String> {
            arg.ok_or(format!("{name} needs a delta"))?
                .parse()
                .map_err(|e| format!("bad delta: {e}"))
        };
        let cmd = match name {
            "MoveCaret" => EditCommand::MoveCaret(delta()?),
            "SelectRange" => EditCommand::SelectRange(delta()?),
            "SetGranularity" => {
                let g = arg.ok_or("SetGranularity needs a mode")?;
                EditCommand::SetGranularity(Granularity::from_name(g).ok_or(format!("unknown granularity {g}"))?)
            }
            other => {
                if arg.is_some() {
                    return Err(format!("{other} takes no argument"));
                }
                match other {
                    "Cut" => EditCommand::Cut,
                    "Copy" => EditCommand::Copy,
                    "Paste" => EditCommand::Paste,
                    "Undo" => EditCommand::Undo,
                    "Delete" => EditCommand::Delete,
                    "SelectAll" => EditCommand::SelectAll,
                    "ConfirmCaret" => EditCommand::ConfirmCaret,
                    "ResetTask" => EditCommand::ResetTask,
                    _ => return Err(format!("unknown command {other}")),
                }
            }
        };
        Ok(cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub timestamp: f64,
    pub command: EditCommand,
}

pub fn write_log(records: &[LogRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{:.6} {}\n", r.timestamp, r.command));
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == LOG_HEADER => {}
        _ => return Err(LogError::BadHeader),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| LogError::BadRecord { line: i + 1, reason };
        let (ts, cmd) = line.split_once(' ').ok_or_else(|| bad("no command".into()))?;
        let timestamp: f64 = ts.parse().map_err(|e| bad(format!("bad timestamp: {e}")))?;
        let command = cmd.parse().map_err(bad)?;
        out.push(LogRecord { timestamp, command });
    }
    Ok(out)
}

/// Replays records in order. A command that fails leaves the document
/// as it was; its error is reported at the record's position.
pub fn replay(initial: &Document, records: &[LogRecord]) -> (Document, Vec<Option<EditError>>) {
    let mut doc = initial.clone();
    let mut errors = Vec::with_capacity(records.len());
    for r in records {
        match apply(&doc, r.command) {
            Ok(d) => {
                doc = d;
                errors.push(None);
            }
            Err(e) => errors.push(Some(e)),
        }
    }
    (doc, errors)
}
