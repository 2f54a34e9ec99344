//! `.mgs` session recordings: a line-oriented text format.
//!
//! ```text
//! #mgs 1 Wrist,ThumbTip,...
//! F <timestamp> <R|L> <77 floats: x y z qw qx qy qz per joint>
//! E <fired_at> <gesture> <mean_confidence> <sub-state digits or ->
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, IoError};
use crate::gesture::{GestureClass, SubState};
use crate::skeleton::{HandFrame, Handedness, Joint, JointPose, NUM_JOINTS};
use crate::stream::GestureEvent;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionRecording {
    pub frames: Vec<HandFrame>,
    pub events: Vec<GestureEvent>,
}

impl SessionRecording {
    /// Frames of one hand, in recorded order.
    pub fn hand(&self, h: Handedness) -> Vec<HandFrame> {
        self.frames.iter().filter(|f| f.handedness == h).cloned().collect()
    }
}

pub fn encode_session(rec: &SessionRecording) -> String {
    let mut out = format!("#mgs {VERSION} {}\n", Joint::ordering().join(","));
    for f in &rec.frames {
        write!(out, "F {} {}", f.timestamp, f.handedness.code()).unwrap();
        for j in &f.joints {
            for v in j.to_array() {
                write!(out, " {}", v as f32).unwrap();
            }
        }
        out.push('\n');
    }
    for e in &rec.events {
        let trace = match &e.swipe_substate_trace {
            Some(t) if !t.is_empty() => t.iter().map(|s| char::from(b'0' + s.value())).collect(),
            Some(_) => "".to_string(),
            None => "-".to_string(),
        };
        writeln!(out, "E {} {} {} {}", e.fired_at, e.gesture, e.mean_confidence, trace).unwrap();
    }
    out
}

fn parse_frame(fields: &[&str]) -> Result<HandFrame, String> {
    if fields.len() != 2 + NUM_JOINTS * 7 {
        return Err(format!("{} fields, expected {}", fields.len(), 2 + NUM_JOINTS * 7));
    }
    let timestamp: f64 = fields[0].parse().map_err(|e| format!("timestamp: {e}"))?;
    let mut chars = fields[1].chars();
    let handedness = match (chars.next(), chars.next()) {
        (Some(c), None) => Handedness::from_code(c),
        _ => None,
    }
    .ok_or(format!("bad handedness {:?}", fields[1]))?;
    let vals = fields[2..]
        .iter()
        .map(|s| s.parse::<f32>().map(f64::from))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let mut joints = [JointPose::from_raw([0.0; 3], [1.0, 0.0, 0.0, 0.0]).unwrap(); NUM_JOINTS];
    for (j, v) in joints.iter_mut().zip(vals.chunks(7)) {
        *j = JointPose::from_raw([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]]).map_err(|e| e.to_string())?;
    }
    Ok(HandFrame {
        timestamp,
        handedness,
        joints,
    })
}

fn parse_event(fields: &[&str]) -> Result<GestureEvent, String> {
    if !(3..=4).contains(&fields.len()) {
        return Err(format!("{} fields in event", fields.len()));
    }
    let fired_at: f64 = fields[0].parse().map_err(|e| format!("fired_at: {e}"))?;
    let gesture = GestureClass::from_name(fields[1]).ok_or(format!("unknown gesture {}", fields[1]))?;
    let mean_confidence: f64 = fields[2].parse().map_err(|e| format!("confidence: {e}"))?;
    let swipe_substate_trace = match fields.get(3) {
        Some(&"-") => None,
        None => Some(Vec::new()),
        Some(t) => Some(
            t.bytes()
                .map(|b| b.checked_sub(b'0').and_then(SubState::new).ok_or(format!("bad sub-state {:?}", b as char)))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(GestureEvent {
        gesture,
        fired_at,
        mean_confidence,
        swipe_substate_trace,
    })
}

pub fn decode_session(text: &str) -> Result<SessionRecording, IoError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| IoError::Header("empty file".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 3 || parts[0] != "#mgs" {
        return Err(IoError::BadMagic("session"));
    }
    let found: u32 = parts[1].parse().map_err(|_| IoError::Header("bad version".into()))?;
    if found != VERSION {
        return Err(IoError::VersionMismatch {
            found,
            expected: VERSION,
        });
    }
    if parts[2].split(',').collect::<Vec<_>>() != Joint::ordering() {
        return Err(IoError::JointOrderMismatch);
    }
    let mut rec = SessionRecording::default();
    for (index, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let corrupt = |reason: String| IoError::CorruptRecord { index, reason };
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[0] {
            "F" => rec.frames.push(parse_frame(&fields[1..]).map_err(corrupt)?),
            "E" => rec.events.push(parse_event(&fields[1..]).map_err(corrupt)?),
            other => return Err(corrupt(format!("unknown record type {other:?}"))),
        }
    }
    Ok(rec)
}

pub fn write_session(rec: &SessionRecording, path: &Path) -> Result<(), IoError> {
    write_atomic(path, encode_session(rec).as_bytes())
}

pub fn read_session(path: &Path) -> Result<SessionRecording, IoError> {
    decode_session(&std::fs::read_to_string(path)?)
}
