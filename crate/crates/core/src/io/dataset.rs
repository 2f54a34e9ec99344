//! `.mgd` dataset container.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_preamble, write_atomic, write_preamble, Cursor, IoError};
use crate::gesture::{GestureClass, SubState};
use crate::skeleton::{HandFrame, Handedness, JointPose, Joint, FRAME_RATE_HZ, NUM_JOINTS};
use crate::synth::{Dataset, LabeledClip};

pub const MAGIC: &[u8; 4] = b"MGXD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub frame_rate_hz: f64,
    pub joints: Vec<String>,
    pub classes: Vec<String>,
    pub seed: u64,
    pub clips: usize,
}

impl DatasetHeader {
    fn for_dataset(ds: &Dataset) -> Self {
        Self {
            frame_rate_hz: FRAME_RATE_HZ,
            joints: Joint::ordering().into_iter().map(String::from).collect(),
            classes: GestureClass::names().into_iter().map(String::from).collect(),
            seed: ds.seed,
            clips: ds.clips.len(),
        }
    }
}

fn push_frame(out: &mut Vec<u8>, f: &HandFrame) {
    out.extend_from_slice(&f.timestamp.to_le_bytes());
    out.push(f.handedness.code() as u8);
    for j in &f.joints {
        for v in j.to_array() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

fn encode_clip(c: &LabeledClip) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&c.subject_id.to_le_bytes());
    out.push(c.gesture.index() as u8);
    out.extend_from_slice(&c.duration.to_le_bytes());
    out.extend_from_slice(&(c.frames.len() as u32).to_le_bytes());
    for f in &c.frames {
        push_frame(&mut out, f);
    }
    out.extend(c.substates.iter().map(|s| s.value()));
    out
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    let header = serde_json::to_value(DatasetHeader::for_dataset(ds)).unwrap();
    write_preamble(&mut out, MAGIC, VERSION, &header);
    for c in &ds.clips {
        let body = encode_clip(c);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
    out
}

pub(crate) fn read_frame(cur: &mut Cursor) -> Result<HandFrame, String> {
    let timestamp = cur.f64().ok_or("truncated frame")?;
    let hand = cur.u8().ok_or("truncated frame")?;
    let handedness = Handedness::from_code(hand as char).ok_or(format!("bad handedness byte {hand}"))?;
    let mut joints = [JointPose::from_raw([0.0; 3], [1.0, 0.0, 0.0, 0.0]).unwrap(); NUM_JOINTS];
    for j in joints.iter_mut() {
        let mut v = [0.0f64; 7];
        for x in v.iter_mut() {
            *x = cur.f32().ok_or("truncated frame")? as f64;
        }
        *j = JointPose::from_raw([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]]).map_err(|e| e.to_string())?;
    }
    Ok(HandFrame {
        timestamp,
        handedness,
        joints,
    })
}

fn decode_clip(body: &[u8]) -> Result<LabeledClip, String> {
    let mut cur = Cursor::new(body);
    let subject_id = cur.u32().ok_or("truncated")?;
    let g = cur.u8().ok_or("truncated")?;
    let gesture = GestureClass::from_index(g as usize).ok_or(format!("bad class {g}"))?;
    let duration = cur.f64().ok_or("truncated")?;
    let n = cur.u32().ok_or("truncated")? as usize;
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        frames.push(read_frame(&mut cur)?);
    }
    let raw = cur.take(n).ok_or("truncated sub-states")?;
    let substates = raw
        .iter()
        .map(|&v| SubState::new(v).ok_or(format!("bad sub-state {v}")))
        .collect::<Result<Vec<_>, _>>()?;
    if cur.remaining() != 0 {
        return Err(format!("{} trailing bytes", cur.remaining()));
    }
    Ok(LabeledClip {
        gesture,
        subject_id,
        frames,
        substates,
        duration,
    })
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset, IoError> {
    let mut cur = Cursor::new(bytes);
    let header: DatasetHeader = read_preamble(&mut cur, MAGIC, "dataset", VERSION)?;
    if header.joints != Joint::ordering() {
        return Err(IoError::JointOrderMismatch);
    }
    if header.classes != GestureClass::names() {
        return Err(IoError::Header("class names differ".into()));
    }
    let mut clips = Vec::with_capacity(header.clips);
    for index in 0..header.clips {
        let corrupt = |reason: String| IoError::CorruptRecord { index, reason };
        let len = cur.u32().ok_or_else(|| corrupt("truncated length".into()))? as usize;
        let body = cur.take(len).ok_or_else(|| corrupt("truncated body".into()))?;
        clips.push(decode_clip(body).map_err(corrupt)?);
    }
    if cur.remaining() != 0 {
        return Err(IoError::CorruptRecord {
            index: header.clips,
            reason: format!("{} bytes after the last record", cur.remaining()),
        });
    }
    Ok(Dataset {
        seed: header.seed,
        clips,
    })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_dataset(ds))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    decode_dataset(&std::fs::read(path)?)
}
