//! File formats: datasets (`.mgd`), checkpoints (`.mgc`), session
//! recordings (`.mgs`) and evaluation reports (`.mgr`).

pub mod checkpoint;
pub mod dataset;
pub mod report;
pub mod session;

use std::fs::File;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use report::{emit_report, read_report, write_report, FoldSummary, MetricsReport, ReportFormat};
pub use session::{decode_session, encode_session, read_session, write_session, SessionRecording};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a {0} file")]
    BadMagic(&'static str),
    #[error("format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("bad header: {0}")]
    Header(String),
    #[error("joint order in file does not match this build")]
    JointOrderMismatch,
    #[error("record {index} is corrupt: {reason}")]
    CorruptRecord { index: usize, reason: String },
    #[error("content hash does not match")]
    HashMismatch,
    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().unwrap())
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.array::<1>().map(|b| b[0])
    }

    pub fn u16(&mut self) -> Option<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn f32(&mut self) -> Option<f32> {
        self.array().map(f32::from_le_bytes)
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

/// `magic`, version, then a length-prefixed JSON header.
pub(crate) fn write_preamble(out: &mut Vec<u8>, magic: &[u8; 4], version: u32, header: &serde_json::Value) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    let json = serde_json::to_vec(header).expect("header serializes");
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
}

pub(crate) fn read_preamble<'a, H: serde::de::DeserializeOwned>(
    cur: &mut Cursor<'a>,
    magic: &[u8; 4],
    kind: &'static str,
    version: u32,
) -> Result<H, IoError> {
    if cur.take(4) != Some(&magic[..]) {
        return Err(IoError::BadMagic(kind));
    }
    let found = cur.u32().ok_or(IoError::BadMagic(kind))?;
    if found != version {
        return Err(IoError::VersionMismatch {
            found,
            expected: version,
        });
    }
    let len = cur.u32().ok_or_else(|| IoError::Header("truncated".into()))? as usize;
    let json = cur.take(len).ok_or_else(|| IoError::Header("truncated".into()))?;
    serde_json::from_slice(json).map_err(|e| IoError::Header(e.to_string()))
}
