//! Hand-skeleton data model and the wrist-relative feature transform.
//!
//! A [`HandFrame`] carries the pose of the 11 tracked joints of one hand.
//! [`extract_features`] turns a window of [`WINDOW_LEN`] frames into the
//! `(T, J, D)` tensor consumed by the recognizer: for every joint, its
//! position and orientation expressed in the wrist's local frame.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frames per feature window (T).
pub const WINDOW_LEN: usize = 20;
/// Tracked joints per hand (J).
pub const NUM_JOINTS: usize = 11;
/// Features per joint (D): relative position (3) + relative quaternion (4).
pub const FEATURE_DIM: usize = 7;
/// Native capture rate of the headset hand tracker.
pub const FRAME_RATE_HZ: f64 = 72.0;

const QUAT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("expected {expected} frames, got {got}")]
    WrongFrameCount { expected: usize, got: usize },
    #[error("window mixes left- and right-hand frames")]
    MixedHandedness,
    #[error("timestamps not strictly increasing at frame {index}")]
    NonMonotoneTimestamps { index: usize },
    #[error("frame is already right-handed")]
    AlreadyRight,
    #[error("need at least 2 frames to resample, got {0}")]
    TooFewFrames(usize),
    #[error("target rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("non-finite joint position")]
    NonFinitePosition,
    #[error("quaternion norm {0} is not within tolerance of 1")]
    NonUnitQuaternion(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn code(self) -> char {
        match self {
            Handedness::Left => 'L',
            Handedness::Right => 'R',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'L' => Some(Handedness::Left),
            'R' => Some(Handedness::Right),
            _ => None,
        }
    }
}

/// The tracked joints, in storage order. Index 0 is the wrist root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum Joint {
    Wrist = 0,
    ThumbTip,
    ThumbBelowTip,
    IndexTip,
    IndexBelowTip,
    MiddleTip,
    MiddleBelowTip,
    RingTip,
    RingBelowTip,
    PinkyTip,
    PinkyBelowTip,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::Wrist,
        Joint::ThumbTip,
        Joint::ThumbBelowTip,
        Joint::IndexTip,
        Joint::IndexBelowTip,
        Joint::MiddleTip,
        Joint::MiddleBelowTip,
        Joint::RingTip,
        Joint::RingBelowTip,
        Joint::PinkyTip,
        Joint::PinkyBelowTip,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Wrist => "Wrist",
            Joint::ThumbTip => "ThumbTip",
            Joint::ThumbBelowTip => "ThumbBelowTip",
            Joint::IndexTip => "IndexTip",
            Joint::IndexBelowTip => "IndexBelowTip",
            Joint::MiddleTip => "MiddleTip",
            Joint::MiddleBelowTip => "MiddleBelowTip",
            Joint::RingTip => "RingTip",
            Joint::RingBelowTip => "RingBelowTip",
            Joint::PinkyTip => "PinkyTip",
            Joint::PinkyBelowTip => "PinkyBelowTip",
        }
    }

    /// Joint names in storage order, as written into file headers.
    pub fn ordering() -> Vec<&'static str> {
        Joint::ALL.iter().map(|j| j.name()).collect()
    }
}

/// Position (meters, tracking space) and unit orientation of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl JointPose {
    /// Builds a pose, normalizing the quaternion `(w, x, y, z)`.
    pub fn new(position: Vector3<f64>, wxyz: [f64; 4]) -> Result<Self, SkeletonError> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(SkeletonError::NonFinitePosition);
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(SkeletonError::NonUnitQuaternion(norm));
        }
        Ok(Self {
            position,
            orientation: UnitQuaternion::new_normalize(q),
        })
    }

    /// Builds a pose from stored values without renormalizing, so that
    /// deserialized values are kept bit for bit.
    pub fn from_raw(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self, SkeletonError> {
        let position = Vector3::from(position);
        if !position.iter().all(|v| v.is_finite()) {
            return Err(SkeletonError::NonFinitePosition);
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(SkeletonError::NonUnitQuaternion(norm));
        }
        Ok(Self {
            position,
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn from_parts(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// The 7 stored values: `x, y, z, qw, qx, qy, qz`.
    pub fn to_array(&self) -> [f64; 7] {
        let [w, x, y, z] = self.wxyz();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            w,
            x,
            y,
            z,
        ]
    }

    /// Rounds every component to `f32` precision, the storage precision of
    /// dataset files.
    pub fn quantized(&self) -> Self {
        let a = self.to_array().map(|v| v as f32 as f64);
        Self {
            position: Vector3::new(a[0], a[1], a[2]),
            orientation: UnitQuaternion::new_unchecked(Quaternion::new(a[3], a[4], a[5], a[6])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    pub timestamp: f64,
    pub handedness: Handedness,
    pub joints: [JointPose; NUM_JOINTS],
}

impl HandFrame {
    pub fn joint(&self, joint: Joint) -> &JointPose {
        &self.joints[joint.index()]
    }

    pub fn wrist(&self) -> &JointPose {
        &self.joints[0]
    }

    /// Position of `joint` expressed in the wrist's local frame.
    pub fn local_position(&self, joint: Joint) -> Vector3<f64> {
        let w = self.wrist();
        w.orientation
            .inverse_transform_vector(&(self.joint(joint).position - w.position))
    }

    pub fn distance(&self, a: Joint, b: Joint) -> f64 {
        (self.joint(a).position - self.joint(b).position).norm()
    }

    /// Applies a rigid motion (rotate, then translate) to every joint.
    pub fn transformed(&self, rotation: &UnitQuaternion<f64>, translation: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for pose in out.joints.iter_mut() {
            pose.position = rotation * pose.position + translation;
            pose.orientation = rotation * pose.orientation;
        }
        out
    }

    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for pose in out.joints.iter_mut() {
            *pose = pose.quantized();
        }
        out
    }
}

/// A `(T, J, D)` feature tensor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    data: Vec<f64>,
}

impl FeatureWindow {
    pub const SHAPE: (usize, usize, usize) = (WINDOW_LEN, NUM_JOINTS, FEATURE_DIM);

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; WINDOW_LEN * NUM_JOINTS * FEATURE_DIM],
        }
    }

    /// Wraps a flat buffer; `None` if its length does not match the shape.
    pub fn from_vec(data: Vec<f64>) -> Option<Self> {
        (data.len() == WINDOW_LEN * NUM_JOINTS * FEATURE_DIM).then_some(Self { data })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize, j: usize) -> &[f64] {
        let start = (t * NUM_JOINTS + j) * FEATURE_DIM;
        &self.data[start..start + FEATURE_DIM]
    }
}

/// The wrist row of every feature window: zero offset, identity rotation.
pub const WRIST_ROW: [f64; FEATURE_DIM] = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];

fn relative_row(wrist: &JointPose, joint: &JointPose) -> [f64; FEATURE_DIM] {
    let inv = wrist.orientation.inverse();
    let p = inv * (joint.position - wrist.position);
    let q = (inv * joint.orientation).into_inner();
    // q and -q are the same rotation; keep w >= 0
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [p.x, p.y, p.z, s * q.w, s * q.i, s * q.j, s * q.k]
}

fn check_window(frames: &[HandFrame], expected: usize) -> Result<(), SkeletonError> {
    if frames.len() != expected {
        return Err(SkeletonError::WrongFrameCount {
            expected,
            got: frames.len(),
        });
    }
    let hand = frames[0].handedness;
    if frames.iter().any(|f| f.handedness != hand) {
        return Err(SkeletonError::MixedHandedness);
    }
    for (i, pair) in frames.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(SkeletonError::NonMonotoneTimestamps { index: i + 1 });
        }
    }
    Ok(())
}

/// Wrist-relative features of one frame, joint-major.
pub fn frame_features(frame: &HandFrame) -> [f64; NUM_JOINTS * FEATURE_DIM] {
    let mut out = [0.0; NUM_JOINTS * FEATURE_DIM];
    out[..FEATURE_DIM].copy_from_slice(&WRIST_ROW);
    let wrist = frame.wrist();
    for j in 1..NUM_JOINTS {
        out[j * FEATURE_DIM..(j + 1) * FEATURE_DIM].copy_from_slice(&relative_row(wrist, &frame.joints[j]));
    }
    out
}

/// Converts exactly [`WINDOW_LEN`] frames into wrist-relative features.
pub fn extract_features(frames: &[HandFrame]) -> Result<FeatureWindow, SkeletonError> {
    check_window(frames, WINDOW_LEN)?;
    let mut data = Vec::with_capacity(WINDOW_LEN * NUM_JOINTS * FEATURE_DIM);
    for frame in frames {
        data.extend_from_slice(&frame_features(frame));
    }
    Ok(FeatureWindow { data })
}

// Reflection across the wrist frame's x = 0 plane, as a rotation conjugate:
// M R M with M = diag(-1, 1, 1) maps (w, x, y, z) to (w, x, -y, -z).
fn reflect_rotation(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let q = q.quaternion();
    UnitQuaternion::new_unchecked(Quaternion::new(q.w, q.i, -q.j, -q.k))
}

/// Mirrors a frame across the x = 0 plane of its wrist frame and flips its
/// handedness. Applying it twice returns the original frame.
pub fn mirror(frame: &HandFrame) -> HandFrame {
    let wrist = *frame.wrist();
    let mut out = frame.clone();
    out.handedness = match frame.handedness {
        Handedness::Left => Handedness::Right,
        Handedness::Right => Handedness::Left,
    };
    for (dst, src) in out.joints.iter_mut().zip(frame.joints.iter()).skip(1) {
        let mut local = wrist
            .orientation
            .inverse_transform_vector(&(src.position - wrist.position));
        local.x = -local.x;
        dst.position = wrist.position + wrist.orientation * local;
        let rel = wrist.orientation.inverse() * src.orientation;
        dst.orientation = wrist.orientation * reflect_rotation(&rel);
    }
    out
}

/// Canonicalizes a left-hand frame into right-hand coordinates.
pub fn mirror_to_right(frame: &HandFrame) -> Result<HandFrame, SkeletonError> {
    match frame.handedness {
        Handedness::Right => Err(SkeletonError::AlreadyRight),
        Handedness::Left => Ok(mirror(frame)),
    }
}

fn interpolate(a: &HandFrame, b: &HandFrame, t: f64, timestamp: f64) -> HandFrame {
    let mut out = a.clone();
    out.timestamp = timestamp;
    if t == 0.0 {
        return out;
    }
    for (dst, (pa, pb)) in out.joints.iter_mut().zip(a.joints.iter().zip(b.joints.iter())) {
        dst.position = pa.position.lerp(&pb.position, t);
        dst.orientation = pa
            .orientation
            .try_slerp(&pb.orientation, t, 1e-12)
            .unwrap_or(pa.orientation);
    }
    out
}

/// Resamples a clip to a uniform `target_rate` grid starting at the first
/// timestamp and covering the original span. Positions are linearly
/// interpolated and orientations slerped.
pub fn resample_clip(frames: &[HandFrame], target_rate: f64) -> Result<Vec<HandFrame>, SkeletonError> {
    if frames.len() < 2 {
        return Err(SkeletonError::TooFewFrames(frames.len()));
    }
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(SkeletonError::NonPositiveRate(target_rate));
    }
    for (i, pair) in frames.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(SkeletonError::NonMonotoneTimestamps { index: i + 1 });
        }
    }
    let t0 = frames[0].timestamp;
    let span = frames[frames.len() - 1].timestamp - t0;
    let steps = span * target_rate;
    let count = if (steps - steps.round()).abs() < 1e-6 {
        steps.round() as usize
    } else {
        steps.floor() as usize
    } + 1;

    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let ts = t0 + k as f64 / target_rate;
        while seg + 2 < frames.len() && frames[seg + 1].timestamp <= ts {
            seg += 1;
        }
        let (a, b) = (&frames[seg], &frames[seg + 1]);
        let frac = ((ts - a.timestamp) / (b.timestamp - a.timestamp)).clamp(0.0, 1.0);
        // snap grid points that coincide with a source sample
        let (a, b, frac) = if (frac - 1.0).abs() < 1e-9 {
            (b, b, 0.0)
        } else if frac.abs() < 1e-9 {
            (a, a, 0.0)
        } else {
            (a, b, frac)
        };
        out.push(interpolate(a, b, frac, ts));
    }
    Ok(out)
}
