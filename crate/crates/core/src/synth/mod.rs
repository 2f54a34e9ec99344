//! Deterministic synthetic gesture data.
//!
//! Every clip is rendered from a timeline of [`Segment`]s by a parametric
//! hand model, placed at a random pose in tracking space, and perturbed by
//! per-subject style offsets and per-frame Gaussian jitter. All randomness
//! flows from explicit seeds, so every generator is a pure function of its
//! arguments.

pub mod hand;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{GestureClass, SubState};
use crate::skeleton::{mirror, HandFrame, Handedness, Joint, JointPose, FRAME_RATE_HZ};
use hand::{HandModel, Pose, Thumb};

/// Length of a static gesture or Null clip.
pub const STATIC_CLIP_SECONDS: f64 = 2.0;
/// Length of a Swipe clip (0% -> 100% -> 0%).
pub const SWIPE_CLIP_SECONDS: f64 = 5.0;
/// Neutral lead-in before a static gesture.
pub const LEAD_IN_SECONDS: f64 = 0.2;
/// Thumb-index distance below which the fingers count as touching.
pub const PINCH_THRESHOLD_M: f64 = 0.015;

const TRANSITION_SECONDS: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("Null clips come from synth_null")]
    NullNotSupportedHere,
    #[error("invalid subject parameters: {0}")]
    InvalidSubject(String),
    #[error("dataset counts must be >= 1")]
    InvalidCount,
}

/// SplitMix64 finalizer; stable across platforms and toolchains.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds several words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6D69_6372_6F47_4558, |acc, &p| mix64(acc ^ mix64(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub subject_id: u32,
    pub finger_length_scale: f64,
    pub pose_jitter_std: f64,
    pub tempo_scale: f64,
    pub rng_seed: u64,
}

impl SubjectParams {
    /// Draws a subject from the population model.
    pub fn sample(subject_id: u32, master_seed: u64) -> Self {
        let rng_seed = derive_seed(&[master_seed, 0x5u64, subject_id as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let scale = Normal::new(1.0, 0.05).unwrap().sample(&mut rng);
        Self {
            subject_id,
            finger_length_scale: f64::clamp(scale, 0.85, 1.15),
            pose_jitter_std: rng.random_range(0.0008..0.0016),
            tempo_scale: rng.random_range(0.85..1.15),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.finger_length_scale > 0.0 && self.tempo_scale > 0.0) {
            return Err(SynthError::InvalidSubject("scales must be positive".into()));
        }
        if !(self.pose_jitter_std >= 0.0) {
            return Err(SynthError::InvalidSubject("jitter must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub gesture: GestureClass,
    pub subject_id: u32,
    pub frames: Vec<HandFrame>,
    pub substates: Vec<SubState>,
    pub duration: f64,
}

impl LabeledClip {
    /// First frame at which the gesture itself (not the neutral lead-in)
    /// is being performed.
    pub fn onset_frame(&self) -> usize {
        if self.gesture.is_static() {
            (LEAD_IN_SECONDS * FRAME_RATE_HZ).round() as usize
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub clips: Vec<LabeledClip>,
}

impl Dataset {
    pub fn subjects(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.clips.iter().map(|c| c.subject_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Per-class clip counts, indexed by [`GestureClass::index`].
    pub fn class_histogram(&self) -> [usize; 8] {
        let mut h = [0; 8];
        for c in &self.clips {
            h[c.gesture.index()] += 1;
        }
        h
    }
}

/// What the hand does during one timeline segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// Relaxed resting hand.
    Rest,
    /// Rest with slow wandering finger curls.
    Drift,
    /// Canonical pose of a static gesture.
    Hold { gesture: GestureClass },
    /// Thumb slides linearly from `from` to `to` along the index finger.
    Sweep { from: f64, to: f64 },
    /// Thumb slides 0 -> 1 -> 0 over the segment.
    SwipeCycle,
    /// Thumb pressed against the index tip, other fingers relaxed.
    Pinch,
    /// Fist with the thumb extended (menu trigger on the left hand).
    ThumbUp,
    /// Open hand with spread fingers (menu confirm on the left hand).
    Spread,
}

impl Action {
    fn style_key(&self) -> u64 {
        match self {
            Action::Rest | Action::Drift => 100,
            Action::Hold { gesture } => gesture.index() as u64,
            Action::Sweep { .. } | Action::SwipeCycle => GestureClass::Swipe.index() as u64,
            Action::Pinch => 101,
            Action::ThumbUp => 102,
            Action::Spread => 103,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub action: Action,
    pub duration: f64,
    /// Blend time from the previous segment's final pose.
    #[serde(default = "default_transition")]
    pub transition: f64,
    /// Wrist roll about the finger axis, radians.
    #[serde(default)]
    pub roll: f64,
}

fn default_transition() -> f64 {
    TRANSITION_SECONDS
}

impl Segment {
    pub fn new(action: Action, duration: f64) -> Self {
        Self {
            action,
            duration,
            transition: TRANSITION_SECONDS,
            roll: 0.0,
        }
    }

    pub fn with_transition(mut self, transition: f64) -> Self {
        self.transition = transition;
        self
    }

    pub fn with_roll(mut self, roll: f64) -> Self {
        self.roll = roll;
        self
    }
}

fn canonical_pose(gesture: GestureClass) -> Pose {
    let free = |x, y, z| Thumb::Free(Vector3::new(x, y, z));
    match gesture {
        GestureClass::Scissor => Pose {
            curl: [0.02, 0.02, 1.0, 1.0],
            spread: [0.04, -0.04, -0.05, -0.10],
            thumb: free(-0.005, 0.065, -0.045),
        },
        GestureClass::Ring => Pose {
            curl: [0.55, 0.08, 0.10, 0.12],
            spread: [0.05, 0.0, -0.08, -0.18],
            thumb: Thumb::OnIndex {
                u: 0.0,
                lateral: 0.004,
                palmar: 0.007,
            },
        },
        GestureClass::Open => Pose {
            curl: [0.0, 0.0, 0.02, 0.03],
            spread: [0.26, 0.06, -0.14, -0.34],
            thumb: free(0.085, 0.075, 0.0),
        },
        GestureClass::Fist => Pose {
            curl: [1.0, 1.0, 1.0, 1.0],
            spread: [0.05, 0.0, -0.05, -0.10],
            thumb: free(0.005, 0.068, -0.050),
        },
        GestureClass::Vertical => Pose {
            curl: [0.0, 0.0, 0.0, 0.0],
            spread: [0.03, 0.0, -0.03, -0.06],
            thumb: free(0.040, 0.115, 0.0),
        },
        GestureClass::Pinky => Pose {
            curl: [1.0, 1.0, 1.0, 0.0],
            spread: [0.05, 0.0, -0.05, -0.22],
            thumb: free(0.008, 0.072, -0.050),
        },
        GestureClass::Swipe => swipe_pose(0.0),
        GestureClass::Null => Pose::neutral(),
    }
}

fn swipe_pose(u: f64) -> Pose {
    Pose {
        curl: [0.20, 0.90, 0.95, 1.0],
        spread: [0.08, 0.0, -0.05, -0.10],
        thumb: Thumb::OnIndex {
            u,
            lateral: 0.0095,
            palmar: 0.003,
        },
    }
}

fn pinch_pose() -> Pose {
    Pose {
        curl: [0.40, 0.38, 0.40, 0.42],
        spread: [0.05, 0.0, -0.05, -0.10],
        thumb: Thumb::OnIndex {
            u: 0.0,
            lateral: 0.003,
            palmar: 0.006,
        },
    }
}

fn thumb_up_pose() -> Pose {
    Pose {
        curl: [1.0, 1.0, 1.0, 1.0],
        spread: [0.05, 0.0, -0.05, -0.10],
        thumb: Thumb::Free(Vector3::new(0.080, 0.065, 0.0)),
    }
}

/// Small pose perturbation: a subject's habitual style or a single
/// repetition's variation.
#[derive(Debug, Clone, Copy, Default)]
struct PoseOffset {
    curl: [f64; 4],
    spread: [f64; 4],
    thumb: Vector3<f64>,
    thumb_on_index: f64,
}

impl PoseOffset {
    fn draw<R: Rng>(rng: &mut R, curl_std: f64, spread_std: f64, thumb_std: f64) -> Self {
        let n = |rng: &mut R, s: f64| Normal::new(0.0, s).unwrap().sample(rng);
        Self {
            curl: std::array::from_fn(|_| n(rng, curl_std)),
            spread: std::array::from_fn(|_| n(rng, spread_std)),
            thumb: Vector3::new(n(rng, thumb_std), n(rng, thumb_std), n(rng, thumb_std)),
            thumb_on_index: n(rng, thumb_std * 0.25),
        }
    }

    fn add(&self, other: &PoseOffset) -> PoseOffset {
        PoseOffset {
            curl: std::array::from_fn(|i| self.curl[i] + other.curl[i]),
            spread: std::array::from_fn(|i| self.spread[i] + other.spread[i]),
            thumb: self.thumb + other.thumb,
            thumb_on_index: self.thumb_on_index + other.thumb_on_index,
        }
    }

    fn apply(&self, pose: Pose) -> Pose {
        let mut out = pose;
        for i in 0..4 {
            out.curl[i] = (pose.curl[i] + self.curl[i]).clamp(0.0, 1.05);
            out.spread[i] = pose.spread[i] + self.spread[i];
        }
        out.thumb = match pose.thumb {
            Thumb::Free(p) => Thumb::Free(p + self.thumb),
            Thumb::OnIndex { u, lateral, palmar } => Thumb::OnIndex {
                u,
                lateral: (lateral + self.thumb_on_index).max(0.001),
                palmar: (palmar + self.thumb_on_index).max(0.0),
            },
        };
        out
    }
}

fn subject_style(subject: &SubjectParams, key: u64) -> PoseOffset {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[subject.rng_seed, 0x57, key]));
    PoseOffset::draw(&mut rng, 0.04, 0.03, 0.003)
}

struct Plan {
    segment: Segment,
    offset: PoseOffset,
    phase: f64,
    drift_freq: [f64; 4],
    drift_phase: [f64; 4],
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Renders a segment timeline into hand frames.
pub struct Performer {
    subject: SubjectParams,
    model: HandModel,
}

impl Performer {
    pub fn new(subject: SubjectParams) -> Self {
        Self {
            model: HandModel::new(subject.finger_length_scale),
            subject,
        }
    }

    fn pose_at(&self, plan: &Plan, tau: f64) -> Pose {
        let seg = &plan.segment;
        let tempo = self.subject.tempo_scale;
        let base = match seg.action {
            Action::Rest => {
                let mut p = Pose::neutral();
                let b = 0.02 * (std::f64::consts::TAU * 0.3 * tau + plan.phase).sin();
                p.curl.iter_mut().for_each(|c| *c += b);
                p
            }
            Action::Drift => {
                let mut p = Pose::neutral();
                for i in 0..4 {
                    p.curl[i] += 0.15
                        * (std::f64::consts::TAU * plan.drift_freq[i] * tau + plan.drift_phase[i]).sin();
                }
                if let Thumb::Free(ref mut t) = p.thumb {
                    t.z -= 0.008 * (std::f64::consts::TAU * plan.drift_freq[0] * tau).sin().abs();
                }
                p
            }
            Action::Hold { gesture } => {
                let mut p = canonical_pose(gesture);
                if gesture == GestureClass::Scissor {
                    let osc = 0.5 * (1.0 - (std::f64::consts::TAU * 2.0 / tempo * tau).cos());
                    p.spread[0] += 0.16 * osc;
                    p.spread[1] -= 0.16 * osc;
                }
                p
            }
            Action::Sweep { from, to } => {
                let x = if seg.duration > 0.0 { tau / seg.duration } else { 1.0 };
                swipe_pose(from + (to - from) * x.clamp(0.0, 1.0))
            }
            Action::SwipeCycle => {
                let x = if seg.duration > 0.0 { tau / seg.duration } else { 0.0 };
                swipe_pose(1.0 - (1.0 - 2.0 * x.clamp(0.0, 1.0)).abs())
            }
            Action::Pinch => pinch_pose(),
            Action::ThumbUp => thumb_up_pose(),
            Action::Spread => canonical_pose(GestureClass::Open),
        };
        plan.offset.apply(base)
    }

    /// Renders `n_frames` frames at 72 Hz starting at `t0`. Segments are
    /// laid end to end; the last one is extended if the timeline is short.
    pub fn perform(
        &self,
        segments: &[Segment],
        initial: Option<Segment>,
        n_frames: usize,
        t0: f64,
        handedness: Handedness,
        seed: u64,
    ) -> Vec<HandFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = |rng: &mut ChaCha8Rng, segment: Segment| Plan {
            offset: subject_style(&self.subject, segment.action.style_key())
                .add(&PoseOffset::draw(rng, 0.02, 0.015, 0.0015)),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            drift_freq: std::array::from_fn(|_| rng.random_range(0.2..0.6)),
            drift_phase: std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU)),
            segment,
        };
        let initial_plan = plan(&mut rng, initial.unwrap_or(Segment::new(Action::Rest, 0.0)));
        let plans: Vec<Plan> = segments.iter().map(|s| plan(&mut rng, *s)).collect();

        // placement of the hand in tracking space
        let base_pos = Vector3::new(
            rng.random_range(-0.15..0.15),
            rng.random_range(0.9..1.2),
            rng.random_range(0.25..0.45),
        );
        let base_rot = if handedness == Handedness::Left {
            // the menu reads roll relative to the tracking frame
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
            ))
        };
        let sway_phase: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
        let jitter = Normal::new(0.0, self.subject.pose_jitter_std.max(1e-12)).unwrap();
        let ang = Normal::new(0.0, 0.008).unwrap();

        let mut starts = Vec::with_capacity(plans.len());
        let mut acc = 0.0;
        for p in &plans {
            starts.push(acc);
            acc += p.segment.duration;
        }

        let mut frames = Vec::with_capacity(n_frames);
        for k in 0..n_frames {
            let t = k as f64 / FRAME_RATE_HZ;
            let idx = match starts.iter().rposition(|&s| s <= t + 1e-12) {
                Some(i) => i,
                None => 0,
            };
            let (cur, start) = match plans.get(idx) {
                Some(p) => (p, starts[idx]),
                None => (&initial_plan, 0.0),
            };
            let tau = t - start;
            let (prev, prev_tau, prev_roll) = if idx == 0 {
                (&initial_plan, 0.0, initial_plan.segment.roll)
            } else {
                let p = &plans[idx - 1];
                (p, p.segment.duration, p.segment.roll)
            };
            let to = self.pose_at(cur, tau);
            let from = self.pose_at(prev, prev_tau);
            let s = if cur.segment.transition > 0.0 {
                smoothstep(tau / cur.segment.transition)
            } else {
                1.0
            };
            let local = self.model.render(&from, &to, s);
            let roll = prev_roll + (cur.segment.roll - prev_roll) * s;

            let sway = Vector3::new(
                0.003 * (0.7 * t + sway_phase[0]).sin(),
                0.003 * (0.5 * t + sway_phase[1]).sin(),
                0.003 * (0.6 * t + sway_phase[2]).sin(),
            );
            let wrist_pos = base_pos + sway;
            let wrist_rot = base_rot * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), roll);
            let joints: [JointPose; 11] = std::array::from_fn(|j| {
                let (p, q) = local[j];
                let noise = Vector3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng));
                let wobble = UnitQuaternion::from_scaled_axis(Vector3::new(
                    ang.sample(&mut rng),
                    ang.sample(&mut rng),
                    ang.sample(&mut rng),
                ));
                let noise = if j == 0 { Vector3::zeros() } else { noise };
                JointPose::from_parts(wrist_pos + wrist_rot * p + noise, wrist_rot * q * wobble)
            });
            let frame = HandFrame {
                timestamp: t0 + t,
                handedness: Handedness::Right,
                joints,
            };
            let frame = match handedness {
                Handedness::Right => frame,
                Handedness::Left => mirror(&frame),
            };
            frames.push(frame.quantized());
        }
        frames
    }
}

fn frames_for(seconds: f64) -> usize {
    (seconds * FRAME_RATE_HZ).round() as usize
}

/// Renders one repetition of a command gesture.
pub fn synth_clip(gesture: GestureClass, subject: &SubjectParams, seed: u64) -> Result<LabeledClip, SynthError> {
    subject.validate()?;
    let performer = Performer::new(*subject);
    let (segments, initial, duration) = match gesture {
        GestureClass::Null => return Err(SynthError::NullNotSupportedHere),
        GestureClass::Swipe => (
            vec![Segment::new(Action::SwipeCycle, SWIPE_CLIP_SECONDS).with_transition(LEAD_IN_SECONDS)],
            None,
            SWIPE_CLIP_SECONDS,
        ),
        g => (
            vec![
                Segment::new(Action::Rest, LEAD_IN_SECONDS).with_transition(0.0),
                Segment::new(Action::Hold { gesture: g }, STATIC_CLIP_SECONDS - LEAD_IN_SECONDS)
                    .with_transition(TRANSITION_SECONDS * subject.tempo_scale),
            ],
            None,
            STATIC_CLIP_SECONDS,
        ),
    };
    let frames = performer.perform(&segments, initial, frames_for(duration), 0.0, Handedness::Right, seed);
    Ok(finish_clip(gesture, subject.subject_id, frames, duration))
}

/// Which flavor of non-intentional movement a Null clip shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullKind {
    Rest,
    Drift,
    IncidentalPinch,
}

impl NullKind {
    /// 50% rest, 30% drift, 20% incidental pinch.
    pub fn for_seed(seed: u64) -> Self {
        let x = mix64(seed ^ 0x4E55_4C4C) % 10;
        match x {
            0..=4 => NullKind::Rest,
            5..=7 => NullKind::Drift,
            _ => NullKind::IncidentalPinch,
        }
    }
}

/// Renders a Null clip of the kind selected by the seed.
pub fn synth_null(subject: &SubjectParams, seed: u64) -> Result<LabeledClip, SynthError> {
    synth_null_kind(subject, seed, NullKind::for_seed(seed))
}

pub fn synth_null_kind(subject: &SubjectParams, seed: u64, kind: NullKind) -> Result<LabeledClip, SynthError> {
    subject.validate()?;
    let performer = Performer::new(*subject);
    let segments = match kind {
        NullKind::Rest => vec![Segment::new(Action::Rest, STATIC_CLIP_SECONDS).with_transition(0.0)],
        NullKind::Drift => vec![Segment::new(Action::Drift, STATIC_CLIP_SECONDS).with_transition(0.0)],
        NullKind::IncidentalPinch => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x9]));
            let before = rng.random_range(0.4..1.3);
            // contact lasts well under the recognizer's persistence window
            vec![
                Segment::new(Action::Rest, before).with_transition(0.0),
                Segment::new(Action::Pinch, 0.10).with_transition(0.06),
                Segment::new(Action::Rest, STATIC_CLIP_SECONDS).with_transition(0.06),
            ]
        }
    };
    let frames = performer.perform(
        &segments,
        None,
        frames_for(STATIC_CLIP_SECONDS),
        0.0,
        Handedness::Right,
        seed,
    );
    Ok(finish_clip(GestureClass::Null, subject.subject_id, frames, STATIC_CLIP_SECONDS))
}

fn finish_clip(gesture: GestureClass, subject_id: u32, frames: Vec<HandFrame>, duration: f64) -> LabeledClip {
    let substates = substates_for(gesture, &frames);
    LabeledClip {
        gesture,
        subject_id,
        frames,
        substates,
        duration,
    }
}

/// Normalized position of the thumb tip projected onto the segment from
/// IndexTip (0) to IndexBelowTip (1).
pub fn thumb_progress(frame: &HandFrame) -> f64 {
    let tip = frame.joint(Joint::IndexTip).position;
    let below = frame.joint(Joint::IndexBelowTip).position;
    let thumb = frame.joint(Joint::ThumbTip).position;
    let seg = below - tip;
    let len2 = seg.norm_squared();
    if len2 == 0.0 {
        return 0.0;
    }
    ((thumb - tip).dot(&seg) / len2).clamp(0.0, 1.0)
}

fn substates_for(gesture: GestureClass, frames: &[HandFrame]) -> Vec<SubState> {
    if gesture != GestureClass::Swipe {
        return vec![SubState::NONE; frames.len()];
    }
    frames
        .iter()
        .map(|f| SubState::from_progress(thumb_progress(f)))
        .collect()
}

/// Recomputes the per-frame sub-state labels of a clip from its geometry.
pub fn label_substates(clip: &LabeledClip) -> Vec<SubState> {
    substates_for(clip.gesture, &clip.frames)
}

/// Seed of one clip, derived from the dataset seed and the clip's identity.
pub fn clip_seed(master_seed: u64, subject_id: u32, gesture: GestureClass, rep: u32) -> u64 {
    derive_seed(&[master_seed, subject_id as u64, gesture.index() as u64, rep as u64])
}

/// Generates `n_subjects x (7 x reps_per_gesture + null_reps)` clips,
/// ordered by subject, then gesture, then repetition.
pub fn make_dataset(n_subjects: u32, reps_per_gesture: u32, null_reps: u32, seed: u64) -> Result<Dataset, SynthError> {
    if n_subjects == 0 || reps_per_gesture == 0 || null_reps == 0 {
        return Err(SynthError::InvalidCount);
    }
    let mut clips = Vec::with_capacity((n_subjects * (7 * reps_per_gesture + null_reps)) as usize);
    for sid in 0..n_subjects {
        let subject = SubjectParams::sample(sid, seed);
        for g in GestureClass::COMMANDS {
            for rep in 0..reps_per_gesture {
                clips.push(synth_clip(g, &subject, clip_seed(seed, sid, g, rep))?);
            }
        }
        for rep in 0..null_reps {
            clips.push(synth_null(&subject, clip_seed(seed, sid, GestureClass::Null, rep))?);
        }
    }
    Ok(Dataset { seed, clips })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject() -> SubjectParams {
        SubjectParams::sample(3, 42)
    }

    fn palm_center(frame: &HandFrame, scale: f64) -> Vector3<f64> {
        let w = frame.wrist();
        w.position + w.orientation * (Vector3::from(hand::PALM_CENTER) * scale)
    }

    #[test]
    fn clip_lengths() {
        let s = subject();
        for g in GestureClass::COMMANDS {
            let clip = synth_clip(g, &s, 7).unwrap();
            let want = if g == GestureClass::Swipe { 360 } else { 144 };
            assert_eq!(clip.frames.len(), want, "{g}");
            assert_eq!(clip.substates.len(), want);
        }
        assert_eq!(synth_null(&s, 1).unwrap().frames.len(), 144);
        assert_eq!(
            synth_clip(GestureClass::Null, &s, 1),
            Err(SynthError::NullNotSupportedHere)
        );
    }

    #[test]
    fn deterministic() {
        let s = subject();
        let a = synth_clip(GestureClass::Fist, &s, 1).unwrap();
        let b = synth_clip(GestureClass::Fist, &s, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(synth_null(&s, 9).unwrap(), synth_null(&s, 9).unwrap());
        assert_ne!(a, synth_clip(GestureClass::Fist, &s, 2).unwrap());
    }

    #[test]
    fn open_fingertips_are_farther_from_palm_than_fist() {
        let tips = [
            Joint::ThumbTip,
            Joint::IndexTip,
            Joint::MiddleTip,
            Joint::RingTip,
            Joint::PinkyTip,
        ];
        for sid in 0..5 {
            let s = SubjectParams::sample(sid, 1);
            let open = synth_clip(GestureClass::Open, &s, 3).unwrap();
            let fist = synth_clip(GestureClass::Fist, &s, 3).unwrap();
            let mean_dist = |clip: &LabeledClip, j: Joint| {
                let hold = &clip.frames[60..];
                hold.iter()
                    .map(|f| (f.joint(j).position - palm_center(f, s.finger_length_scale)).norm())
                    .sum::<f64>()
                    / hold.len() as f64
            };
            for j in tips {
                let d = mean_dist(&open, j) - mean_dist(&fist, j);
                assert!(d >= 0.02, "subject {sid} {j:?}: {d}");
            }
        }
    }

    #[test]
    fn swipe_sweeps_out_and_back() {
        let clip = synth_clip(GestureClass::Swipe, &subject(), 5).unwrap();
        let u: Vec<f64> = clip.frames.iter().map(thumb_progress).collect();
        let mean = |r: std::ops::Range<usize>| u[r.clone()].iter().sum::<f64>() / r.len() as f64;
        assert!(mean(20..30) < 0.2);
        assert!((mean(80..100) - 0.5).abs() < 0.15);
        assert!(mean(175..185) > 0.85);
        assert!((mean(260..280) - 0.5).abs() < 0.15);
        assert!(mean(350..360) < 0.15);
        let states: Vec<u8> = clip.substates.iter().map(|s| s.value()).collect();
        assert!(states.contains(&0) && states.contains(&3));
    }

    #[test]
    fn ideal_swipe_labels_are_monotone() {
        let s = SubjectParams {
            pose_jitter_std: 0.0,
            ..subject()
        };
        let performer = Performer::new(s);
        let mut frames = performer.perform(
            &[Segment::new(Action::SwipeCycle, 359.0 / 72.0).with_transition(0.0)],
            Some(Segment::new(Action::SwipeCycle, 0.0)),
            360,
            0.0,
            Handedness::Right,
            0,
        );
        // remove orientation wobble: rebuild an exactly linear thumb path
        for (k, f) in frames.iter_mut().enumerate() {
            let u = 1.0 - (1.0 - 2.0 * k as f64 / 359.0).abs();
            let tip = f.joint(Joint::IndexTip).position;
            let below = f.joint(Joint::IndexBelowTip).position;
            f.joints[Joint::ThumbTip.index()].position = tip.lerp(&below, u);
        }
        let clip = finish_clip(GestureClass::Swipe, 0, frames, 5.0);
        let labels: Vec<u8> = label_substates(&clip).iter().map(|s| s.value()).collect();
        assert!(labels[..180].windows(2).all(|w| w[0] <= w[1]));
        assert!(labels[180..].windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(labels[0], 0);
        assert_eq!(labels[179], 3);
    }

    #[test]
    fn non_swipe_labels_are_four() {
        let s = subject();
        for g in [GestureClass::Ring, GestureClass::Pinky] {
            let clip = synth_clip(g, &s, 2).unwrap();
            assert!(label_substates(&clip).iter().all(|x| *x == SubState::NONE));
        }
        let n = synth_null(&s, 4).unwrap();
        assert!(n.substates.iter().all(|x| *x == SubState::NONE));
    }

    #[test]
    fn resting_null_keeps_fingers_apart() {
        for sid in 0..10 {
            let s = SubjectParams::sample(sid, 77);
            let clip = synth_null_kind(&s, sid as u64, NullKind::Rest).unwrap();
            let apart = clip
                .frames
                .iter()
                .filter(|f| f.distance(Joint::ThumbTip, Joint::IndexTip) > PINCH_THRESHOLD_M)
                .count();
            assert!(apart as f64 >= 0.9 * clip.frames.len() as f64);
        }
    }

    #[test]
    fn incidental_pinch_is_brief() {
        let s = subject();
        let clip = synth_null_kind(&s, 12, NullKind::IncidentalPinch).unwrap();
        let contact: Vec<bool> = clip
            .frames
            .iter()
            .map(|f| f.distance(Joint::ThumbTip, Joint::IndexTip) < PINCH_THRESHOLD_M)
            .collect();
        let mut longest = 0;
        let mut run = 0;
        for c in contact {
            run = if c { run + 1 } else { 0 };
            longest = longest.max(run);
        }
        assert!(longest >= 1, "pinch never touches");
        // 140 ms at 72 Hz
        assert!(longest < 10, "contact run {longest}");
    }

    #[test]
    fn null_mixture_proportions() {
        let mut counts = [0usize; 3];
        for seed in 0..10_000u64 {
            let i = match NullKind::for_seed(seed) {
                NullKind::Rest => 0,
                NullKind::Drift => 1,
                NullKind::IncidentalPinch => 2,
            };
            counts[i] += 1;
        }
        assert!((counts[0] as f64 / 1e4 - 0.5).abs() < 0.03);
        assert!((counts[1] as f64 / 1e4 - 0.3).abs() < 0.03);
        assert!((counts[2] as f64 / 1e4 - 0.2).abs() < 0.03);
    }

    #[test]
    fn dataset_counts() {
        let d = make_dataset(1, 1, 1, 5).unwrap();
        assert_eq!(d.clips.len(), 8);
        assert_eq!(d.class_histogram(), [1; 8]);
        let d = make_dataset(3, 2, 2, 5).unwrap();
        assert_eq!(d.clips.len(), 3 * (7 * 2 + 2));
        for sid in d.subjects() {
            let mut h = [0; 8];
            for c in d.clips.iter().filter(|c| c.subject_id == sid) {
                h[c.gesture.index()] += 1;
            }
            assert_eq!(h, [2; 8]);
        }
        assert_eq!(make_dataset(0, 1, 1, 0), Err(SynthError::InvalidCount));
    }

    #[test]
    fn frames_are_storage_precision() {
        let clip = synth_clip(GestureClass::Ring, &subject(), 3).unwrap();
        for f in &clip.frames {
            for j in &f.joints {
                for v in j.to_array() {
                    assert_eq!(v, v as f32 as f64);
                }
            }
        }
    }
}
