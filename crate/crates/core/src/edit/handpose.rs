//! Pose detectors for the pinch-hold confirm and the left-hand mode menu.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{EditCommand, Granularity};
use crate::skeleton::{mirror, FRAME_RATE_HZ, HandFrame, Handedness, Joint};
use crate::synth::hand::PALM_CENTER;

/// Thumb-index tip distance below which the fingers touch, meters.
pub const PINCH_CONTACT_M: f64 = 0.015;
/// Hold time for a pinch-hold, seconds.
pub const PINCH_HOLD_S: f64 = 2.0;
/// Consecutive frames a menu pose must persist before it counts.
pub const POSE_DEBOUNCE_FRAMES: u8 = 3;

const FINGER_TIPS: [Joint; 4] = [Joint::IndexTip, Joint::MiddleTip, Joint::RingTip, Joint::PinkyTip];
const DURATION_EPS: f64 = 1e-9;

fn in_contact(frame: &HandFrame) -> bool {
    frame.distance(Joint::ThumbTip, Joint::IndexTip) < PINCH_CONTACT_M
}

/// Time covered by a run of frames from `first` to `last` inclusive.
fn run_duration(first: f64, last: f64) -> f64 {
    last - first + 1.0 / FRAME_RATE_HZ
}

/// True if some run of consecutive contact frames lasts at least two
/// seconds (144 frames at 72 Hz).
pub fn detect_pinch_hold(frames: &[HandFrame]) -> bool {
    let mut start: Option<f64> = None;
    for f in frames {
        if in_contact(f) {
            let s = *start.get_or_insert(f.timestamp);
            if run_duration(s, f.timestamp) >= PINCH_HOLD_S - DURATION_EPS {
                return true;
            }
        } else {
            start = None;
        }
    }
    false
}

/// Streaming pinch-hold detector; fires once per contact run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PinchHoldDetector {
    run_start: Option<f64>,
    fired: bool,
}

impl PinchHoldDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn in_contact(&self) -> bool {
        self.run_start.is_some()
    }

    pub fn push(&mut self, frame: &HandFrame) -> bool {
        if !in_contact(frame) {
            self.run_start = None;
            self.fired = false;
            return false;
        }
        let s = *self.run_start.get_or_insert(frame.timestamp);
        if !self.fired && run_duration(s, frame.timestamp) >= PINCH_HOLD_S - DURATION_EPS {
            self.fired = true;
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MenuPhase {
    #[default]
    Idle,
    MenuOpen,
}

/// Left-hand menu state. `highlighted` is `Some` exactly when the menu is
/// open.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeSwitchState {
    pub phase: MenuPhase,
    pub highlighted: Option<Granularity>,
    /// Last observed wrist roll, radians.
    pub roll: f64,
    /// Consecutive frames showing the pose that would advance the phase.
    pub streak: u8,
}

/// Wrist roll about the finger axis, radians.
pub fn wrist_roll(frame: &HandFrame) -> f64 {
    let q = frame.wrist().orientation.quaternion();
    let r = 2.0 * q.j.atan2(q.w);
    // keep the angle in (-pi, pi]
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else if r <= -std::f64::consts::PI {
        r + std::f64::consts::TAU
    } else {
        r
    }
}

/// 45 degree sectors over [-90, 90], clamped at both ends.
pub fn roll_sector(roll: f64) -> Granularity {
    let deg = roll.to_degrees().clamp(-90.0, 90.0);
    let idx = (((deg + 90.0) / 45.0).floor() as usize).min(3);
    Granularity::ALL[idx]
}

fn local_tips(frame: &HandFrame) -> (Vector3<f64>, [Vector3<f64>; 4]) {
    (
        frame.local_position(Joint::ThumbTip),
        FINGER_TIPS.map(|j| frame.local_position(j)),
    )
}

fn mean_tip_palm(tips: &[Vector3<f64>; 4]) -> f64 {
    let palm = Vector3::from(PALM_CENTER);
    tips.iter().map(|t| (t - palm).norm()).sum::<f64>() / 4.0
}

/// Fingers curled, thumb sticking out.
pub fn is_thumb_up(frame: &HandFrame) -> bool {
    let (thumb, tips) = local_tips(frame);
    mean_tip_palm(&tips) < 0.05 && (thumb - Vector3::from(PALM_CENTER)).norm() > 0.065
}

/// Fingers extended and fanned apart.
pub fn is_spread(frame: &HandFrame) -> bool {
    let (_, tips) = local_tips(frame);
    let gap = tips.windows(2).map(|w| (w[0] - w[1]).norm()).sum::<f64>() / 3.0;
    mean_tip_palm(&tips) > 0.105 && gap > 0.03
}

/// Advances the menu by one left-hand frame. Right-hand frames are taken
/// as already canonical.
pub fn mode_switch_step(state: ModeSwitchState, left_frame: &HandFrame) -> (ModeSwitchState, Option<EditCommand>) {
    let frame = match left_frame.handedness {
        Handedness::Left => mirror(left_frame),
        Handedness::Right => left_frame.clone(),
    };
    let roll = wrist_roll(&frame);
    let mut next = ModeSwitchState { roll, ..state };
    match state.phase {
        MenuPhase::Idle => {
            next.streak = if is_thumb_up(&frame) { state.streak + 1 } else { 0 };
            if next.streak >= POSE_DEBOUNCE_FRAMES {
                next.phase = MenuPhase::MenuOpen;
                next.highlighted = Some(roll_sector(roll));
                next.streak = 0;
            }
            (next, None)
        }
        MenuPhase::MenuOpen => {
            let highlighted = roll_sector(roll);
            next.highlighted = Some(highlighted);
            next.streak = if is_spread(&frame) { state.streak + 1 } else { 0 };
            if next.streak >= POSE_DEBOUNCE_FRAMES {
                next = ModeSwitchState { roll, ..ModeSwitchState::default() };
                return (next, Some(EditCommand::SetGranularity(highlighted)));
            }
            (next, None)
        }
    }
}
