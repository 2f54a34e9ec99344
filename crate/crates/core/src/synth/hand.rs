//! Parametric right-hand model.
//!
//! Hand-local frame: origin at the wrist, +y toward the knuckles, +x toward
//! the thumb, palm facing -z. Fingers flex toward -z.

use nalgebra::{UnitQuaternion, Vector3};

use crate::skeleton::{Joint, NUM_JOINTS};

// index, middle, ring, pinky
const KNUCKLES: [[f64; 3]; 4] = [
    [0.022, 0.085, 0.0],
    [0.002, 0.090, 0.0],
    [-0.017, 0.085, 0.0],
    [-0.034, 0.075, 0.0],
];
const SEGMENTS: [[f64; 3]; 4] = [
    [0.040, 0.024, 0.019],
    [0.045, 0.028, 0.020],
    [0.042, 0.026, 0.019],
    [0.033, 0.019, 0.017],
];
// flexion (radians) of each finger joint at curl = 1
const FULL_FLEX: [f64; 3] = [85.0f64.to_radians(), 100.0f64.to_radians(), 65.0f64.to_radians()];
const THUMB_BASE: [f64; 3] = [0.025, 0.025, -0.012];
const THUMB_DISTAL: f64 = 0.022;
const THUMB_BULGE: [f64; 3] = [0.018, 0.0, 0.0];

/// Palm center in the hand-local frame (unscaled).
pub const PALM_CENTER: [f64; 3] = [0.0, 0.05, 0.0];

/// Where the thumb tip goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thumb {
    /// A point in the (unscaled) hand frame.
    Free(Vector3<f64>),
    /// On the index distal phalanx at fraction `u` from IndexTip toward
    /// IndexBelowTip, displaced by `lateral`/`palmar` meters perpendicular
    /// to the phalanx.
    OnIndex { u: f64, lateral: f64, palmar: f64 },
}

/// Finger curls (0 straight, 1 fully flexed), abductions (radians,
/// positive toward the thumb) and thumb placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub curl: [f64; 4],
    pub spread: [f64; 4],
    pub thumb: Thumb,
}

impl Pose {
    pub fn neutral() -> Self {
        Pose {
            curl: [0.35, 0.38, 0.40, 0.42],
            spread: [0.05, 0.0, -0.05, -0.10],
            thumb: Thumb::Free(Vector3::new(0.045, 0.085, -0.030)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Finger {
    tip: Vector3<f64>,
    below: Vector3<f64>,
    tip_rot: UnitQuaternion<f64>,
    below_rot: UnitQuaternion<f64>,
}

fn segment_rotation(spread: f64, flex: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -spread)
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), -flex)
}

/// Hand geometry for one subject.
#[derive(Debug, Clone, Copy)]
pub struct HandModel {
    pub scale: f64,
}

impl HandModel {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }

    fn finger(&self, f: usize, curl: f64, spread: f64) -> Finger {
        let s = self.scale;
        let mut p = Vector3::from(KNUCKLES[f]) * s;
        let mut flex = 0.0;
        let mut rots = [UnitQuaternion::identity(); 3];
        let mut pts = [Vector3::zeros(); 3];
        for k in 0..3 {
            flex += FULL_FLEX[k] * curl;
            rots[k] = segment_rotation(spread, flex);
            p += rots[k] * Vector3::y() * (SEGMENTS[f][k] * s);
            pts[k] = p;
        }
        Finger {
            tip: pts[2],
            below: pts[1],
            tip_rot: rots[2],
            below_rot: rots[1],
        }
    }

    fn thumb_point(&self, thumb: &Thumb, index: &Finger) -> Vector3<f64> {
        match *thumb {
            Thumb::Free(p) => p * self.scale,
            Thumb::OnIndex { u, lateral, palmar } => {
                let on = index.tip.lerp(&index.below, u);
                on + index.tip_rot * Vector3::new(lateral, 0.0, -palmar)
            }
        }
    }

    pub fn palm_center(&self) -> Vector3<f64> {
        Vector3::from(PALM_CENTER) * self.scale
    }

    /// Resolves a blend between two poses into local joint poses, wrist
    /// first, in [`Joint`] order.
    pub fn render(&self, from: &Pose, to: &Pose, s: f64) -> [(Vector3<f64>, UnitQuaternion<f64>); NUM_JOINTS] {
        let mut curl = [0.0; 4];
        let mut spread = [0.0; 4];
        for i in 0..4 {
            curl[i] = from.curl[i] + (to.curl[i] - from.curl[i]) * s;
            spread[i] = from.spread[i] + (to.spread[i] - from.spread[i]) * s;
        }
        let fingers: [Finger; 4] = std::array::from_fn(|i| self.finger(i, curl[i], spread[i]));
        let a = self.thumb_point(&from.thumb, &fingers[0]);
        let b = self.thumb_point(&to.thumb, &fingers[0]);
        let thumb_tip = a.lerp(&b, s);

        let base = Vector3::from(THUMB_BASE) * self.scale;
        let mid = base + (thumb_tip - base) * 0.5 + Vector3::from(THUMB_BULGE) * self.scale;
        let dir = (thumb_tip - mid)
            .try_normalize(1e-12)
            .unwrap_or_else(Vector3::y);
        let thumb_below = thumb_tip - dir * (THUMB_DISTAL * self.scale);
        let below_dir = (thumb_below - base)
            .try_normalize(1e-12)
            .unwrap_or_else(Vector3::y);
        let point_along = |d: &Vector3<f64>| {
            UnitQuaternion::rotation_between(&Vector3::y(), d)
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI))
        };

        let mut out = [(Vector3::zeros(), UnitQuaternion::identity()); NUM_JOINTS];
        out[Joint::ThumbTip.index()] = (thumb_tip, point_along(&dir));
        out[Joint::ThumbBelowTip.index()] = (thumb_below, point_along(&below_dir));
        let slots = [
            (Joint::IndexTip, Joint::IndexBelowTip),
            (Joint::MiddleTip, Joint::MiddleBelowTip),
            (Joint::RingTip, Joint::RingBelowTip),
            (Joint::PinkyTip, Joint::PinkyBelowTip),
        ];
        for (f, (tip, below)) in fingers.iter().zip(slots) {
            out[tip.index()] = (f.tip, f.tip_rot);
            out[below.index()] = (f.below, f.below_rot);
        }
        out
    }
}
