//! Gesture classes and Swipe sub-states.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The seven command gestures plus the `Null` rejection class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    Scissor,
    Ring,
    Swipe,
    Open,
    Fist,
    Vertical,
    Pinky,
    Null,
}

pub const NUM_CLASSES: usize = 8;
pub const NUM_STATES: usize = 5;

impl GestureClass {
    pub const ALL: [GestureClass; NUM_CLASSES] = [
        GestureClass::Scissor,
        GestureClass::Ring,
        GestureClass::Swipe,
        GestureClass::Open,
        GestureClass::Fist,
        GestureClass::Vertical,
        GestureClass::Pinky,
        GestureClass::Null,
    ];

    /// The gestures that map to editing commands.
    pub const COMMANDS: [GestureClass; 7] = [
        GestureClass::Scissor,
        GestureClass::Ring,
        GestureClass::Swipe,
        GestureClass::Open,
        GestureClass::Fist,
        GestureClass::Vertical,
        GestureClass::Pinky,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Scissor => "Scissor",
            GestureClass::Ring => "Ring",
            GestureClass::Swipe => "Swipe",
            GestureClass::Open => "Open",
            GestureClass::Fist => "Fist",
            GestureClass::Vertical => "Vertical",
            GestureClass::Pinky => "Pinky",
            GestureClass::Null => "Null",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|g| g.name().eq_ignore_ascii_case(name))
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|g| g.name()).collect()
    }

    pub fn is_static(self) -> bool {
        !matches!(self, GestureClass::Swipe | GestureClass::Null)
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-frame Swipe phase. 0..=3 quantize the thumb's position along the
/// index finger (0 nearest the tip); 4 means "not in a swipe".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubState(u8);

impl SubState {
    pub const NONE: SubState = SubState(4);

    pub fn new(v: u8) -> Option<Self> {
        (v <= 4).then_some(SubState(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Quantizes a normalized position into four half-open bins
    /// `[i/4, (i+1)/4)`, with `u = 1` mapped to the last bin.
    pub fn from_progress(u: f64) -> Self {
        let u = u.clamp(0.0, 1.0);
        SubState(((u * 4.0).floor() as u8).min(3))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins() {
        assert_eq!(SubState::from_progress(0.0).value(), 0);
        assert_eq!(SubState::from_progress(0.2499).value(), 0);
        assert_eq!(SubState::from_progress(0.25).value(), 1);
        assert_eq!(SubState::from_progress(0.75).value(), 3);
        assert_eq!(SubState::from_progress(1.0).value(), 3);
        assert_eq!(SubState::from_progress(-0.1).value(), 0);
        assert!(SubState::new(5).is_none());
    }

    #[test]
    fn names_round_trip() {
        assert_eq!(GestureClass::ALL.len(), NUM_CLASSES);
        for g in GestureClass::ALL {
            assert_eq!(GestureClass::from_name(g.name()), Some(g));
            assert_eq!(GestureClass::from_index(g.index()), Some(g));
        }
    }
}
