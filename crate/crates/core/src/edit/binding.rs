//! Gesture event to edit command mapping.

use serde::{Deserialize, Serialize};

use super::EditCommand;
use crate::gesture::{GestureClass, SubState};
use crate::stream::GestureEvent;

/// How a Swipe's sub-state trace becomes a unit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwipeMapping {
    /// One unit per swipe in the direction of the net sub-state change.
    #[default]
    Step,
    /// One unit per sub-state boundary crossed, signed by direction.
    Crossings,
    /// One unit forward per swipe; the trace is not read.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditorContext {
    /// Set by a pinch-hold; Swipe then extends the selection.
    pub selection_armed: bool,
    pub swipe_mapping: SwipeMapping,
}

/// Signed unit count of a swipe. A trace without a net change (or without
/// swipe sub-states) moves one unit forward.
pub fn swipe_delta(trace: &[SubState], mapping: SwipeMapping) -> i64 {
    if mapping == SwipeMapping::Forward {
        return 1;
    }
    let states: Vec<i64> = trace
        .iter()
        .filter(|s| **s != SubState::NONE)
        .map(|s| s.value() as i64)
        .collect();
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return 1;
    };
    let net = last - first;
    match mapping {
        SwipeMapping::Step => {
            if net < 0 {
                -1
            } else {
                1
            }
        }
        SwipeMapping::Forward => 1,
        SwipeMapping::Crossings => {
            let crossings: i64 = states.windows(2).map(|w| w[1] - w[0]).sum();
            if crossings == 0 {
                1
            } else {
                crossings
            }
        }
    }
}

/// Maps a fired gesture to its command. Null never fires and maps to
/// nothing.
pub fn bind_event(event: &GestureEvent, ctx: &EditorContext) -> Option<EditCommand> {
    let cmd = match event.gesture {
        GestureClass::Scissor => EditCommand::Cut,
        GestureClass::Ring => EditCommand::Copy,
        GestureClass::Open => EditCommand::Undo,
        GestureClass::Fist => EditCommand::Delete,
        GestureClass::Vertical => EditCommand::SelectAll,
        GestureClass::Pinky => EditCommand::Paste,
        GestureClass::Swipe => {
            let trace = event.swipe_substate_trace.as_deref().unwrap_or(&[]);
            let delta = swipe_delta(trace, ctx.swipe_mapping);
            if ctx.selection_armed {
                EditCommand::SelectRange(delta)
            } else {
                EditCommand::MoveCaret(delta)
            }
        }
        GestureClass::Null => return None,
    };
    Some(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(gesture: GestureClass, trace: Option<Vec<u8>>) -> GestureEvent {
        GestureEvent {
            gesture,
            fired_at: 1.0,
            mean_confidence: 0.99,
            swipe_substate_trace: trace.map(|t| t.into_iter().map(|v| SubState::new(v).unwrap()).collect()),
        }
    }

    #[test]
    fn static_bindings() {
        let ctx = EditorContext::default();
        let cases = [
            (GestureClass::Scissor, EditCommand::Cut),
            (GestureClass::Ring, EditCommand::Copy),
            (GestureClass::Open, EditCommand::Undo),
            (GestureClass::Fist, EditCommand::Delete),
            (GestureClass::Vertical, EditCommand::SelectAll),
            (GestureClass::Pinky, EditCommand::Paste),
        ];
        for (g, c) in cases {
            assert_eq!(bind_event(&event(g, None), &ctx), Some(c));
        }
        assert_eq!(bind_event(&event(GestureClass::Null, None), &ctx), None);
    }

    #[test]
    fn swipe_depends_on_arming() {
        let mut ctx = EditorContext::default();
        let e = event(GestureClass::Swipe, Some(vec![0, 1, 1, 2]));
        assert_eq!(bind_event(&e, &ctx), Some(EditCommand::MoveCaret(1)));
        ctx.selection_armed = true;
        assert_eq!(bind_event(&e, &ctx), Some(EditCommand::SelectRange(1)));
    }

    #[test]
    fn swipe_direction_and_crossings() {
        let s = |v: &[u8]| v.iter().map(|x| SubState::new(*x).unwrap()).collect::<Vec<_>>();
        assert_eq!(swipe_delta(&s(&[3, 2, 2, 1]), SwipeMapping::Step), -1);
        assert_eq!(swipe_delta(&s(&[3, 2, 2, 1]), SwipeMapping::Crossings), -2);
        assert_eq!(swipe_delta(&s(&[0, 1, 2, 3]), SwipeMapping::Crossings), 3);
        assert_eq!(swipe_delta(&s(&[4, 4]), SwipeMapping::Step), 1);
        assert_eq!(swipe_delta(&[], SwipeMapping::Crossings), 1);
        assert_eq!(swipe_delta(&s(&[3, 2, 1, 0]), SwipeMapping::Forward), 1);
    }
}
