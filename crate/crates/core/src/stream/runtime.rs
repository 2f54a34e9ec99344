//! Per-frame online recognition over a ring buffer of the latest frames.

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::fsm::{fsm_step, FsmConfig, FsmState};
use super::StreamError;
use crate::gesture::{GestureClass, SubState, NUM_STATES};
use crate::recognizer::model::{argmax, forward, softmax};
use crate::recognizer::ModelParams;
use crate::skeleton::{extract_features, FeatureWindow, HandFrame, Handedness, WINDOW_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub gesture: GestureClass,
    pub fired_at: f64,
    pub mean_confidence: f64,
    /// Sub-states of the frames that confirmed a Swipe, predicted from the
    /// window that fired.
    pub swipe_substate_trace: Option<Vec<SubState>>,
}

/// Normalized thumb position `u` in `[0, 1]` from the latest frame's state
/// logits: the expected sub-state over states 0..=3 (renormalized) divided
/// by 3, or `None` if state 4 holds more than half of the mass.
pub fn swipe_progress(state_logits: &Array2<f64>) -> Option<f64> {
    let last = state_logits.row(state_logits.nrows() - 1);
    progress_from_probs(softmax(last).view())
}

fn progress_from_probs(p: ArrayView1<f64>) -> Option<f64> {
    if p[NUM_STATES - 1] > 0.5 {
        return None;
    }
    let mass: f64 = (0..4).map(|s| p[s]).sum();
    if mass <= 0.0 {
        return None;
    }
    let expected: f64 = (0..4).map(|s| s as f64 * p[s]).sum::<f64>() / mass;
    Some(expected / 3.0)
}

/// What one `push_frame` call produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub event: Option<GestureEvent>,
    /// Tempered class probabilities, when inference ran.
    pub class_probs: Option<Vec<f64>>,
    pub latest_state: Option<SubState>,
}

/// Streaming recognizer for one right-hand stream.
#[derive(Debug, Clone)]
pub struct Runtime {
    params: Arc<ModelParams<f32>>,
    cfg: FsmConfig,
    fsm: FsmState,
    buffer: VecDeque<HandFrame>,
    last_timestamp: Option<f64>,
}

impl Runtime {
    pub fn new(params: Arc<ModelParams<f32>>, cfg: FsmConfig) -> Result<Self, StreamError> {
        cfg.validate().map_err(StreamError::InvalidConfig)?;
        Ok(Self {
            params,
            cfg,
            fsm: FsmState::IDLE,
            buffer: VecDeque::with_capacity(WINDOW_LEN),
            last_timestamp: None,
        })
    }

    pub fn fsm_state(&self) -> &FsmState {
        &self.fsm
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Appends a frame; once the buffer holds a full window, runs the model
    /// and advances the state machine.
    pub fn push_frame(&mut self, frame: HandFrame) -> Result<Option<GestureEvent>, StreamError> {
        Ok(self.step(frame)?.event)
    }

    pub fn step(&mut self, frame: HandFrame) -> Result<Step, StreamError> {
        if frame.handedness != Handedness::Right {
            return Err(StreamError::WrongHandedness);
        }
        if let Some(prev) = self.last_timestamp {
            if !(frame.timestamp > prev) {
                return Err(StreamError::OutOfOrderFrame {
                    previous: prev,
                    got: frame.timestamp,
                });
            }
        }
        self.last_timestamp = Some(frame.timestamp);
        let timestamp = frame.timestamp;
        if self.buffer.len() == WINDOW_LEN {
            self.buffer.pop_front();
        }
        self.buffer.push_back(frame);
        if self.buffer.len() < WINDOW_LEN {
            return Ok(Step {
                event: None,
                class_probs: None,
                latest_state: None,
            });
        }

        let frames: Vec<HandFrame> = self.buffer.iter().cloned().collect();
        let window: FeatureWindow = extract_features(&frames)?;
        let out = forward(self.params.as_ref(), &window)?;
        let probs: Vec<f64> = out.class_probs.iter().map(|&p| p as f64).collect();
        let last = out.state_logits.row(WINDOW_LEN - 1).mapv(|v| v as f64);
        let latest_state = SubState::new(argmax(last.view()) as u8);

        let (next, fired) = fsm_step(&self.fsm, &probs, &self.cfg)?;
        self.fsm = next;

        let event = fired.map(|f| GestureEvent {
            gesture: f.gesture,
            fired_at: timestamp,
            mean_confidence: f.mean_confidence,
            swipe_substate_trace: (f.gesture == GestureClass::Swipe).then(|| {
                // the confirming frames, as seen from the firing window
                let first = WINDOW_LEN.saturating_sub(self.cfg.consecutive);
                (first..WINDOW_LEN)
                    .filter_map(|t| SubState::new(argmax(out.state_logits.row(t)) as u8))
                    .collect()
            }),
        });
        Ok(Step {
            event,
            class_probs: Some(probs),
            latest_state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::test_support::identity_frame;

    #[test]
    fn progress_examples() {
        let p = |v: [f64; 5]| progress_from_probs(ndarray::arr1(&v).view());
        assert_eq!(p([1.0, 0.0, 0.0, 0.0, 0.0]), Some(0.0));
        assert_eq!(p([0.0, 0.0, 0.0, 1.0, 0.0]), Some(1.0));
        assert!((p([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(p([0.1, 0.1, 0.1, 0.1, 0.6]), None);
        let logits = Array2::from_shape_vec((1, 5), vec![0.0, 0.0, 0.0, 50.0, 0.0]).unwrap();
        assert!((swipe_progress(&logits).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_up_and_ordering() {
        let params = Arc::new(ModelParams::<f32>::init(8, 1));
        let mut rt = Runtime::new(params, FsmConfig::default()).unwrap();
        for k in 0..19 {
            let step = rt.step(identity_frame(k as f64 / 72.0)).unwrap();
            assert!(step.class_probs.is_none() && step.event.is_none());
        }
        let step = rt.step(identity_frame(19.0 / 72.0)).unwrap();
        assert!(step.class_probs.is_some());
        assert_eq!(rt.buffered(), WINDOW_LEN);
        let err = rt.push_frame(identity_frame(0.1)).unwrap_err();
        assert!(matches!(err, StreamError::OutOfOrderFrame { .. }));
        assert_eq!(rt.buffered(), WINDOW_LEN);
    }
}
