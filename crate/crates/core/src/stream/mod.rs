//! Online recognition: ring buffer, per-frame inference and event gating.

pub mod fsm;
pub mod runtime;

use thiserror::Error;

pub use fsm::{fsm_step, Fired, FsmConfig, FsmState, Phase};
pub use runtime::{swipe_progress, GestureEvent, Runtime, Step};

use crate::recognizer::RecognizerError;
use crate::skeleton::SkeletonError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("malformed class probabilities: {0}")]
    MalformedProbs(String),
    #[error("frame at {got} does not follow frame at {previous}")]
    OutOfOrderFrame { previous: f64, got: f64 },
    #[error("expected a right-hand frame")]
    WrongHandedness,
    #[error("invalid state machine config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
}
