//! Skeleton-based gesture recognizer: a small joint/temporal attention
//! network with a static class head and a per-frame sub-state head.

pub mod calibrate;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod params;
pub mod train;

use thiserror::Error;

pub use calibrate::{expected_calibration_error, fit_temperature};
pub use eval::{calibrate, calibration_stats, evaluate, evaluate_fold, Calibration, ConfusionMatrix, EvalReport, FoldResult, Predictor};
pub use loss::{contrastive_loss, total_loss, LossBreakdown, WindowLabels};
pub use model::{backward, forward, forward_traced, ModelOutput, OutputGrads};
pub use params::{HyperParams, ModelParams, Scalar};
pub use train::{prepare, train_fold, EpochLog, Fold, PreparedClip, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecognizerError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation")]
    NonFiniteActivation,
    #[error("contrastive loss needs a batch of at least 2")]
    BatchTooSmallForContrastive,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("training set has no {0} clips")]
    MissingClass(crate::gesture::GestureClass),
    #[error("fold has no {0} clips")]
    EmptyFold(&'static str),
    #[error("clip {0} is shorter than one window")]
    ClipTooShort(usize),
    #[error("validation set is empty")]
    EmptyValidation,
}
