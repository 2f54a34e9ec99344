//! Microgesture text-editing pipeline: hand skeletons, synthetic gesture
//! data, a temporal-attention recognizer, streaming event detection and a
//! granularity-aware text editor.

pub mod edit;
pub mod gesture;
pub mod io;
pub mod par;
pub mod session;
pub mod recognizer;
pub mod skeleton;
pub mod stream;
pub mod synth;
