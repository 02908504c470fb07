//! Building blocks for adapting a video segmenter into a robust single-object
//! tracker: box geometry and IoU-family losses, motion predictors (Kalman,
//! extended Kalman, MLP, LSTM) trained on trajectory annotations, multi-cue
//! mask selection, an error detection/recovery state machine, a target-aware
//! memory selection policy, trajectory nonlinearity analysis, tracking
//! metrics, and a deterministic segmenter simulator for end-to-end runs.

pub mod edrm;
pub mod eval;
pub mod geometry;
pub mod motion;
pub mod nonlinearity;
pub mod par;
pub mod selector;
pub mod sim;
pub mod tamb;

pub use geometry::{BinaryMask, BoundingBox};
