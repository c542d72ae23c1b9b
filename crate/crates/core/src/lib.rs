//! Core of the palmjog gesture-teleoperation stack.
//!
//! - [`landmark`], [`dataset`], [`synth`]: hand landmarks, wrist-relative features and datasets
//! - [`nn`]: the small dense classifier, its training loop and evaluation
//! - [`quant`]: magnitude pruning, int8 quantization and the compact model container
//! - [`control`]: gesture to jog command state machine and the safety envelope
//! - [`arm`]: UR5 kinematics and the time-stepped arm simulator

pub mod arm;
pub mod control;
pub mod dataset;
pub mod gesture;
pub mod landmark;
pub mod nn;
pub mod quant;
pub mod synth;

pub use dataset::{Dataset, DatasetError, LabeledSample};
pub use gesture::{GestureEvent, GestureLabel};
pub use landmark::{FeatureVector, Handedness, Landmark, LandmarkError, LandmarkFrame};
