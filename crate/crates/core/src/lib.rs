//! Radio-map augmentation with conditional GANs.
//!
//! Fingerprints are transformed into the powed representation, three
//! CNN-LSTM estimators predict position, floor and building, per-partition
//! conditional GANs generate candidate fingerprints, and only candidates whose
//! predicted position lands near a real reference point are kept. Reports
//! compare the estimators with and without augmentation against 1-NN.

pub mod augmentation;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod positioning;
pub mod radiomap;
pub mod seed;
pub mod synthgen;

pub use error::{CoreError, Result};
