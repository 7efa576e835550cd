//! Numerical core for training a feedforward classifier and its
//! domain-adversarial variant on labeled simulation plus unlabeled real data,
//! and for checking sim/real agreement with a weighted two-sample
//! Kolmogorov–Smirnov distance.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command-line front end live in the `simreal` crate.
//!
//! Module map:
//!
//! - [`linalg`]: dense row-major matrices and the seeded generator.
//! - [`dataset`]: samples, standardization, splitting and batching.
//! - [`synth`]: synthetic source/target/control scenarios with known shift.
//! - [`network`]: the two-headed tanh MLP with a gradient reversal branch.
//! - [`optim`]: Adam and plain SGD.
//! - [`train`]: the NN and DANN training drivers.
//! - [`stats`]: weighted ECDF, KS distance, agreement gate, accuracy.
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod network;
pub mod optim;
pub mod stats;
pub mod synth;
pub mod train;

pub use dataset::{Dataset, Domain, Schema, Standardizer};
pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
pub use network::{ForwardTrace, Grads, NetParams};
pub use optim::{AdamHyper, AdamState};
pub use stats::{KsReport, WeightedSample};
pub use synth::{ScenarioBundle, ScenarioConfig, ShiftKind};
pub use train::{History, LambdaMode, ModelKind, TrainConfig, TrainRun};
