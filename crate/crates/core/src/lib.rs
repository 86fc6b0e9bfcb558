//! Event-by-event simulation and analysis of idealized Stern-Gerlach (SG)
//! and Einstein-Podolsky-Rosen-Bohm (EPRB) experiments.
//!
//! The crate has two halves:
//!
//! * a seeded, counter-based simulator that produces ±1 event streams from a
//!   configurable outcome model (the quantum laws, deliberately non-quantum
//!   alternatives, and mixed-source ensembles), together with CSV/JSON dataset
//!   interchange ([`simulator`], [`dataset_io`], [`stats`]);
//! * analysis layers that reconstruct a setting-independent source description
//!   (a density matrix) plus setting-dependent observables from multi-setting
//!   summary statistics ([`separation`], built on the exact small-dimension
//!   Hermitian algebra in [`algebra`]), and quantify robustness through
//!   evidence, Fisher information, cosine-family fits and a k-sigma compliance
//!   test against the quantum predictions ([`inference`]).
//!
//! All analysis entry points are pure functions of their inputs, and the
//! simulator is deterministic in `(model, condition, n, seed)`, so pipelines
//! built from this crate are reproducible byte-for-byte.

pub mod algebra;
pub mod dataset_io;
mod eigen;
pub mod error;
pub mod inference;
pub mod rng;
pub mod separation;
pub mod simulator;
pub mod stats;
pub mod vec3;

pub use error::{Error, Result};
