//! Floquet toolkit for period k-tupling of strongly driven spins.
//!
//! A strongly driven two-level system responds subharmonically when its
//! quasi-energy difference is a rational fraction j/k of the drive quantum:
//! every state then revives only after k drive periods. This crate computes
//! one-period propagators and quasi-energies for the driven two-level system
//! and for a six-level NV(-)+15N model near the ground-state level
//! anti-crossing, locates the k-tupling drive amplitudes by root finding,
//! emulates a stroboscopic photoluminescence measurement campaign with
//! phenomenological decay and shot noise, and recovers the k-tupling
//! amplitudes back from the synthetic data through a DFT / subsequence /
//! damped-cosine / hyperbola-fit pipeline.

pub mod error;
pub mod experiment;
pub mod floquet;
pub mod hamiltonians;
pub mod io;
pub mod ktupling;
pub mod linalg;
pub mod parallel;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
