//! Randomized benchmarking of single-qubit Clifford gatesets with
//! gate-dependent noise, representation-independent decay theory, and gauge
//! analysis of the average gateset infidelity.

pub mod clifford;
pub mod diamond;
pub mod eigen;
pub mod error;
pub mod export;
pub mod fit;
pub mod gauge;
pub mod optim;
pub mod rb;
pub mod seeding;
pub mod superop;
pub mod theory;

pub use error::{Error, Result};
