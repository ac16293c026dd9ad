//! Storage and retrieval of quantum light in an atomic ensemble whose atoms
//! couple inhomogeneously to the probe and control fields.
//!
//! The ensemble is modeled as `m` homogeneous sub-ensembles. [`model`] holds the
//! system description, the dark-mode vector and the coupling matrices;
//! [`dynamics`] propagates the bosonic modes through storage and retrieval;
//! [`analysis`] computes leakage, stored-amplitude ratios and round-trip
//! fidelities; [`oracle`] simulates a few atoms exactly, without the bosonic
//! approximation.

pub mod error;
pub mod model;
pub mod schedule;
pub mod propagate;
pub mod dynamics;
pub mod analysis;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
