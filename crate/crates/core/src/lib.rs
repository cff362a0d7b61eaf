//! Many-worlds models of the two-photon polarization experiment.
//!
//! The crate builds a ladder of models on the cross-section of a
//! unit-circumference "probability cylinder":
//!
//! * the classical model, where arc lengths give the probability `C`;
//! * the transition model, where diamond-shaped worlds are counted to give
//!   `P*`;
//! * the grid model, whose world counts give the standard quantum `P`.
//!
//! Around those sit a Bell-inequality harness, exact branch counting for
//! sequential runs, actualization-pointer experiments, a seeded trial runner
//! and SVG/CSV emitters.

pub mod actualization;
pub mod angle;
pub mod bell;
pub mod branching;
pub mod error;
pub mod geometry;
pub mod partition;
pub mod probability;
pub mod render;
pub mod trials;

pub use angle::{AngleSetting, IndexMode, Klass, OutcomePair};
pub use error::{Error, Result};
pub use partition::{GridSpec, Partition, PartitionKind};
pub use probability::{Model, ProbabilityTable};
