//! Simulation laboratory for power variations of moving averages driven by
//! pure-jump noise, with kernels that are smooth away from finitely many
//! power-law singularities.
//!
//! The crate simulates driving jump records and sample paths on dyadic grids,
//! computes filtered power variations, evaluates the candidate limit laws
//! exactly from the realized jumps (with certified series truncation), and
//! packages repeatable convergence / distribution / stability experiments
//! behind a CLI.

// `!(x > 0.0)`-style guards are used throughout so NaN parameters fail
// validation instead of slipping past a direct `<=`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kernels;
pub mod levy;
pub mod limits;
pub mod simulate;
pub mod stats;
pub mod subseq;

pub use error::{Error, Result};
pub use kernels::{Envelope, G0Mode, KernelShape, KernelSpec, SingularPoint};
pub use levy::{JumpLaw, JumpRecord, LevyKind, LevySpec};
pub use limits::{LimitRegime, LimitSample, SeriesPolicy};
pub use simulate::SamplePath;
pub use stats::PowerVariationReport;
pub use subseq::SubsequencePlan;
