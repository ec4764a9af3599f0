//! Pure exploration in multi-armed bandits with multiple correct answers.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod expfam;
pub mod glr;
pub mod oracle;
pub mod problems;
pub mod sim;
pub mod tracking;

pub use error::{Error, Result};
pub use expfam::FamilyKind;
pub use problems::{AnswerId, ProblemKind, ProblemSpec};
