//! Self-similar measures, certified orbits `f_n(x) mod 1`, equidistribution
//! statistics and the explicit exponential-sum decay constants for
//! equicontractive iterated function systems.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod equidist;
pub mod error;
pub mod ifs;
pub mod par;
pub mod precision;
pub mod quadrature;
pub mod rational;
pub mod sampling;
pub mod sequences;

pub use error::{Error, Result};
pub use ifs::{IfsSpec, Word};
pub use par::Exec;
pub use rational::Rational;
pub use sequences::SequenceFamily;
