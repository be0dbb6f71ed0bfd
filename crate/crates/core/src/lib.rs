//! Numerical toolkit for homogeneous Herz and Herz–Sobolev spaces.
//!
//! Norms are assembled over the dyadic annuli `C_k = {2^{k-1} <= |x| < 2^k}`.
//! The crate also provides the mollifier, maximal function, Riesz potential
//! and dyadic averaging operators, the admissibility predicates of the
//! embedding and Caffarelli–Kohn–Nirenberg-type inequalities, and an
//! experiment engine that measures both sides of each inequality.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod embeddings;
pub mod error;
pub mod funclib;
pub mod norms;
pub mod operators;
pub mod params;
pub mod quadrature;
mod serde_ext;

pub use error::{Direction, HerzError, Result};
pub use funclib::{DomainSpec, FunctionSpec};
pub use norms::{NormResult, TruncationPolicy};
pub use params::{Exponent, HerzParams, SobolevParams, TheoremId};
pub use quadrature::QuadratureOptions;
