//! Numerics for the quadratic Fock space of the renormalized square of white
//! noise.
//!
//! * [`testfn`]: step functions on a finite grid of cells.
//! * [`operators`]: one-particle operators and their structural predicates.
//! * [`fock`]: n-particle and exponential-vector inner products.
//! * [`normal_order`]: an independent commutation-relation oracle.
//! * [`projection_cert`]: identity batteries deciding whether the quadratic
//!   second quantization of an operator is an orthogonal projection.
//! * [`job`]: the batch front end behind the `qfock` binary.

pub mod error;
pub mod fock;
pub mod job;
pub mod normal_order;
pub mod operators;
pub mod par;
pub mod projection_cert;
pub mod sampling;
pub mod series;
pub mod testfn;

pub use error::{Error, Result};
pub use fock::ModelParams;
pub use operators::Operator;
pub use testfn::{Grid, StepFunction};
