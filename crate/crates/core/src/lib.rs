//! Invariant-domain preserving continuous finite element solver for the
//! multi-species compressible Euler equations.

// negated comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod highorder;
pub mod limiter;
pub mod loworder;
pub mod mesh;
pub mod par;
pub mod riemann;
pub mod stepper;
pub mod thermo;
