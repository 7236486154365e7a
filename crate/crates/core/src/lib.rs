//! Zero and extrema finding by thinning a homogeneous Poisson point process
//! with the intensity `exp(-K |f(x)|^Q)`, plus adaptive window refinement.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appz;
pub mod builtins;
pub mod cox;
pub mod exprlang;
pub mod geometry;
pub mod ppz;
pub mod report;
pub mod repro;
pub mod sampling;
pub mod target;
