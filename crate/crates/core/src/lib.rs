//! Source-doublet panel method with unsteady wake shedding, a lumped-mass
//! tether model and an adaptive co-simulation master that couples the two
//! for a steered kite.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cosim;
pub mod dynamics;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod kite;
pub mod scenario;
pub mod solver;
pub mod steady;
pub mod surface;
pub mod wake;
