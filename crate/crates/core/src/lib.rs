//! Numerical toolkit for Hopf-like bifurcations in piecewise-smooth planar
//! systems: event-driven simulation, limit cycle computation and scaling
//! law verification over a catalog of prototype systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod cycles;
pub mod error;
pub mod integrate;
pub mod pwsys;
pub mod roots;
pub mod scaling;

pub use error::{HlbError, Result};
