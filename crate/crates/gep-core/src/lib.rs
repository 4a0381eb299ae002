//! Generation expansion planning (GEP) toolkit.
//!
//! The crate builds full-scale and temporally aggregated GEP models as
//! solver-agnostic LP/MILP structures, solves them with a built-in revised
//! simplex / branch-and-bound backend, clusters time steps by marginal-cost
//! estimates, and runs two iterative algorithms that certify lower and upper
//! bounds on the full-scale optimum with a reported optimality gap.
//!
//! Module map:
//! - [`lp`]: structural LP/MILP carrier with semantically tagged rows.
//! - [`model`]: GEP domain types and model builders.
//! - [`solver`]: LP solver with duals, branch-and-bound, MPS export/import.
//! - [`tsa`]: partitions, series aggregation, sliding-window clustering.
//! - [`algorithms`]: marginal-cost estimation and the two bounding algorithms.
//! - [`data`]: synthetic instance generation and CSV series ingestion.

pub mod algorithms;
pub mod data;
pub mod lp;
pub mod model;
pub mod solver;
pub mod tsa;
