//! Resilient PMU placement toolkit.
//!
//! * [`grid`] parses MATPOWER-style cases and derives connectivity.
//! * [`observability`] evaluates placements (coverage, ZIB inference, N-1 predicates).
//! * [`exact`] is a branch-and-bound oracle for minimum placements.
//! * [`tlbo`] is the grouped teaching-learning metaheuristic.
//! * [`power_flow`] and [`stability`] provide the operating point, VSI sweeps and scores.
//! * [`phasing`] plans budgeted multi-stage installations.

// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod error;
pub mod exact;
pub mod grid;
pub mod observability;
pub mod phasing;
pub mod power_flow;
pub mod stability;
pub mod tlbo;

pub use error::{Error, Result};
pub use grid::{parse_case, BusId, Network};
pub use observability::{Placement, ResilienceOptions};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}
