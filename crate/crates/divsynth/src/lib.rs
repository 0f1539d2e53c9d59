//! Synthesis of sets of behaviorally diverse piecewise-linear traces that
//! satisfy a signal temporal logic formula under a system model.
//!
//! The pipeline: a formula over affine predicates is normalized ([`stl`]),
//! compiled together with a [`encoder::SystemModel`] into a mixed-integer
//! linear program ([`milp`]), and solved iteratively while maximizing one of
//! several diversity objectives over the already-synthesized traces
//! ([`diversity`]). Traces are piecewise-linear signals over a searched time
//! partition ([`pwl`]). Ready-made automotive and navigation scenarios live
//! in [`benchmarks`].

pub mod encoder;
pub mod milp;
pub mod pwl;
pub mod rng;
pub mod stl;
