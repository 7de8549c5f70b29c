//! Numerical toolkit for perturbed sweeping processes with Volterra memory.

// negated float comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod builtins;
pub mod cli;
pub mod dynamics;
pub mod grid;
pub mod gronwall;
pub mod path;
pub mod scenario;
pub mod sets;
pub mod solver;
