//! N-particle branching-selection front lab.
//!
//! A population of N particles on the integer lattice evolves in discrete
//! time: every particle branches into two children, each child independently
//! steps +1 with probability p, and only the N rightmost of the 2N children
//! survive. This crate provides the simulation engine, exact finite-N front
//! speeds via the translation-quotient chain, Monte-Carlo speed estimation
//! with scaling-law fits, barrier-sequence certificates for lower bounds on
//! the front speed, and auxiliary checks used to validate the surrounding
//! theory numerically.

// Reference values frozen at full 17-digit precision must keep every digit.
#![allow(clippy::excessive_precision)]
// Preconditions on floats use `!(x > y)` on purpose: the negated form also
// rejects NaN, which `x <= y` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissible;
pub mod cli;
pub mod dynamics;
pub mod estimator;
pub mod exact_chain;
pub mod population;
pub mod proof_checks;
pub mod theory;
