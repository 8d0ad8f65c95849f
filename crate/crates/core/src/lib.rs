//! Simulation and set-invariance verification for hybrid dynamical
//! systems modeled as hybrid inclusions.
//!
//! A hybrid inclusion couples a differential inclusion `xdot ∈ F(x)` on a
//! flow set `C` with a difference inclusion `x+ ∈ G(x)` on a jump set `D`;
//! the disturbed form constrains the joint pairs `(x, w_c)` and `(x, w_d)`
//! instead. This crate provides:
//!
//! * [`model`] — expressions, closed constraint sets, set-valued maps,
//!   systems, hybrid arcs and the JSON scenario format;
//! * [`geometry`] — distances, projections and tangent-cone membership
//!   with certificate and numerical paths;
//! * [`solver`] — hybrid-arc computation with event localization and
//!   termination classification;
//! * [`checker`] — sampled and certificate-based verification of the
//!   sufficient conditions for (robust, weak) forward invariance and for
//!   invariance of Lyapunov sublevel sets;
//! * [`catalog`] — built-in example systems with their expected verdicts.

pub mod catalog;
pub mod checker;
pub mod geometry;
pub mod model;
pub mod solver;
