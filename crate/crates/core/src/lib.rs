//! Categorical model of mycelial networks.
//!
//! Environments and mycelial states are attributed graphs ([`graphcat`],
//! [`envmyc`]); exposure protocols are piecewise-constant programs driving a
//! bilinear reference system ([`progsem`]); order effects are measured through
//! matrix Lie machinery ([`lie`]); [`laws`] checks the categorical laws
//! numerically and [`experiments`] runs the order-asymmetry scans.

pub mod dense;
pub mod envmyc;
pub mod experiments;
pub mod graphcat;
pub mod laws;
pub mod lie;
pub mod progsem;
