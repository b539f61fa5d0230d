//! Simulation and statistical analysis of the determinant dimension witness
//! for a single qubit.
//!
//! The witness is `W = det F`, where `F` is a 5x5 matrix of outcome
//! probabilities for five preparations and four measurements along the
//! Viviani curve, completed with a row of ones. It vanishes for any
//! two-level system, so a significant nonzero value flags leakage into
//! extra levels or correlations between preparation and measurement.
//!
//! * [`qubit`] gates, states, effects and the Born rule.
//! * [`witness`] the probability matrix, `W`, its adjugate and error bar.
//! * [`noise`] Kraus channels, readout confusion, leakage models.
//! * [`montecarlo`] seeded shot simulation of jobs.
//! * [`optimizer`] angle search maximizing the adjugate norm.
//! * [`io`], [`report`], [`render`] file formats, verdicts and figures.

pub mod cofactor;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod noise;
pub mod optimizer;
pub mod qubit;
pub mod render;
pub mod report;
pub mod selftest;
pub mod witness;

pub use error::{Error, Result};
