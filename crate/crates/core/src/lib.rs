//! Design and simulation toolkit for millimeter-wave overtone acoustic filters
//! built on periodically poled piezoelectric stacks.
//!
//! The flow runs from stack dispersion ([`stack`]) through lumped resonator
//! synthesis ([`mbvd`]) to ladder simulation ([`ladder`]) and figure-of-merit
//! extraction ([`metrics`]). [`extraction`], [`optimizer`] and [`tolerance`]
//! close the loop with admittance fitting, insertion-loss tuning and Monte
//! Carlo thickness analysis. [`touchstone`], [`config`] and [`cli`] handle files
//! and the command line.
//!
//! Units are fixed throughout: frequencies in GHz, thicknesses in nm, lateral
//! wavelengths in µm, velocities in m/s, capacitance in fF, inductance in nH,
//! resistance in Ω.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod extraction;
pub mod ladder;
pub mod mbvd;
pub mod metrics;
pub mod optimizer;
pub mod parallel;
pub mod simplex;
pub mod stack;
pub mod stats;
pub mod tolerance;
pub mod touchstone;

pub use error::{Error, Result};
pub use num_complex::Complex64;
