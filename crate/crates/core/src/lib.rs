//! Numerical homogenization of quasiperiodic monotone elliptic operators.
//!
//! A quasiperiodic coefficient `a(Rx/η)` is lifted to a periodic function on
//! the torus `Yᵐ` through a cut-and-projection matrix `R`. The crate solves
//! the torus cell problem for the corrector gradient and the homogenized
//! flux, the macroscopic homogenized and oscillating problems by finite
//! elements, and measures the convergence of the latter to the former.

pub mod cell;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod flux;
pub mod harness;
pub mod pde;
pub mod plot;
pub mod projection;
pub mod torus;

pub use error::{Error, Result};
