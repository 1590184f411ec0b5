//! Spectral toolkit for paracontrolled calculus and Phi^4 stochastic PDEs on periodic boxes.

pub mod coupling;
pub mod error;
pub mod grid;
pub mod io;
pub mod lp;
pub mod para;
pub mod solvers;
pub mod stochastic;
pub mod trees;

pub use error::{Error, Result};
pub use grid::{Field, SpectralField, TorusGrid, Trajectory};
pub use lp::{DyadicPartition, Weight};
