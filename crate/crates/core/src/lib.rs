//! Numerical toolkit for meromorphic inner functions on the upper
//! half-plane: boundary behaviour, model-space kernels, density of real
//! sequences, Toeplitz kernel probes and multiplier decisions.

pub mod cayley;
pub mod cli;
pub mod complex;
pub mod decider;
pub mod density;
pub mod error;
pub mod exprational;
pub mod hilbert;
pub mod inner;
pub mod quad;
pub mod toeplitz;

pub use complex::{ComplexPoint, C64};
pub use error::{Error, Result};
