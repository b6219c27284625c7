//! Deterministic numeric substrate: dense matrices, seeded RNG streams,
//! a symmetric eigensolver, and numerically stable scalar functions.
//!
//! Everything here is a pure function of its inputs. Values are immutable
//! after construction and safe to share across threads.

mod eigen;
mod matrix;
mod rng;
mod scalars;

pub use eigen::{jacobi_eigh, EigenDecomposition};
pub use matrix::DenseMatrix;
pub use rng::{rng_derive, RngStream};
pub use scalars::{arcosh, artanh, sigmoid, softplus};
