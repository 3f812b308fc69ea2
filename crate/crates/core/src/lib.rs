//! Precoder optimization for multi-cell MIMO-NOMA downlinks.

// Link the system OpenBLAS used by the conic backend.
use blas_src as _;
use lapack_src as _;
use openblas_src as _;

pub mod check;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod optimizer;
pub mod solver;
pub mod surrogate;
pub mod throughput;

pub use error::{Error, Result};
