//! Sieve-theory laboratory: Maynard sieve weights, the M_k variational
//! optimization, short-interval weighted sums, Buchstab decomposition
//! tooling, and prime-density experiments in short intervals.

pub mod error;
pub mod prime_engine;
pub mod tuples;
pub mod scalar;
pub mod variational;
pub mod maynard_weights;
pub mod sums;
pub mod decomposition;
pub mod harness;

pub use error::{Error, Result};
