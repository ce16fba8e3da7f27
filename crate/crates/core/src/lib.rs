//! Random groups in Gromov's density model.

pub mod cancellation;
pub mod cayley;
pub mod diagrams;
pub mod error;
pub mod harness;
pub mod sentences;
pub mod sampler;
pub mod unification;
pub mod words;

pub use error::{Error, Result};
