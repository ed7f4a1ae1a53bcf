//! File formats, synthetic instance generation and the benchmark harness
//! behind the `relclust` binary.

pub mod bench;
pub mod error;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
