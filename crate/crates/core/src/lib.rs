//! Calderon projectors, boundary conditions and Weyl asymptotics for
//! elliptic operators on manifolds with boundary.

pub mod calderon;
pub mod disc;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod opfile;
pub mod pairing;
pub mod report;
pub mod json;
pub mod lopatinskii;
pub mod special;
pub mod suite;
pub mod symbol;
pub mod weyl;

pub use error::{Error, Result};

/// Sizes the global worker pool. Call once, before any parallel work.
pub fn configure_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}
