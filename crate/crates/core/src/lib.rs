//! Communities of dynamical influence in directed weighted graphs.
//!
//! The pipeline: build or load a [`graph::Graph`], extract left eigenvectors
//! ([`spectra`]), detect communities led by locally dominant vertices
//! ([`cdi`]), then seed a perturbation optimiser that maximises the rate of
//! perturbation-driven consensus ([`optimizer`], [`consensus`]). The
//! [`baselines`] and [`matching`] modules hold the comparison methods and the
//! community-overlap similarity used for 3D-embedded graphs.

pub mod baselines;
pub mod cdi;
pub mod consensus;
pub mod error;
pub mod graph;
pub mod matching;
pub mod optimizer;
pub mod spectra;

pub use error::{Error, Result};

/// Runs faer's dense kernels single-threaded. Useful when the caller already
/// parallelises over independent graphs.
pub fn set_sequential_linear_algebra() {
    faer::set_global_parallelism(faer::Par::Seq);
}
