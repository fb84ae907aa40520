//! Rotation-invariant disc and half-cylinder models solved in Fourier modes.

pub mod model;
pub mod galerkin;
pub mod case_study;
pub mod ode;
pub mod subspace;

pub use model::{AlphaProfile, FourierModel};
