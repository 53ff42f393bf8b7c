//! Memory-efficient adaptive optimization: Subset-Norm step sizes and
//! Subspace-Momentum, composed through a generic momentum × adaptive-step
//! template, plus the analysis and experiment harness used to check them.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod noise_models;
pub mod optim;
pub mod partition;
pub mod subsetnorm;
pub mod subspace;

pub use error::{Error, Result};
