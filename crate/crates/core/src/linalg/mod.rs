//! Dense kernels, top-k singular subspaces, sketching frames and seeded RNG.

mod frame;
mod hadamard;
mod matrix;
pub mod rng;
mod svd;

pub use frame::{make_frame, Frame, FrameKind};
pub use hadamard::fwht;
pub use matrix::Matrix;
pub use svd::{randomized_range_svd, topk_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
