//! Minimal feed-forward network stack: rectified-linear MLPs with manual
//! reverse-mode gradients, an adaptive-moment optimizer, a diagonal
//! Gaussian policy head and serialized policy artifacts.
//!
//! Everything is f64 and bit-deterministic given (seed, data order, config).

mod adam;
mod artifact;
mod gaussian;
mod mlp;

pub use adam::OptimState;
pub use artifact::{AlgoId, PolicyArtifact, PolicyHead};
pub use gaussian::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{finite_difference_grad, max_relative_error, BatchCache, Mlp, MlpCache, MlpGrads};
