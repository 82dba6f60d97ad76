//! Desk-scale benchmark for offline learning of tri-fingertip cube
//! manipulation: a deterministic simulator for the Push and Lift tasks,
//! scripted behavior policies, episodic dataset generation and transforms,
//! a small feed-forward network stack, six offline training procedures and
//! the fixed-goal evaluation protocol with its scoring arithmetic.

pub mod algos;
pub(crate) mod bytes;
pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod eval;
pub mod geom;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub use geom::Task;
