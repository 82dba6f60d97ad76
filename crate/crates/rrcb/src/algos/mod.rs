//! The six offline training procedures: behavioral cloning, critic
//! regularized regression, advantage-weighted actor critic, conservative
//! Q-learning, implicit Q-learning and TD3+BC with a spatial smoothness
//! regularizer. Every trainer consumes a dataset and produces a policy
//! artifact plus a training log, bit-deterministically given the seed.

mod awac;
mod bc;
mod common;
mod cql;
mod crr;
mod iql;
mod td3bc;

pub use common::{CrrWeightMode, TrainConfig, TrainLog};

use crate::data::Dataset;
use crate::error::Result;
use crate::nn::{AlgoId, PolicyArtifact};
use common::TrainContext;

/// Trains the configured algorithm on `dataset`. History stacking and
/// observation normalization happen inside; the returned artifact carries
/// everything needed to run the policy on raw observations.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    cfg.validate()?;
    let ctx = TrainContext::prepare(dataset, cfg)?;
    match cfg.algo {
        AlgoId::Bc => bc::train(&ctx, cfg),
        AlgoId::Crr => crr::train(&ctx, cfg),
        AlgoId::Awac => awac::train(&ctx, cfg),
        AlgoId::Cql => cql::train(&ctx, cfg),
        AlgoId::Iql => iql::train(&ctx, cfg),
        AlgoId::Td3Bc => td3bc::train(&ctx, cfg),
    }
}

/// Fitted state value of the first dataset observation after IQL
/// training; a diagnostic hook for the verification suite's expectile
/// checks.
pub fn iql_fitted_value(dataset: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    let ctx = TrainContext::prepare(dataset, cfg)?;
    let (_, _, vnet, _) = iql::train_with_values(&ctx, cfg)?;
    Ok(vnet.forward(ctx.obs_row(0))?[0])
}
