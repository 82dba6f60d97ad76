//! Behavioral cloning: mean squared error between the dataset actions and
//! a deterministic policy.

use super::common::{l2, Harness, TrainConfig, TrainContext, TrainLog};
use crate::error::Result;
use crate::nn::{Mlp, OptimState, PolicyArtifact, PolicyHead};

pub fn train(ctx: &TrainContext, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    let mut h = Harness::new(cfg);
    let mut actor = Mlp::new(&ctx.actor_dims(cfg), &mut h.rng);
    let mut opt = OptimState::new(actor.params().len(), cfg.actor_lr);

    for step in 0..cfg.gradient_steps {
        let b = ctx.sample_batch(&mut h.rng, cfg.batch_size);
        let (cache, out) = actor.forward_batch(&b.s, b.batch)?;
        let inv_b = 1.0 / b.batch as f64;
        let mut loss = 0.0;
        let og: Vec<f64> = out
            .iter()
            .zip(&b.a)
            .map(|(&p, &a)| {
                let d = p - a;
                loss += d * d * inv_b;
                2.0 * d * inv_b
            })
            .collect();
        let mut grads = vec![0.0; actor.params().len()];
        actor.backward_batch(&cache, &og, &mut grads)?;
        opt.step(actor.params_mut(), &grads);
        h.record(step, cfg.gradient_steps, loss, 0.0, 0.0, l2(&grads));
    }
    Ok((ctx.artifact(cfg, PolicyHead::Deterministic(actor)), h.log))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::common::CrrWeightMode;
    use super::*;
    use crate::data::testutil::synthetic;
    use crate::data::Dataset;
    use crate::geom::Task;
    use crate::nn::AlgoId;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    /// Dataset whose actions come from a fixed linear map of the states.
    pub(crate) fn linear_policy_dataset(seed: u64, episodes: usize, steps: usize) -> (Dataset, Vec<f64>) {
        let obs_dim = 4;
        let act_dim = 2;
        let mut rng = rng_from_seed(seed);
        let w: Vec<f64> = (0..obs_dim * act_dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let mut ds = synthetic(Task::Push, episodes, steps, obs_dim, act_dim, seed);
        let n = ds.n_transitions();
        for i in 0..n {
            for o in 0..act_dim {
                let mut v = 0.0;
                for j in 0..obs_dim {
                    v += w[o * obs_dim + j] * ds.observations[i * obs_dim + j] as f64;
                }
                ds.actions[i * act_dim + o] = v as f32;
            }
        }
        (ds, w)
    }

    fn quick_cfg(algo: AlgoId) -> TrainConfig {
        TrainConfig {
            algo,
            gradient_steps: 8000,
            batch_size: 64,
            hidden: vec![32, 32],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            crr_mode: CrrWeightMode::Indicator,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_linear_generating_policy() {
        let (ds, w) = linear_policy_dataset(3, 6, 50);
        // A linear head makes the regression convex; the oracle is the
        // exact generating map.
        let mut cfg = quick_cfg(AlgoId::Bc);
        cfg.hidden = vec![];
        cfg.gradient_steps = 12000;
        let (art, log) = train(&TrainContext::prepare(&ds, &cfg).unwrap(), &cfg).unwrap();
        assert!(log.all_finite());
        // Held-out states from the same distribution.
        let mut rng = rng_from_seed(99);
        let mut mse = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect();
            let pred = art.act(&s).unwrap();
            for o in 0..2 {
                let mut v = 0.0;
                for j in 0..4 {
                    v += w[o * 4 + j] * s[j];
                }
                mse += (pred[o] - v) * (pred[o] - v);
            }
        }
        mse /= (trials * 2) as f64;
        assert!(mse < 1e-4, "held-out mse {mse}");
    }

    #[test]
    fn one_transition_dataset_converges_to_that_action() {
        let mut ds = synthetic(Task::Push, 1, 1, 3, 2, 5);
        ds.actions = vec![0.31, -0.62];
        let mut cfg = quick_cfg(AlgoId::Bc);
        cfg.gradient_steps = 4000;
        let (art, _) = train(&TrainContext::prepare(&ds, &cfg).unwrap(), &cfg).unwrap();
        let raw: Vec<f64> = ds.observations.iter().map(|&v| v as f64).collect();
        let out = art.act(&raw).unwrap();
        assert!((out[0] - 0.31).abs() < 1e-3 && (out[1] + 0.62).abs() < 1e-3, "{out:?}");
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let (ds, _) = linear_policy_dataset(11, 4, 40);
        let cfg = quick_cfg(AlgoId::Bc);
        let (a1, log1) = train(&TrainContext::prepare(&ds, &cfg).unwrap(), &cfg).unwrap();
        let (a2, log2) = train(&TrainContext::prepare(&ds, &cfg).unwrap(), &cfg).unwrap();
        assert!(log1.rows.last().unwrap().actor_loss < log1.rows[0].actor_loss);
        assert_eq!(a1, a2);
        assert_eq!(log1.rows.len(), log2.rows.len());
        let (PolicyHead::Deterministic(n1), PolicyHead::Deterministic(n2)) = (&a1.head, &a2.head)
        else {
            panic!("wrong head")
        };
        for (x, y) in n1.params().iter().zip(n2.params()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut ds = synthetic(Task::Push, 1, 1, 3, 2, 5);
        ds.episodes.clear();
        ds.observations.clear();
        ds.actions.clear();
        ds.rewards.clear();
        let cfg = quick_cfg(AlgoId::Bc);
        assert!(TrainContext::prepare(&ds, &cfg).is_err());
    }
}
