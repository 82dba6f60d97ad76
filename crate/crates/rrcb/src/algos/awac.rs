//! Advantage-weighted actor critic: likelihood regression with
//! exponential-advantage weights, keeping the policy close to the data.

use super::common::{
    gaussian_awr_step, mean, sample_actions, Harness, QNet, TargetNet, TrainConfig, TrainContext,
    TrainLog,
};
use crate::error::Result;
use crate::nn::{GaussianPolicy, Mlp, OptimState, PolicyArtifact, PolicyHead};

pub fn train(ctx: &TrainContext, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    let mut h = Harness::new(cfg);
    let mut actor = GaussianPolicy::new(Mlp::new(&ctx.actor_dims(cfg), &mut h.rng), cfg.init_log_std);
    let mut critic = QNet::new(&ctx.value_dims(cfg, true), &mut h.rng);
    let mut critic_tgt = TargetNet::of(&critic.net);
    let mut actor_opt = OptimState::new(actor.param_count(), cfg.actor_lr);
    let mut critic_opt = OptimState::new(critic.net.params().len(), cfg.critic_lr);

    for step in 0..cfg.gradient_steps {
        let b = ctx.sample_batch(&mut h.rng, cfg.batch_size);

        let (_, mu2) = actor.mean.forward_batch(&b.s2, b.batch)?;
        let a2 = sample_actions(&mu2, &actor.log_std, b.batch, &mut h.rng);
        let in2 = critic.concat(&b.s2, &a2, b.batch);
        let (_, q2) = critic_tgt.net.forward_batch(&in2, b.batch)?;
        let targets: Vec<f64> =
            b.r.iter().zip(&q2).map(|(&r, &q)| r + cfg.gamma * q).collect();

        let in1 = critic.concat(&b.s, &b.a, b.batch);
        let (cache, q1) = critic.net.forward_batch(&in1, b.batch)?;
        let inv_b = 1.0 / b.batch as f64;
        let mut critic_loss = 0.0;
        let og: Vec<f64> = q1
            .iter()
            .zip(&targets)
            .map(|(&q, &y)| {
                let d = q - y;
                critic_loss += d * d * inv_b;
                2.0 * d * inv_b
            })
            .collect();
        let mut cgrads = vec![0.0; critic.net.params().len()];
        critic.net.backward_batch(&cache, &og, &mut cgrads)?;
        critic_opt.step(critic.net.params_mut(), &cgrads);
        critic_tgt.track(&critic.net, cfg.target_rate);

        // Advantage against the value of the current policy mean.
        let (_, mu) = actor.mean.forward_batch(&b.s, b.batch)?;
        let baseline = critic.values(&b.s, &mu, b.batch)?;
        let q_data = critic.values(&b.s, &b.a, b.batch)?;
        let weights: Vec<f64> = q_data
            .iter()
            .zip(&baseline)
            .map(|(&q, &v)| ((q - v) / cfg.awac_lambda).exp().min(cfg.awr_clip))
            .collect();
        debug_assert!(weights.iter().all(|&w| w >= 0.0 && w <= cfg.awr_clip));

        let mut gnorm = 0.0;
        let actor_loss =
            gaussian_awr_step(&mut actor, &mut actor_opt, &b.s, &b.a, &weights, b.batch, &mut gnorm)?;
        h.record(step, cfg.gradient_steps, actor_loss, critic_loss, mean(&q_data), gnorm);
    }
    Ok((ctx.artifact(cfg, PolicyHead::Gaussian(actor)), h.log))
}

#[cfg(test)]
mod tests {
    use super::super::bc;
    use super::super::crr::tests::{bandit_cfg, bandit_dataset, bandit_policy_mean};
    use super::*;
    use crate::nn::AlgoId;

    #[test]
    fn bandit_prefers_rewarded_arm() {
        let ds = bandit_dataset(64);
        let mut cfg = bandit_cfg(AlgoId::Awac);
        cfg.awac_lambda = 0.3;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (art, log) = train(&ctx, &cfg).unwrap();
        assert!(log.all_finite());
        let m = bandit_policy_mean(&art);
        assert!((m - 0.5).abs() < 0.1, "policy mean {m}");
    }

    #[test]
    fn infinite_lambda_matches_behavioral_cloning() {
        let (ds, _) = bc::tests::linear_policy_dataset(6, 4, 40);
        let mut cfg = bandit_cfg(AlgoId::Awac);
        cfg.awac_lambda = 1e12;
        cfg.hidden = vec![];
        cfg.gradient_steps = 6000;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (art, _) = train(&ctx, &cfg).unwrap();

        let mut bc_cfg = cfg.clone();
        bc_cfg.algo = AlgoId::Bc;
        let (bc_art, _) =
            bc::train(&TrainContext::prepare(&ds, &bc_cfg).unwrap(), &bc_cfg).unwrap();

        let mut rng = crate::rng::rng_from_seed(21);
        use rand::Rng;
        let mut max_diff: f64 = 0.0;
        for _ in 0..100 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect();
            for (x, y) in art.act(&s).unwrap().iter().zip(&bc_art.act(&s).unwrap()) {
                max_diff = max_diff.max((x - y).abs());
            }
        }
        assert!(max_diff < 0.15, "max diff {max_diff}");
    }

    #[test]
    fn weights_respect_the_clip() {
        // Exponential weights with a tiny temperature saturate at the clip
        // without overflowing.
        let ds = bandit_dataset(32);
        let mut cfg = bandit_cfg(AlgoId::Awac);
        cfg.awac_lambda = 1e-6;
        cfg.gradient_steps = 200;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (_, log) = train(&ctx, &cfg).unwrap();
        assert!(log.all_finite());
    }
}
