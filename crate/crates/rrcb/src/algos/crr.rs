//! Critic regularized regression: behavioral cloning weighted by an
//! advantage-based function of the critic, f(Q, pi, s, a), either the
//! positive-advantage indicator or a clipped exponential.

use super::common::{
    gaussian_awr_step, mean, sample_actions, CrrWeightMode, Harness, QNet, TargetNet,
    TrainConfig, TrainContext, TrainLog,
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

        // Critic: one-step TD with a policy sample at the successor state.
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

        // Advantage against the mean critic value of policy samples.
        let (_, mu) = actor.mean.forward_batch(&b.s, b.batch)?;
        let m = cfg.crr_action_samples.max(1);
        let mut baseline = vec![0.0; b.batch];
        for _ in 0..m {
            let aj = sample_actions(&mu, &actor.log_std, b.batch, &mut h.rng);
            let qs = critic.values(&b.s, &aj, b.batch)?;
            for (bl, q) in baseline.iter_mut().zip(&qs) {
                *bl += q / m as f64;
            }
        }
        let q_data = critic.values(&b.s, &b.a, b.batch)?;
        let weights: Vec<f64> = q_data
            .iter()
            .zip(&baseline)
            .map(|(&q, &v)| {
                let adv = q - v;
                match cfg.crr_mode {
                    CrrWeightMode::Indicator => {
                        if adv > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    CrrWeightMode::Exponential => (adv / cfg.crr_temp).exp().min(cfg.crr_exp_clip),
                }
            })
            .collect();

        let mut gnorm = 0.0;
        let actor_loss =
            gaussian_awr_step(&mut actor, &mut actor_opt, &b.s, &b.a, &weights, b.batch, &mut gnorm)?;
        h.record(step, cfg.gradient_steps, actor_loss, critic_loss, mean(&q_data), gnorm);
    }
    Ok((ctx.artifact(cfg, PolicyHead::Gaussian(actor)), h.log))
}
