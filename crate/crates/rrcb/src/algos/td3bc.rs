//! TD3+BC with a spatial smoothness regularizer: twin critics with
//! clipped-double-Q targets and target-policy smoothing, and an actor that
//! trades off Q ascent, behavioral cloning and similarity of actions at
//! nearby (perturbed) states.

use super::common::{l2, mean, Harness, QNet, TargetNet, TrainConfig, TrainContext, TrainLog};
use crate::error::Result;
use crate::nn::{Mlp, OptimState, PolicyArtifact, PolicyHead};
use crate::rng::next_gaussian;

pub fn train(ctx: &TrainContext, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    let mut h = Harness::new(cfg);
    let mut actor = Mlp::new(&ctx.actor_dims(cfg), &mut h.rng);
    let mut actor_tgt = TargetNet::of(&actor);
    let mut q1 = QNet::new(&ctx.value_dims(cfg, true), &mut h.rng);
    let mut q2 = QNet::new(&ctx.value_dims(cfg, true), &mut h.rng);
    let mut q1_tgt = TargetNet::of(&q1.net);
    let mut q2_tgt = TargetNet::of(&q2.net);
    let mut actor_opt = OptimState::new(actor.params().len(), cfg.actor_lr);
    let mut q1_opt = OptimState::new(q1.net.params().len(), cfg.critic_lr);
    let mut q2_opt = OptimState::new(q2.net.params().len(), cfg.critic_lr);

    let mut last_actor_loss = 0.0;
    let mut last_gnorm = 0.0;
    let ad = ctx.act_dim;

    for step in 0..cfg.gradient_steps {
        let b = ctx.sample_batch(&mut h.rng, cfg.batch_size);
        let inv_b = 1.0 / b.batch as f64;

        // Clipped double-Q targets with target-policy smoothing.
        let (_, mut a2) = actor_tgt.net.forward_batch(&b.s2, b.batch)?;
        for v in a2.iter_mut() {
            let eps = (cfg.policy_noise * next_gaussian(&mut h.rng))
                .clamp(-cfg.noise_clip, cfg.noise_clip);
            *v = (v.clamp(-1.0, 1.0) + eps).clamp(-1.0, 1.0);
        }
        let in2 = q1.concat(&b.s2, &a2, b.batch);
        let (_, q1n) = q1_tgt.net.forward_batch(&in2, b.batch)?;
        let (_, q2n) = q2_tgt.net.forward_batch(&in2, b.batch)?;
        let targets: Vec<f64> = b
            .r
            .iter()
            .zip(q1n.iter().zip(&q2n))
            .map(|(&r, (&x, &y))| r + cfg.gamma * x.min(y))
            .collect();

        let in1 = q1.concat(&b.s, &b.a, b.batch);
        let mut critic_loss = 0.0;
        let mut q_mean_log = 0.0;
        for (qnet, opt, tgt) in [
            (&mut q1, &mut q1_opt, &mut q1_tgt),
            (&mut q2, &mut q2_opt, &mut q2_tgt),
        ] {
            let (cache, q) = qnet.net.forward_batch(&in1, b.batch)?;
            let og: Vec<f64> = q
                .iter()
                .zip(&targets)
                .map(|(&qv, &y)| {
                    let d = qv - y;
                    critic_loss += d * d * inv_b;
                    2.0 * d * inv_b
                })
                .collect();
            let mut grads = vec![0.0; qnet.net.params().len()];
            qnet.net.backward_batch(&cache, &og, &mut grads)?;
            opt.step(qnet.net.params_mut(), &grads);
            tgt.track(&qnet.net, cfg.target_rate);
            q_mean_log = mean(&q);
        }

        // Delayed actor update.
        if step % cfg.policy_delay.max(1) == 0 {
            let (cache_pi, pi) = actor.forward_batch(&b.s, b.batch)?;
            let pic: Vec<f64> = pi.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
            let in_pi = q1.concat(&b.s, &pic, b.batch);
            let (qcache, q_pi) = q1.net.forward_batch(&in_pi, b.batch)?;
            let q_abs_mean = q_pi.iter().map(|q| q.abs()).sum::<f64>() * inv_b;
            let lambda = cfg.td3bc_alpha / (q_abs_mean + 1e-12);

            // -lambda Q term through the critic input.
            let og_q: Vec<f64> = vec![-lambda * inv_b; b.batch];
            let mut scratch = vec![0.0; q1.net.params().len()];
            let in_grads = q1.net.backward_batch(&qcache, &og_q, &mut scratch)?;
            let total = ctx.obs_dim + ad;
            let mut dpi = vec![0.0; b.batch * ad];
            for i in 0..b.batch {
                for j in 0..ad {
                    let saturated = pi[i * ad + j].abs() >= 1.0;
                    dpi[i * ad + j] =
                        if saturated { 0.0 } else { in_grads[i * total + ctx.obs_dim + j] };
                }
            }

            // Behavioral-cloning term.
            let mut bc_loss = 0.0;
            for i in 0..b.batch * ad {
                let d = pi[i] - b.a[i];
                bc_loss += d * d * inv_b;
                dpi[i] += 2.0 * d * inv_b;
            }

            // Spatial smoothness: actions at perturbed (normalized) states
            // should match actions at the originals. Gradients flow
            // through both branches.
            let mut smooth_loss = 0.0;
            let mut agrads = vec![0.0; actor.params().len()];
            if cfg.smooth_weight > 0.0 && cfg.smooth_sigma > 0.0 {
                let mut s_pert = b.s.clone();
                for v in s_pert.iter_mut() {
                    *v += cfg.smooth_sigma * next_gaussian(&mut h.rng);
                }
                let (cache_p, pi_p) = actor.forward_batch(&s_pert, b.batch)?;
                let mut dpi_p = vec![0.0; b.batch * ad];
                for i in 0..b.batch * ad {
                    let d = pi[i] - pi_p[i];
                    smooth_loss += cfg.smooth_weight * d * d * inv_b;
                    dpi[i] += cfg.smooth_weight * 2.0 * d * inv_b;
                    dpi_p[i] = -cfg.smooth_weight * 2.0 * d * inv_b;
                }
                actor.backward_batch(&cache_p, &dpi_p, &mut agrads)?;
            }
            actor.backward_batch(&cache_pi, &dpi, &mut agrads)?;
            actor_opt.step(actor.params_mut(), &agrads);
            actor_tgt.track(&actor, cfg.target_rate);

            last_actor_loss = -lambda * mean(&q_pi) + bc_loss + smooth_loss;
            last_gnorm = l2(&agrads);
        }

        h.record(step, cfg.gradient_steps, last_actor_loss, critic_loss, q_mean_log, last_gnorm);
    }
    Ok((ctx.artifact(cfg, PolicyHead::Deterministic(actor)), h.log))
}
